import math
from dataclasses import dataclass
from pathlib import Path
from typing import List, Sequence

from .._utils.file_utils import atomic_write_text, read_and_close_file
from ..exceptions import ErrorCode, MetricsException
from .modality import Label

SCORE_FILE_HEADER = 'sample_id\tscore\tlabel\tpai'


@dataclass(frozen=True)
class ScoreRecord:
    """Higher score means more bonafide."""
    sample_id: str
    score: float
    label: Label
    pai: str | None = None

    def __post_init__(self):
        object.__setattr__(self, 'label', Label.parse(self.label))
        score = float(self.score)
        if not math.isfinite(score) or score < 0.0 or score > 1.0:
            raise MetricsException(ErrorCode.VALUE_RANGE,
                                   f'Score of "{self.sample_id}" must be finite and within [0, 1], got {score}.')
        object.__setattr__(self, 'score', score)

    @property
    def is_bonafide(self) -> bool:
        return self.label is Label.BONAFIDE


def write_score_file(path: str | Path, records: Sequence[ScoreRecord]):
    # repr keeps floats round-trip exact, so metrics recomputed from the file match the report.
    lines = [SCORE_FILE_HEADER]
    for r in records:
        lines.append(f'{r.sample_id}\t{r.score!r}\t{r.label.value}\t{r.pai or ""}')
    atomic_write_text(path, '\n'.join(lines) + '\n')


def read_score_file(path: str | Path) -> List[ScoreRecord]:
    records = []
    for line_no, line in enumerate(read_and_close_file(path).splitlines(), start=1):
        if not line.strip() or line == SCORE_FILE_HEADER:
            continue
        cells = line.split('\t')
        if len(cells) != 4:
            raise MetricsException(ErrorCode.PARSE_ERROR,
                                   f'{path}:{line_no}: expected 4 tab-separated fields, got {len(cells)}.')
        sample_id, score, label, pai = cells
        records.append(ScoreRecord(sample_id, float(score), Label.parse(label), pai or None))
    return records
