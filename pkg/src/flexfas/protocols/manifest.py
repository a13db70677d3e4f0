import os
from dataclasses import dataclass
from pathlib import Path
from types import MappingProxyType
from typing import Dict, FrozenSet, Iterator, List, Mapping, Sequence, Tuple

from lark import Lark
from lark.exceptions import UnexpectedInput

from .._logger import LOGGER
from .._utils.file_utils import read_and_close_file_to_root, read_and_close_file, atomic_write_text
from ..core.modality import ModalityId, Label, ALL_MODALITIES
from ..core.sample import ModalitySample, validate_sample
from ..exceptions import ManifestException, ErrorCode
from ..multi_modal.image import read_modality_image
from ..root import MANIFEST_GRAMMAR_PATH
from ._transformer import RawRow, TreeToRawRowsTransformer
from .protocol import Split

MANIFEST_COLUMNS = ('sample_id', 'split', 'dataset_id', 'label', 'pai', 'rgb_path', 'depth_path', 'ir_path')
OPTIONAL_COLUMNS = ('subject_id',)

_PATH_COLUMNS = {
    ModalityId.RGB: 'rgb_path',
    ModalityId.DEPTH: 'depth_path',
    ModalityId.IR: 'ir_path',
}


@dataclass(frozen=True)
class ManifestRow:
    sample_id: str
    split: Split
    dataset_id: str
    label: Label
    pai: str | None
    paths: Mapping[ModalityId, Path]
    subject_id: str = ''
    line: int | None = None

    def has(self, modality: ModalityId) -> bool:
        return modality in self.paths

    @property
    def absent_modalities(self) -> FrozenSet[ModalityId]:
        return frozenset(m for m in ALL_MODALITIES if m not in self.paths)


@dataclass(frozen=True, eq=False)
class DatasetManifest:
    rows: Tuple[ManifestRow, ...]
    src_path: Path | None = None

    def __len__(self) -> int:
        return len(self.rows)

    def __iter__(self) -> Iterator[ManifestRow]:
        return iter(self.rows)

    def split(self, split: Split | str) -> List[ManifestRow]:
        split = Split.parse(split)
        return [row for row in self.rows if row.split is split]

    @property
    def dataset_ids(self) -> FrozenSet[str]:
        return frozenset(row.dataset_id for row in self.rows)

    def split_counts(self) -> Dict[Split, int]:
        return {s: len(self.split(s)) for s in Split}


class ManifestParser:
    def __init__(self):
        grammar = read_and_close_file_to_root(MANIFEST_GRAMMAR_PATH)
        self.parser = Lark(grammar, start='manifest', parser='lalr', propagate_positions=True)
        self.transformer = TreeToRawRowsTransformer()

    def parse_rows(self, text: str, src_path: str) -> List[RawRow]:
        try:
            tree = self.parser.parse(text)
        except UnexpectedInput as e:
            line = e.line if isinstance(e.line, int) and e.line > 0 else None
            raise ManifestException(ErrorCode.PARSE_ERROR, 'malformed manifest text', src_path, line)
        return self.transformer.transform(tree)


_PARSER: ManifestParser | None = None


def _get_parser() -> ManifestParser:
    global _PARSER
    if _PARSER is None:
        _PARSER = ManifestParser()
    return _PARSER


def _check_header(header: RawRow, src_path: str) -> Tuple[str, ...]:
    columns = tuple(c.lower() for c in header.cells)
    if columns not in (MANIFEST_COLUMNS, MANIFEST_COLUMNS + OPTIONAL_COLUMNS):
        raise ManifestException(ErrorCode.PARSE_ERROR,
                                f'header must be {",".join(MANIFEST_COLUMNS)}[,subject_id], got {",".join(columns)}',
                                src_path, header.line)
    return columns


def _resolve(raw_path: str, base_dir: Path) -> Path:
    path = Path(raw_path)
    return path if path.is_absolute() else base_dir / path


def _to_row(raw: RawRow, columns: Sequence[str], src_path: str, base_dir: Path) -> ManifestRow:
    if len(raw.cells) != len(columns):
        raise ManifestException(ErrorCode.PARSE_ERROR,
                                f'expected {len(columns)} fields, got {len(raw.cells)}', src_path, raw.line)
    cells = dict(zip(columns, raw.cells))
    try:
        split = Split.parse(cells['split'])
        label = Label.parse(cells['label'])
    except ValueError as e:
        raise ManifestException(ErrorCode.PARSE_ERROR, str(e), src_path, raw.line)

    if not cells['rgb_path']:
        raise ManifestException(ErrorCode.MISSING_RGB_PATH, f'row "{cells["sample_id"]}" has no rgb_path',
                                src_path, raw.line)
    paths = {m: _resolve(cells[col], base_dir) for m, col in _PATH_COLUMNS.items() if cells[col]}
    return ManifestRow(
        sample_id=cells['sample_id'],
        split=split,
        dataset_id=cells['dataset_id'],
        label=label,
        pai=cells['pai'] or None,
        paths=MappingProxyType(paths),
        subject_id=cells.get('subject_id', ''),
        line=raw.line,
    )


def parse_manifest(text: str, src_path: str = '<string>', base_dir: str | Path | None = None) -> DatasetManifest:
    """Relative image paths resolve against `base_dir` (default: the current directory)."""
    base_dir = Path(base_dir) if base_dir is not None else Path('.')
    raw_rows = _get_parser().parse_rows(text, src_path) if text.strip() else []
    if not raw_rows:
        raise ManifestException(ErrorCode.PARSE_ERROR, 'missing header', src_path, 1)
    columns = _check_header(raw_rows[0], src_path)

    rows: List[ManifestRow] = []
    seen: Dict[str, int | None] = {}
    for raw in raw_rows[1:]:
        row = _to_row(raw, columns, src_path, base_dir)
        if row.sample_id in seen:
            raise ManifestException(ErrorCode.DUPLICATE_ID,
                                    f'sample_id "{row.sample_id}" already defined at line {seen[row.sample_id]}',
                                    src_path, raw.line)
        seen[row.sample_id] = raw.line
        rows.append(row)

    manifest = DatasetManifest(tuple(rows), Path(src_path) if src_path != '<string>' else None)
    LOGGER.info(f'Loaded manifest {src_path}.', rows=len(rows),
                **{s.value: n for s, n in manifest.split_counts().items()})
    partial = sum(1 for row in rows if row.absent_modalities)
    if partial:
        LOGGER.warning(f'{partial} rows in {src_path} lack Depth or IR; those inputs are zero-filled.')
    return manifest


def load_manifest(path: str | Path) -> DatasetManifest:
    path = Path(path)
    if not path.is_file():
        raise ManifestException(ErrorCode.FILE_NOT_FOUND, 'file not found', str(path))
    return parse_manifest(read_and_close_file(path), str(path), path.parent)


def _relative(path: Path, base_dir: Path) -> str:
    try:
        return Path(os.path.relpath(path, base_dir)).as_posix()
    except ValueError:
        return path.as_posix()


def manifest_text(manifest: DatasetManifest, base_dir: str | Path) -> str:
    base_dir = Path(base_dir)
    with_subject = any(row.subject_id for row in manifest.rows)
    header = MANIFEST_COLUMNS + (OPTIONAL_COLUMNS if with_subject else ())
    lines = [','.join(header)]
    for row in manifest.rows:
        cells = [row.sample_id, row.split.value, row.dataset_id, row.label.value, row.pai or '']
        cells += [_relative(row.paths[m], base_dir) if m in row.paths else '' for m in ALL_MODALITIES]
        if with_subject:
            cells.append(row.subject_id)
        lines.append(','.join(cells))
    return '\n'.join(lines) + '\n'


def write_manifest(manifest: DatasetManifest, path: str | Path):
    path = Path(path)
    atomic_write_text(path, manifest_text(manifest, path.parent))


def load_sample(row: ManifestRow) -> ModalitySample:
    images = {}
    for modality, path in row.paths.items():
        try:
            images[modality] = read_modality_image(path, modality)
        except FileNotFoundError:
            raise ManifestException(ErrorCode.FILE_NOT_FOUND, f'{modality.name} image {path} not found',
                                    row.sample_id, row.line)
    sample = ModalitySample(row.sample_id, images, row.label, row.pai, row.subject_id, row.dataset_id)
    validate_sample(sample)
    return sample


def load_samples(manifest: DatasetManifest, split: Split | str | None = None) -> List[ModalitySample]:
    rows = manifest.rows if split is None else manifest.split(split)
    return [load_sample(row) for row in rows]
