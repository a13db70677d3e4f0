"""
Presentation-attack-detection metrics.

Bonafide is the positive class and a record is decided bonafide iff `score >= threshold`.
APCER is the fraction of attacks accepted, BPCER the fraction of bonafide rejected and
ACER their mean. All rates are computed from integer counts.
"""
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .core.records import ScoreRecord
from .exceptions import MetricsException, ErrorCode

REPORTED_FPR_TARGETS = (0.001, 0.01)
FIXED_THRESHOLD = 0.5
UNKNOWN_PAI = 'unknown'


class ThresholdRule(Enum):
    EER_ON_VALIDATION = 'eer_on_validation'
    FIXED_0_5 = 'fixed_0_5'

    @classmethod
    def parse(cls, raw: 'str | ThresholdRule') -> 'ThresholdRule':
        if isinstance(raw, ThresholdRule):
            return raw
        return cls(raw.strip().lower())


def _split(records: Sequence[ScoreRecord]) -> Tuple[np.ndarray, np.ndarray]:
    bonafide = np.sort(np.array([r.score for r in records if r.is_bonafide], dtype=np.float64))
    attack = np.sort(np.array([r.score for r in records if not r.is_bonafide], dtype=np.float64))
    if bonafide.size == 0 or attack.size == 0:
        raise MetricsException(ErrorCode.ONE_CLASS_ONLY,
                               f'Need both classes, got {bonafide.size} bonafide and {attack.size} attack records.')
    return bonafide, attack


def _accepted(sorted_scores: np.ndarray, thresholds: np.ndarray) -> np.ndarray:
    """How many scores are >= each threshold."""
    return sorted_scores.size - np.searchsorted(sorted_scores, thresholds, side='left')


def classify_rates(records: Sequence[ScoreRecord], threshold: float) -> Tuple[float, float, float]:
    bonafide, attack = _split(records)
    t = np.array([threshold], dtype=np.float64)
    false_accepts = int(_accepted(attack, t)[0])
    false_rejects = bonafide.size - int(_accepted(bonafide, t)[0])
    apcer = false_accepts / attack.size
    bpcer = false_rejects / bonafide.size
    return apcer, bpcer, (apcer + bpcer) / 2


def eer_candidates(scores: np.ndarray) -> np.ndarray:
    distinct = np.unique(scores)
    midpoints = (distinct[:-1] + distinct[1:]) / 2
    return np.concatenate([[-np.inf], midpoints, [np.inf]])


def eer_threshold(records: Sequence[ScoreRecord]) -> Tuple[float, float]:
    """
    Threshold minimising |APCER - BPCER| over the midpoints between adjacent distinct scores and
    the two infinite sentinels; ties go to the lowest threshold. Returns (threshold, eer).
    """
    bonafide, attack = _split(records)
    candidates = eer_candidates(np.concatenate([bonafide, attack]))
    false_accepts = _accepted(attack, candidates).astype(np.int64)
    false_rejects = (bonafide.size - _accepted(bonafide, candidates)).astype(np.int64)
    # |fa/n_a - fr/n_b| scaled by n_a * n_b keeps the comparison exact.
    gap = np.abs(false_accepts * bonafide.size - false_rejects * attack.size)
    best = int(np.argmin(gap))
    apcer = int(false_accepts[best]) / attack.size
    bpcer = int(false_rejects[best]) / bonafide.size
    return float(candidates[best]), (apcer + bpcer) / 2


def tpr_at_fpr(records: Sequence[ScoreRecord], fpr_target: float) -> float:
    if not 0.0 < fpr_target < 1.0:
        raise MetricsException(ErrorCode.INVALID_ARGUMENT, f'fpr_target must lie in (0, 1), got {fpr_target}.')
    bonafide, attack = _split(records)
    candidates = np.concatenate([np.unique(np.concatenate([bonafide, attack])), [np.inf]])
    false_positives = _accepted(attack, candidates)
    true_positives = _accepted(bonafide, candidates)
    limit = Fraction(fpr_target)
    best = max(int(tp) for fp, tp in zip(false_positives, true_positives)
               if Fraction(int(fp), attack.size) <= limit)
    return best / bonafide.size


def apcer_per_pai(records: Sequence[ScoreRecord], threshold: float) -> Dict[str, float]:
    grouped: Dict[str, List[float]] = {}
    for r in records:
        if not r.is_bonafide:
            grouped.setdefault(r.pai or UNKNOWN_PAI, []).append(r.score)
    return {pai: sum(s >= threshold for s in scores) / len(scores) for pai, scores in sorted(grouped.items())}


def _fpr_key(target: float) -> str:
    return f'tpr_at_fpr_{target:g}'


@dataclass(frozen=True)
class EvalReport:
    apcer: float
    bpcer: float
    acer: float
    eer: float
    threshold: float
    tpr_at_fpr: Dict[float, float]
    n_bonafide: int
    n_attack: int
    threshold_rule: ThresholdRule
    apcer_per_pai: Dict[str, float] = field(default_factory=dict)
    val_eer: float | None = None

    @property
    def counts(self) -> Tuple[int, int]:
        return self.n_bonafide, self.n_attack

    def to_json(self) -> dict:
        out = {
            'apcer': self.apcer,
            'bpcer': self.bpcer,
            'acer': self.acer,
            'eer': self.eer,
            'threshold': self.threshold,
            'n_bonafide': self.n_bonafide,
            'n_attack': self.n_attack,
            'threshold_rule': self.threshold_rule.value,
            'apcer_per_pai': dict(self.apcer_per_pai),
            'val_eer': self.val_eer,
        }
        for target, value in self.tpr_at_fpr.items():
            out[_fpr_key(target)] = value
        return out

    @classmethod
    def from_json(cls, d: dict) -> 'EvalReport':
        return cls(
            apcer=d['apcer'], bpcer=d['bpcer'], acer=d['acer'], eer=d['eer'], threshold=d['threshold'],
            tpr_at_fpr={t: d[_fpr_key(t)] for t in REPORTED_FPR_TARGETS},
            n_bonafide=d['n_bonafide'], n_attack=d['n_attack'],
            threshold_rule=ThresholdRule.parse(d['threshold_rule']),
            apcer_per_pai=dict(d.get('apcer_per_pai', {})), val_eer=d.get('val_eer'),
        )


def build_report(val_records: Sequence[ScoreRecord], test_records: Sequence[ScoreRecord],
                 rule: ThresholdRule) -> EvalReport:
    """Pick the threshold by `rule`, then measure every rate on the test records."""
    rule = ThresholdRule.parse(rule)
    if rule is ThresholdRule.EER_ON_VALIDATION:
        threshold, val_eer = eer_threshold(val_records)
    else:
        threshold, val_eer = FIXED_THRESHOLD, None

    apcer, bpcer, acer = classify_rates(test_records, threshold)
    _, eer = eer_threshold(test_records)
    n_bonafide = sum(r.is_bonafide for r in test_records)
    return EvalReport(
        apcer=apcer, bpcer=bpcer, acer=acer, eer=eer, threshold=threshold,
        tpr_at_fpr={t: tpr_at_fpr(test_records, t) for t in REPORTED_FPR_TARGETS},
        n_bonafide=n_bonafide, n_attack=len(test_records) - n_bonafide,
        threshold_rule=rule,
        apcer_per_pai=apcer_per_pai(test_records, threshold),
        val_eer=val_eer,
    )
