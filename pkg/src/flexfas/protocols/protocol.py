from dataclasses import dataclass
from enum import Enum
from typing import Dict, FrozenSet, Iterable, List

from ..core.modality import ModalityId, FULL_MODALITY_SET, modality_set_name
from ..exceptions import RunPlanException, ErrorCode
from ..metrics import ThresholdRule


class ProtocolId(Enum):
    P1 = 'P1'
    P2 = 'P2'
    P3 = 'P3'
    P4 = 'P4'

    @classmethod
    def parse(cls, raw: 'str | ProtocolId') -> 'ProtocolId':
        if isinstance(raw, ProtocolId):
            return raw
        return cls(raw.strip().upper())


class Split(Enum):
    TRAIN = 'train'
    VAL = 'val'
    TEST = 'test'

    @classmethod
    def parse(cls, raw: 'str | Split') -> 'Split':
        if isinstance(raw, Split):
            return raw
        aliases = {'dev': 'val', 'validation': 'val'}
        raw = raw.strip().lower()
        return cls(aliases.get(raw, raw))


class RunMode(Enum):
    SEPARATE = 'separate'
    UNIFIED = 'unified'

    @classmethod
    def parse(cls, raw: 'str | RunMode') -> 'RunMode':
        if isinstance(raw, RunMode):
            return raw
        return cls(raw.strip().lower())


@dataclass(frozen=True)
class ProtocolSpec:
    id: ProtocolId
    eval_modalities: FrozenSet[ModalityId]
    threshold_rule: ThresholdRule = ThresholdRule.EER_ON_VALIDATION
    train_modalities: FrozenSet[ModalityId] = FULL_MODALITY_SET

    def __post_init__(self):
        if self.train_modalities != FULL_MODALITY_SET:
            raise RunPlanException(f'{self.id.value} must train on all modalities')
        if ModalityId.RGB not in self.eval_modalities:
            raise RunPlanException(f'{self.id.value} must evaluate with RGB', ErrorCode.MISSING_RGB)

    def with_rule(self, rule: ThresholdRule) -> 'ProtocolSpec':
        return ProtocolSpec(self.id, self.eval_modalities, rule, self.train_modalities)

    @property
    def name(self) -> str:
        return f'{self.id.value} ({modality_set_name(self.eval_modalities)})'


PROTOCOLS: Dict[ProtocolId, ProtocolSpec] = {
    ProtocolId.P1: ProtocolSpec(ProtocolId.P1, frozenset({ModalityId.RGB})),
    ProtocolId.P2: ProtocolSpec(ProtocolId.P2, frozenset({ModalityId.RGB, ModalityId.DEPTH})),
    ProtocolId.P3: ProtocolSpec(ProtocolId.P3, frozenset({ModalityId.RGB, ModalityId.IR})),
    ProtocolId.P4: ProtocolSpec(ProtocolId.P4, FULL_MODALITY_SET),
}


def get_protocols(ids: Iterable['str | ProtocolId'] | None = None,
                  rule: ThresholdRule | None = None) -> List[ProtocolSpec]:
    ids = list(ProtocolId) if ids is None else [ProtocolId.parse(i) for i in ids]
    if len(set(ids)) != len(ids):
        raise RunPlanException(f'Duplicate protocols in {[i.value for i in ids]}')
    specs = [PROTOCOLS[i] for i in ids]
    return [s.with_rule(rule) for s in specs] if rule is not None else specs
