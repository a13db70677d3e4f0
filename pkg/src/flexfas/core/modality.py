from enum import Enum
from typing import Dict, FrozenSet, Iterable, Tuple


class ModalityId(Enum):
    RGB = 'rgb'
    DEPTH = 'depth'
    IR = 'ir'

    @classmethod
    def parse(cls, raw: 'str | ModalityId') -> 'ModalityId':
        if isinstance(raw, ModalityId):
            return raw
        return cls(raw.strip().lower())


# RGB first: it is the anchor every protocol keeps.
ALL_MODALITIES: Tuple[ModalityId, ...] = (ModalityId.RGB, ModalityId.DEPTH, ModalityId.IR)
FULL_MODALITY_SET: FrozenSet[ModalityId] = frozenset(ALL_MODALITIES)

MODALITY_CHANNELS: Dict[ModalityId, int] = {
    ModalityId.RGB: 3,
    ModalityId.DEPTH: 1,
    ModalityId.IR: 1,
}


class Label(Enum):
    BONAFIDE = 'bonafide'
    ATTACK = 'attack'

    @classmethod
    def parse(cls, raw: 'str | Label') -> 'Label':
        if isinstance(raw, Label):
            return raw
        return cls(raw.strip().lower())

    @property
    def target(self) -> float:
        return 1.0 if self is Label.BONAFIDE else 0.0


def modality_set(modalities: Iterable['ModalityId | str']) -> FrozenSet[ModalityId]:
    return frozenset(ModalityId.parse(m) for m in modalities)


def modality_set_name(modalities: Iterable[ModalityId]) -> str:
    present = set(modalities)
    return '+'.join(m.name for m in ALL_MODALITIES if m in present)
