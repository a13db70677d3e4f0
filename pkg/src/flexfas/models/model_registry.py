from typing import Callable, Dict, List, Tuple

from . import _model_info
from .encoders import BranchEncoder, ToyCNN, ToyResNet, ToyViT
from .._utils.str_utils import did_you_mean

EncoderFactory = Callable[[int, Tuple[int, int]], BranchEncoder]

_ENCODER_FACTORIES: Dict[str, EncoderFactory] = {}
_CANONICAL_NAMES: Dict[str, str] = {}


def canonical_arch(arch_name: str) -> str:
    key = arch_name.strip().lower()
    if key not in _CANONICAL_NAMES:
        candidate = did_you_mean(key, _CANONICAL_NAMES.keys())
        raise ValueError(f"Encoder architecture '{arch_name}' not found."
                         + (f" Did you mean '{candidate}'?" if candidate else ''))
    return _CANONICAL_NAMES[key]


def get_encoder_factory(arch_name: str) -> EncoderFactory:
    return _ENCODER_FACTORIES[canonical_arch(arch_name)]


def register_encoder(arch_name: str | List[str], factory: EncoderFactory, canonical: str | None = None):
    if isinstance(arch_name, list):
        canonical = canonical or arch_name[0]
        for name in arch_name:
            register_encoder(name, factory, canonical)
    else:
        canonical = canonical or arch_name
        _ENCODER_FACTORIES[canonical] = factory
        _CANONICAL_NAMES[arch_name.lower()] = canonical


def encoder_list() -> list[str]:
    return sorted(_ENCODER_FACTORIES.keys())


for formal_name, aliases in _model_info.TOY_CNN.items():
    register_encoder(aliases, ToyCNN, formal_name)

for formal_name, aliases in _model_info.TOY_RESNET.items():
    register_encoder(aliases, ToyResNet, formal_name)

for formal_name, aliases in _model_info.TOY_VIT.items():
    register_encoder(aliases, ToyViT, formal_name)
