"""
Parameter and FLOPs accounting.

FLOPs are profiled with thop on a batch of one at the declared input shape, using flexfas's own
counting rules: 2 x multiply-accumulates for convolutions, linear layers and attention matrix
products, one FLOP per output element for elementwise work (activations, residual adds, gating,
softmax exponentials, attention scaling) and two per element for normalisation layers (scale and shift).
"""
from dataclasses import dataclass
from typing import Callable, Dict, Iterable, List, Mapping, Sequence, Tuple, Type

import torch
from torch import nn
from thop import profile

from .core.modality import ALL_MODALITIES, MODALITY_CHANNELS, ModalityId, modality_set
from .exceptions import CostException, FlexFasException
from .models.encoders import PositionEmbedding
from .models.flex_model import FlexModel, ModelConfig, build_model
from .models.fusion import CrossAttentionMap
from .models.ops import ChannelScale, ElementwiseSum, ScaledDotAttention
from .protocols.protocol import RunMode, ProtocolSpec

FLOPS_CONVENTION = ('flops = 2 x MACs for conv/linear/attention products; 1 per element for activations, '
                    'adds, gating, scaling and softmax; 2 per element for normalisation')
ROOT_NAME = '(root)'

FlopCounter = Callable[[nn.Module, tuple, object], int]


def matmul_flops(n: int, k: int, m: int) -> int:
    """[n, k] @ [k, m]."""
    return 2 * n * k * m


def _count_conv(m: nn.Conv2d, x, y) -> int:
    kh, kw = m.kernel_size
    macs = y.numel() * (m.in_channels // m.groups) * kh * kw
    return 2 * macs + (y.numel() if m.bias is not None else 0)


def _count_linear(m: nn.Linear, x, y) -> int:
    macs = y.numel() * m.in_features
    return 2 * macs + (y.numel() if m.bias is not None else 0)


def _count_norm(m, x, y) -> int:
    return 2 * y.numel()


def _count_elementwise(m, x, y) -> int:
    return y.numel()


def _count_adaptive_avgpool(m, x, y) -> int:
    return x[0].numel()


def _count_sum(m: ElementwiseSum, x, y) -> int:
    return (len(x) - 1) * y.numel()


def _count_cross_attention_map(m: CrossAttentionMap, x, y) -> int:
    query, _ = x
    b, c, h, w = query.shape
    n = h * w
    # Gram product, softmax exponentials, attention-weighted sum.
    return b * (matmul_flops(n, c, n) + n * n + matmul_flops(n, n, c))


def _count_scaled_dot_attention(m: ScaledDotAttention, x, y) -> int:
    q = x[0]
    n, d = q.shape[-2:]
    groups = q.numel() // (n * d)
    # Scores, 1/sqrt(d) scaling plus exponentials, weighted sum.
    return groups * (matmul_flops(n, d, n) + 2 * n * n + matmul_flops(n, n, d))


FLOP_RULES: Dict[Type[nn.Module], FlopCounter] = {
    nn.Conv2d: _count_conv,
    nn.Linear: _count_linear,
    nn.BatchNorm2d: _count_norm,
    nn.LayerNorm: _count_norm,
    nn.ReLU: _count_elementwise,
    nn.GELU: _count_elementwise,
    nn.Sigmoid: _count_elementwise,
    nn.AdaptiveAvgPool2d: _count_adaptive_avgpool,
    ElementwiseSum: _count_sum,
    ChannelScale: _count_elementwise,
    PositionEmbedding: _count_elementwise,
    CrossAttentionMap: _count_cross_attention_map,
    ScaledDotAttention: _count_scaled_dot_attention,
}


def _thop_rule(counter: FlopCounter):
    def rule(m, x, y):
        m.total_ops += torch.DoubleTensor([int(counter(m, x, y))])
    return rule


def _custom_ops(extra: Mapping[Type[nn.Module], FlopCounter] | None) -> Dict[Type[nn.Module], Callable]:
    rules = dict(FLOP_RULES)
    rules.update(extra or {})
    return {module_type: _thop_rule(counter) for module_type, counter in rules.items()}


@dataclass(frozen=True)
class CostReport:
    params: int
    flops: int
    breakdown: Dict[str, Tuple[int, int]]

    def to_json(self) -> dict:
        return {
            'params': self.params,
            'flops': self.flops,
            'breakdown': {name: {'params': p, 'flops': f} for name, (p, f) in self.breakdown.items()},
            'convention': FLOPS_CONVENTION,
        }


def _params_by_part(model: nn.Module) -> Dict[str, int]:
    counts: Dict[str, int] = {}
    for name, p in model.named_parameters():
        if p.requires_grad:
            part = name.split('.')[0] if '.' in name else ROOT_NAME
            counts[part] = counts.get(part, 0) + p.numel()
    for name, _ in model.named_children():
        counts.setdefault(name, 0)
    return counts


def _report(params: Dict[str, int], flops: Dict[str, int]) -> CostReport:
    names = list(params) + [n for n in flops if n not in params]
    breakdown = {n: (params.get(n, 0), flops.get(n, 0)) for n in names}
    return CostReport(params=sum(p for p, _ in breakdown.values()),
                      flops=sum(f for _, f in breakdown.values()),
                      breakdown=breakdown)


def count_params(model: nn.Module) -> CostReport:
    return _report(_params_by_part(model), {})


def _dummy_inputs(model: nn.Module, input_shape: Sequence[int] | None,
                  active: Iterable[ModalityId] | None):
    dtype = next(model.parameters()).dtype
    if isinstance(model, FlexModel):
        h, w = input_shape if input_shape is not None else model.config.branch.image_size
        if h < 1 or w < 1:
            raise CostException(f'Input size must be positive, got {h}x{w}.')
        modalities = modality_set(active) if active is not None else ALL_MODALITIES
        return ({m: torch.zeros(1, MODALITY_CHANNELS[m], h, w, dtype=dtype)
                 for m in ALL_MODALITIES if m in modalities},)
    if active is not None:
        raise CostException('An active modality set only applies to a FlexModel.')
    if input_shape is None or any(d < 1 for d in input_shape):
        raise CostException(f'A positive full input shape is required, got {input_shape}.')
    return (torch.zeros(*input_shape, dtype=dtype),)


@torch.no_grad()
def _check_forward(model: nn.Module, inputs: tuple):
    # thop leaves its hooks and buffers behind when the forward pass raises.
    was_training = model.training
    model.eval()
    try:
        model(*inputs)
    except (RuntimeError, ValueError, FlexFasException) as e:
        raise CostException(f'Forward pass failed at the declared input shape: {e}')
    finally:
        model.train(was_training)


def _flops_by_part(model: nn.Module, inputs: tuple,
                   rules: Mapping[Type[nn.Module], FlopCounter] | None = None) -> Dict[str, int]:
    _check_forward(model, inputs)
    total, _, layers = profile(model, inputs=inputs, custom_ops=_custom_ops(rules), verbose=False,
                               ret_layer_info=True)
    flops = {name: int(round(info[0])) for name, info in layers.items()}
    own = int(round(total)) - sum(flops.values())
    if own:
        flops[ROOT_NAME] = own
    return flops


def count_flops(model: nn.Module, input_shape: Sequence[int] | None = None,
                active: Iterable[ModalityId] | None = None,
                rules: Mapping[Type[nn.Module], FlopCounter] | None = None) -> CostReport:
    """
    `input_shape` is (H, W) for a `FlexModel` (default: its configured image size) and the full
    input tensor shape for any other module. With `active`, only those branches of a `FlexModel`
    are evaluated. `rules` adds or replaces per-module-type counters.
    """
    flops = _flops_by_part(model, _dummy_inputs(model, input_shape, active), rules)
    parts = {name: 0 for name, _ in model.named_children()}
    return _report(parts, flops)


def cost_report(model: nn.Module, input_shape: Sequence[int] | None = None,
                active: Iterable[ModalityId] | None = None) -> CostReport:
    flops = _flops_by_part(model, _dummy_inputs(model, input_shape, active))
    return _report(_params_by_part(model), flops)


@dataclass(frozen=True)
class PlanCost:
    """
    What a run deploys over its protocols. UNIFIED runs one tri-modal model for every protocol;
    SEPARATE runs one model per protocol with only that protocol's branches evaluated.
    """
    mode: RunMode
    n_checkpoints: int
    params_per_model: int
    flops_per_protocol: Dict[str, int]

    @property
    def total_params(self) -> int:
        return self.n_checkpoints * self.params_per_model

    @property
    def total_flops(self) -> int:
        return sum(self.flops_per_protocol.values())

    def to_json(self) -> dict:
        return {
            'mode': self.mode.value,
            'n_checkpoints': self.n_checkpoints,
            'params_per_model': self.params_per_model,
            'flops_per_protocol': dict(self.flops_per_protocol),
            'total_params': self.total_params,
            'total_flops': self.total_flops,
        }


def plan_cost(model_config: ModelConfig, mode: RunMode, protocols: Iterable[ProtocolSpec]) -> PlanCost:
    mode = RunMode.parse(mode)
    protocols: List[ProtocolSpec] = list(protocols)
    model = build_model(model_config, seed=0)
    params = count_params(model).params
    if mode is RunMode.UNIFIED:
        full = count_flops(model).flops
        return PlanCost(mode, 1, params, {p.id.value: full for p in protocols})
    flops = {p.id.value: count_flops(model, active=p.eval_modalities).flops for p in protocols}
    return PlanCost(mode, len(protocols), params, flops)
