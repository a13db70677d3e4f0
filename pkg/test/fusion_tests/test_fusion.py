"""
Tests for concatenation, squeeze-and-excitation and cross-attention fusion
"""
import math

import pytest
import torch

from src.flexfas.core.features import FeatureBundle
from src.flexfas.core.modality import ModalityId, ALL_MODALITIES
from src.flexfas.exceptions import ErrorCode, FusionInputException
from src.flexfas.models.fusion import (FusionConfig, FusionKind, CrossAttentionMap, build_fusion, fuse,
                                       fuse_concat, fuse_se, fusion_backward)

RGB, DEPTH, IR = ALL_MODALITIES


def _identity_bn(fusion):
    """BatchNorm in eval mode with unit statistics and eps 0 passes values through unchanged."""
    bn = fusion.aggregate.bn
    bn.eps = 0.0
    bn.reset_running_stats()
    fusion.eval()
    return fusion


def _bundle(values, shape=(1, 1, 1, 1), dtype=torch.float32) -> FeatureBundle:
    return FeatureBundle({m: torch.full(shape, float(v), dtype=dtype) for m, v in zip(ALL_MODALITIES, values)})


def _random_bundle(shape, seed=0, dtype=torch.float32) -> FeatureBundle:
    gen = torch.Generator().manual_seed(seed)
    return FeatureBundle({m: torch.randn(shape, generator=gen, dtype=dtype) for m in ALL_MODALITIES})


def test_parse_kind():
    assert FusionKind.parse('CA') is FusionKind.CROSS_ATTENTION
    assert FusionKind.parse(' SE ') is FusionKind.SE


def test_concat_by_hand():
    fusion = _identity_bn(build_fusion(FusionConfig(FusionKind.CONCAT, 1)))
    with torch.no_grad():
        fusion.aggregate.conv.weight.copy_(torch.ones(1, 3, 1, 1))
        fusion.aggregate.conv.bias.zero_()
        out = fuse_concat(_bundle([2.0, 1.0, -1.0]), fusion)
    assert out.shape == (1, 1, 1, 1)
    assert out.item() == pytest.approx(2.0)


def test_output_shape():
    for kind in FusionKind:
        fusion = build_fusion(FusionConfig(kind, 8, 5, se_reduction=4)).eval()
        out = fuse(_random_bundle((2, 8, 3, 4)), fusion)
        assert out.shape == (2, 5, 3, 4)
        assert (out >= 0).all()


def test_se_zero_gate():
    fusion = build_fusion(FusionConfig(FusionKind.SE, 4, se_reduction=2)).eval()
    with torch.no_grad():
        for gate in fusion.gates.values():
            gate.fc2.weight.zero_()
            gate.fc2.bias.zero_()
    bundle = _random_bundle((3, 4, 2, 2))
    for gate in fusion.gate_values(bundle).values():
        assert torch.allclose(gate, torch.full_like(gate, 0.5))
    refined = fusion.recalibrated(bundle)
    for m in ALL_MODALITIES:
        assert torch.allclose(refined[m], 0.5 * bundle[m])


def test_se_by_hand():
    fusion = build_fusion(FusionConfig(FusionKind.SE, 1)).eval()
    with torch.no_grad():
        for gate in fusion.gates.values():
            gate.fc1.weight.fill_(1.0)
            gate.fc1.bias.zero_()
            gate.fc2.weight.fill_(2.0)
            gate.fc2.bias.zero_()
    refined = fusion.recalibrated(_bundle([1.0, 1.0, 1.0], (1, 1, 2, 2)))
    expected = 1.0 / (1.0 + math.exp(-2.0))
    assert expected == pytest.approx(0.8808, abs=1e-4)
    for m in ALL_MODALITIES:
        assert torch.allclose(refined[m], torch.full((1, 1, 2, 2), expected))


def test_se_two_channels_by_hand():
    fusion = build_fusion(FusionConfig(FusionKind.SE, 2, se_reduction=2)).eval()
    gate = fusion.gates[DEPTH.value]
    with torch.no_grad():
        gate.fc1.weight.copy_(torch.tensor([[0.5, 0.5]]))
        gate.fc1.bias.zero_()
        gate.fc2.weight.copy_(torch.tensor([[1.0], [1.0]]))
        gate.fc2.bias.zero_()
    depth = torch.tensor([3.0, 1.0]).reshape(1, 2, 1, 1)
    bundle = FeatureBundle({RGB: torch.zeros(1, 2, 1, 1), DEPTH: depth, IR: torch.zeros(1, 2, 1, 1)})
    refined = fusion.recalibrated(bundle)[DEPTH].flatten().tolist()
    assert refined == pytest.approx([2.6424, 0.8808], abs=1e-4)


def test_se_hidden_width():
    assert FusionConfig(FusionKind.SE, 32, se_reduction=8).se_hidden == 4
    assert FusionConfig(FusionKind.SE, 4, se_reduction=8).se_hidden == 1
    with pytest.raises(FusionInputException):
        FusionConfig(FusionKind.SE, 4, se_reduction=0)


def test_cross_attention_single_token():
    fusion = build_fusion(FusionConfig(FusionKind.CROSS_ATTENTION, 3)).eval()
    bundle = _random_bundle((2, 3, 1, 1))
    for attention in fusion.attention_maps(bundle).values():
        assert torch.allclose(attention, torch.ones(2, 1, 1))
    assert torch.allclose(fusion.pre_aggregate(bundle), 3 * bundle[RGB])


def test_cross_attention_rows_sum_to_one():
    fusion = build_fusion(FusionConfig(FusionKind.CROSS_ATTENTION, 6)).eval()
    for attention in fusion.attention_maps(_random_bundle((2, 6, 3, 5), seed=3)).values():
        assert attention.shape == (2, 15, 15)
        assert (attention >= 0).all()
        assert torch.allclose(attention.sum(-1), torch.ones(2, 15))


def test_cross_attention_by_hand():
    query = torch.tensor([1.0, 0.0]).reshape(1, 1, 1, 2)
    rgb = torch.tensor([1.0, -1.0]).reshape(1, 1, 1, 2)
    attended, attention = CrossAttentionMap()(query, rgb)
    assert attention[0, 0].tolist() == pytest.approx([0.8808, 0.1192], abs=1e-4)
    assert attention[0, 1].tolist() == pytest.approx([0.5, 0.5])
    assert attended.flatten().tolist() == pytest.approx([math.tanh(1.0), 0.0], abs=1e-6)


def test_cross_attention_constant_query():
    query = torch.tensor([2.0, 2.0]).reshape(1, 1, 1, 2)
    rgb = torch.tensor([1.0, 0.0]).reshape(1, 1, 1, 2)
    attended, attention = CrossAttentionMap()(query, rgb)
    high = math.exp(2.0) / (math.exp(2.0) + 1.0)
    for row in attention[0].tolist():
        assert row == pytest.approx([high, 1.0 - high])
    assert attended.flatten().tolist() == pytest.approx([0.8808, 0.8808], abs=1e-4)


@pytest.mark.parametrize('kind', list(FusionKind))
def test_token_permutation_equivariance(kind):
    fusion = build_fusion(FusionConfig(kind, 4, se_reduction=2)).eval()
    b, c, h, w = 2, 4, 2, 3
    bundle = _random_bundle((b, c, h, w), seed=5)
    perm = torch.randperm(h * w, generator=torch.Generator().manual_seed(1))

    def permute(x):
        return x.flatten(2)[:, :, perm].reshape(x.shape)

    with torch.no_grad():
        out = fusion(bundle)
        permuted = fusion(bundle.map(permute))
    assert torch.allclose(permuted, permute(out), atol=1e-6)


@pytest.mark.parametrize('kind', list(FusionKind))
def test_gradcheck(kind):
    for seed in range(20):
        torch.manual_seed(seed)
        fusion = build_fusion(FusionConfig(kind, 3, 2, se_reduction=1)).double().eval()
        bundle = _random_bundle((2, 3, 2, 2), seed=seed, dtype=torch.float64)
        inputs = tuple(bundle[m].clone().requires_grad_(True) for m in ALL_MODALITIES)
        names = [name for name, _ in fusion.named_parameters()]
        params = tuple(p.detach().clone().requires_grad_(True) for p in fusion.parameters())

        def run(rgb, depth, ir, *weights):
            return torch.func.functional_call(fusion, dict(zip(names, weights)),
                                              (FeatureBundle({RGB: rgb, DEPTH: depth, IR: ir}),))

        assert torch.autograd.gradcheck(run, inputs + params, eps=1e-6, atol=1e-5)


def test_fusion_backward_by_hand():
    fusion = _identity_bn(build_fusion(FusionConfig(FusionKind.CONCAT, 1)))
    with torch.no_grad():
        fusion.aggregate.conv.weight.copy_(torch.ones(1, 3, 1, 1))
        fusion.aggregate.conv.bias.zero_()
    grads = fusion_backward(fusion, _bundle([1.0, 1.0, 0.0]), torch.ones(1, 1, 1, 1))
    for m in ALL_MODALITIES:
        assert grads.inputs[m].item() == pytest.approx(1.0)
    assert grads.parameters['aggregate.conv.weight'].flatten().tolist() == pytest.approx([1.0, 1.0, 0.0])
    assert grads.parameters['aggregate.conv.bias'].item() == pytest.approx(1.0)


def test_fusion_backward_matches_autograd():
    fusion = build_fusion(FusionConfig(FusionKind.CROSS_ATTENTION, 3)).double().eval()
    bundle = _random_bundle((2, 3, 2, 2), seed=2, dtype=torch.float64)
    upstream = torch.randn(2, 3, 2, 2, generator=torch.Generator().manual_seed(4), dtype=torch.float64)
    grads = fusion_backward(fusion, bundle, upstream)

    depth = bundle[DEPTH].clone().requires_grad_(True)
    out = fusion(FeatureBundle({RGB: bundle[RGB], DEPTH: depth, IR: bundle[IR]}))
    (out * upstream).sum().backward()
    assert torch.allclose(grads.inputs[DEPTH], depth.grad)


def test_fusion_backward_conv_weights_match_finite_differences():
    fusion = build_fusion(FusionConfig(FusionKind.CONCAT, 2)).double().eval()
    bundle = _random_bundle((1, 2, 2, 2), seed=6, dtype=torch.float64)
    upstream = torch.randn(1, 2, 2, 2, generator=torch.Generator().manual_seed(8), dtype=torch.float64)
    analytic = fusion_backward(fusion, bundle, upstream).parameters['aggregate.conv.weight']

    weight = fusion.aggregate.conv.weight
    step = 1e-5
    with torch.no_grad():
        for idx in range(weight.numel()):
            flat = weight.view(-1)
            original = flat[idx].item()
            flat[idx] = original + step
            plus = (fusion(bundle) * upstream).sum().item()
            flat[idx] = original - step
            minus = (fusion(bundle) * upstream).sum().item()
            flat[idx] = original
            numeric = (plus - minus) / (2 * step)
            assert analytic.view(-1)[idx].item() == pytest.approx(numeric, rel=1e-4, abs=1e-8)


def test_fusion_backward_zero_chain():
    fusion = build_fusion(FusionConfig(FusionKind.CONCAT, 1)).eval()
    with torch.no_grad():
        fusion.aggregate.conv.weight.copy_(torch.tensor([1.0, 0.0, 1.0]).reshape(1, 3, 1, 1))
        fusion.aggregate.conv.bias.fill_(1.0)
    grads = fusion_backward(fusion, _bundle([1.0, 0.0, 0.0]), torch.ones(1, 1, 1, 1))
    assert grads.inputs[DEPTH].item() == 0.0
    assert grads.inputs[RGB].item() != 0.0


@pytest.mark.parametrize('kind', list(FusionKind))
def test_fusion_backward_keeps_running_stats(kind):
    fusion = build_fusion(FusionConfig(kind, 2, se_reduction=1)).train()
    bn = fusion.aggregate.bn
    mean, var, tracked = bn.running_mean.clone(), bn.running_var.clone(), bn.num_batches_tracked.clone()
    bundle = _random_bundle((2, 2, 2, 2), seed=3)
    grads = fusion_backward(fusion, bundle, torch.ones(2, 2, 2, 2))

    assert fusion.training
    assert torch.equal(bn.running_mean, mean) and torch.equal(bn.running_var, var)
    assert torch.equal(bn.num_batches_tracked, tracked)
    fusion.eval()
    expected = fusion_backward(fusion, bundle, torch.ones(2, 2, 2, 2))
    for m in ALL_MODALITIES:
        assert torch.allclose(grads.inputs[m], expected.inputs[m])


def test_fusion_backward_upstream_shape():
    fusion = build_fusion(FusionConfig(FusionKind.SE, 2)).eval()
    with pytest.raises(FusionInputException):
        fusion_backward(fusion, _random_bundle((1, 2, 2, 2)), torch.ones(1, 2, 3, 3))


def test_input_errors():
    fusion = build_fusion(FusionConfig(FusionKind.CONCAT, 4))
    with pytest.raises(FusionInputException) as e:
        fusion(_random_bundle((1, 3, 2, 2)))
    assert e.value.code is ErrorCode.SHAPE_MISMATCH

    uneven = dict(_random_bundle((1, 4, 2, 2)).features)
    uneven[IR] = torch.zeros(1, 4, 1, 2)
    with pytest.raises(FusionInputException):
        fusion(FeatureBundle(uneven))

    with pytest.raises(FusionInputException) as e:
        fuse_se(_random_bundle((1, 4, 2, 2)), fusion)
    assert e.value.code is ErrorCode.INVALID_ARGUMENT
