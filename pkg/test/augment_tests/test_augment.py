"""
Tests for DropModal and protocol masking
"""
import numpy as np
import pytest

from src.flexfas.augment import DropModal, DropModalConfig, draw_active, drop_modal, make_rng, mask_modalities
from src.flexfas.core.modality import ModalityId, Label, ALL_MODALITIES, FULL_MODALITY_SET
from src.flexfas.core.sample import ModalitySample
from src.flexfas.exceptions import ConfigException, ErrorCode, InvalidSampleException

RGB, DEPTH, IR = ALL_MODALITIES


@pytest.fixture(scope='module')
def sample() -> ModalitySample:
    rng = np.random.default_rng(0)
    return ModalitySample('s', {RGB: rng.uniform(0.1, 1.0, (3, 4, 4)),
                                DEPTH: rng.uniform(0.1, 1.0, (1, 4, 4)),
                                IR: rng.uniform(0.1, 1.0, (1, 4, 4))}, Label.ATTACK, 'print')


def _zeroed(sample: ModalitySample):
    return {m for m, a in sample.images.items() if not a.any()}


def test_never_drop():
    rng = make_rng(1)
    cfg = DropModalConfig(0.0, 0.0)
    assert all(draw_active(cfg, rng) == FULL_MODALITY_SET for _ in range(200))


def test_always_drop(sample):
    aug = DropModal(DropModalConfig(1.0, 1.0, seed=3))
    for _ in range(50):
        dropped = aug(sample)
        assert _zeroed(dropped) == {DEPTH, IR}
        assert np.array_equal(dropped.images[RGB], sample.images[RGB])


def test_drop_rates_within_binomial_bounds():
    n, p = 10000, 0.3
    rng = make_rng(42)
    cfg = DropModalConfig(p, p)
    draws = [draw_active(cfg, rng) for _ in range(n)]
    bound = 2.576 * np.sqrt(n * p * (1 - p))
    for m in (DEPTH, IR):
        dropped = sum(m not in active for active in draws)
        assert abs(dropped - n * p) < bound
    assert all(RGB in active for active in draws)

    both = sum(active == {RGB} for active in draws)
    assert abs(both - n * p * p) < 2.576 * np.sqrt(n * p * p * (1 - p * p))


def test_same_seed_same_pattern():
    cfg = DropModalConfig(0.5, 0.5, seed=7)
    first, second = DropModal(cfg), DropModal(cfg)
    assert [first.draw() for _ in range(100)] == [second.draw() for _ in range(100)]
    fresh, other_worker = DropModal(cfg), DropModal(cfg, worker=1)
    assert [fresh.draw() for _ in range(100)] != [other_worker.draw() for _ in range(100)]


def test_absent_stays_absent():
    rgb_only = ModalitySample('r', {RGB: np.full((3, 2, 2), 0.5)}, Label.BONAFIDE)
    dropped = drop_modal(rgb_only, DropModalConfig(1.0, 1.0), make_rng(0))
    assert set(dropped.images) == {RGB}


@pytest.mark.parametrize('p_depth, p_ir', [(-0.1, 0.3), (0.3, 1.5)])
def test_invalid_probability(p_depth, p_ir):
    with pytest.raises(ConfigException) as e:
        DropModalConfig(p_depth, p_ir)
    assert e.value.code is ErrorCode.CONFIG_INVALID


def test_mask(sample):
    masked = mask_modalities(sample, [RGB, DEPTH])
    assert _zeroed(masked) == {IR}
    assert masked.images[IR].shape == sample.images[IR].shape
    assert np.array_equal(masked.images[DEPTH], sample.images[DEPTH])
    assert masked.label is sample.label and masked.pai == 'print'
    assert not _zeroed(mask_modalities(sample, ALL_MODALITIES))


def test_mask_idempotent_and_composes(sample):
    subsets = [{RGB}, {RGB, DEPTH}, {RGB, IR}, set(ALL_MODALITIES)]
    for a in subsets:
        once = mask_modalities(sample, a)
        assert _zeroed(mask_modalities(once, a)) == _zeroed(once)
        for b in subsets:
            composed = mask_modalities(once, b)
            direct = mask_modalities(sample, a & b)
            for m in ALL_MODALITIES:
                assert np.array_equal(composed.images[m], direct.images[m])


def test_mask_needs_rgb(sample):
    with pytest.raises(InvalidSampleException) as e:
        mask_modalities(sample, [DEPTH, IR])
    assert e.value.code is ErrorCode.MISSING_RGB
