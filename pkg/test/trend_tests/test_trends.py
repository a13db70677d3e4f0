"""
Multi-seed trend checks on the default synthetic dataset
"""
import statistics

import pytest

from src.flexfas.augment import DropModalConfig
from src.flexfas.models.flex_model import ModelConfig
from src.flexfas.protocols.manifest import load_manifest
from src.flexfas.protocols.protocol import ProtocolId, RunMode, get_protocols
from src.flexfas.protocols.runner import RunPlan, UNIFIED_KEY, run_unified
from src.flexfas.synthgen import SynthConfig, generate, write_dataset
from src.flexfas.trainer.config import TrainConfig

pytestmark = pytest.mark.slow

SEEDS = range(5)


@pytest.fixture(scope='module')
def runs(tmp_path_factory):
    samples, manifest = generate(SynthConfig())
    manifest = load_manifest(write_dataset(samples, manifest, tmp_path_factory.mktemp('default')))
    results = {}
    for with_dropmodal in (False, True):
        for seed in SEEDS:
            plan = RunPlan(
                mode=RunMode.UNIFIED,
                protocols=get_protocols(),
                model_config=ModelConfig(),
                train_config=TrainConfig(seed=seed, dropmodal=DropModalConfig(seed=seed) if with_dropmodal else None),
                train_manifest=manifest,
            )
            results[with_dropmodal, seed] = run_unified(plan)
    return results


def _median_acer(runs, with_dropmodal: bool, protocol: ProtocolId) -> float:
    return statistics.median(runs[with_dropmodal, seed].reports[protocol].acer for seed in SEEDS)


def test_dropmodal_helps_rgb_only(runs):
    assert _median_acer(runs, True, ProtocolId.P1) < _median_acer(runs, False, ProtocolId.P1)


def test_dropmodal_keeps_full_modal(runs):
    assert _median_acer(runs, True, ProtocolId.P4) - _median_acer(runs, False, ProtocolId.P4) < 0.10


def test_loss_goes_down(runs):
    drops = [trace[-1] - trace[0]
             for trace in (runs[False, seed].models[UNIFIED_KEY].loss_trace for seed in SEEDS)]
    assert statistics.median(drops) < 0
