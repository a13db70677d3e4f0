from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Sequence, Tuple

from .._logger import LOGGER
from ..core.modality import FULL_MODALITY_SET
from ..core.records import ScoreRecord
from ..core.sample import ModalitySample
from ..exceptions import RunPlanException, ErrorCode
from ..metrics import EvalReport, ThresholdRule, build_report
from ..models.flex_model import FlexModel, ModelConfig, build_model, predict_scores
from ..trainer.config import TrainConfig
from ..trainer.loop import TrainResult, train
from .manifest import DatasetManifest, load_samples
from .protocol import ProtocolId, ProtocolSpec, RunMode, Split

UNIFIED_KEY = 'unified'


@dataclass(frozen=True, eq=False)
class RunPlan:
    mode: RunMode
    protocols: Tuple[ProtocolSpec, ...]
    model_config: ModelConfig
    train_config: TrainConfig
    train_manifest: DatasetManifest
    test_manifest: DatasetManifest | None = None
    eval_batch_size: int = 64

    def __post_init__(self):
        object.__setattr__(self, 'mode', RunMode.parse(self.mode))
        object.__setattr__(self, 'protocols', tuple(self.protocols))
        if not self.protocols:
            raise RunPlanException('A run needs at least one protocol')
        ids = [p.id for p in self.protocols]
        if len(set(ids)) != len(ids):
            raise RunPlanException(f'Duplicate protocols in {[i.value for i in ids]}')
        for p in self.protocols:
            if p.train_modalities != FULL_MODALITY_SET:
                raise RunPlanException(f'{p.id.value} must train on all modalities')

    @property
    def is_cross_dataset(self) -> bool:
        if self.test_manifest is None:
            return False
        return not (self.test_manifest.dataset_ids & self.train_manifest.dataset_ids)

    def effective_protocols(self) -> List[ProtocolSpec]:
        """Cross-dataset testing has no matching validation set, so it falls back to the fixed 0.5 rule."""
        if self.is_cross_dataset:
            return [p.with_rule(ThresholdRule.FIXED_0_5) for p in self.protocols]
        return list(self.protocols)

    def model_keys(self) -> List[str]:
        if self.mode is RunMode.UNIFIED:
            return [UNIFIED_KEY]
        return [p.id.value for p in self.protocols]

    def model_key(self, protocol: ProtocolSpec) -> str:
        return UNIFIED_KEY if self.mode is RunMode.UNIFIED else protocol.id.value


@dataclass
class EvalData:
    val: List[ModalitySample]
    test: List[ModalitySample]


@dataclass
class RunResult:
    reports: Dict[ProtocolId, EvalReport] = field(default_factory=dict)
    scores: Dict[ProtocolId, Tuple[List[ScoreRecord], List[ScoreRecord]]] = field(default_factory=dict)
    models: Dict[str, TrainResult] = field(default_factory=dict)


def load_eval_data(plan: RunPlan) -> EvalData:
    val = load_samples(plan.train_manifest, Split.VAL)
    if plan.test_manifest is None:
        test = load_samples(plan.train_manifest, Split.TEST)
    else:
        test = load_samples(plan.test_manifest, Split.TEST) or load_samples(plan.test_manifest)
    return EvalData(val, test)


def train_phase(plan: RunPlan, train_samples: Sequence[ModalitySample] | None = None) -> Dict[str, TrainResult]:
    """UNIFIED: one model on all modalities. SEPARATE: one model per protocol on its own modality subset."""
    if train_samples is None:
        train_samples = load_samples(plan.train_manifest, Split.TRAIN)
    dtype = plan.train_config.torch_dtype
    results = {}
    if plan.mode is RunMode.UNIFIED:
        LOGGER.info('Training the unified model on RGB+DEPTH+IR.')
        model = build_model(plan.model_config, plan.train_config.seed, dtype)
        results[UNIFIED_KEY] = train(model, train_samples, plan.train_config, FULL_MODALITY_SET)
    else:
        for protocol in plan.protocols:
            LOGGER.info(f'Training the separate model for {protocol.name}.')
            model = build_model(plan.model_config, plan.train_config.seed, dtype)
            results[protocol.id.value] = train(model, train_samples, plan.train_config, protocol.eval_modalities)
    return results


def _records(samples: Sequence[ModalitySample], scores) -> List[ScoreRecord]:
    return [ScoreRecord(s.sample_id, float(score), s.label, s.pai) for s, score in zip(samples, scores)]


def evaluate_protocol(model: FlexModel, protocol: ProtocolSpec, data: EvalData,
                      batch_size: int = 64) -> Tuple[EvalReport, List[ScoreRecord], List[ScoreRecord]]:
    """Modalities outside the protocol's set enter the encoders as zeros, exactly like `mask_modalities`."""
    val = _records(data.val, predict_scores(model, data.val, protocol.eval_modalities, batch_size))
    test = _records(data.test, predict_scores(model, data.test, protocol.eval_modalities, batch_size))
    report = build_report(val, test, protocol.threshold_rule)
    LOGGER.info(f'Evaluated {protocol.name}.', acer=report.acer, eer=report.eer,
                threshold=report.threshold, rule=protocol.threshold_rule.value)
    return report, val, test


def evaluate_phase(plan: RunPlan, models: Mapping[str, FlexModel], data: EvalData | None = None) -> RunResult:
    """`models` is keyed like `RunPlan.model_keys()`."""
    data = data if data is not None else load_eval_data(plan)
    result = RunResult()
    for protocol in plan.effective_protocols():
        key = plan.model_key(protocol)
        if key not in models:
            raise RunPlanException(f'No trained model for "{key}"', ErrorCode.INVALID_ARGUMENT)
        report, val, test = evaluate_protocol(models[key], protocol, data, plan.eval_batch_size)
        result.reports[protocol.id] = report
        result.scores[protocol.id] = (val, test)
    return result


def _run(plan: RunPlan, mode: RunMode) -> RunResult:
    if plan.mode is not mode:
        raise RunPlanException(f'run_{mode.value} needs a {mode.value} plan, got {plan.mode.value}',
                               ErrorCode.INVALID_ARGUMENT)
    trained = train_phase(plan)
    result = evaluate_phase(plan, {key: r.model for key, r in trained.items()})
    result.models = trained
    return result


def run_unified(plan: RunPlan) -> RunResult:
    return _run(plan, RunMode.UNIFIED)


def run_separate(plan: RunPlan) -> RunResult:
    return _run(plan, RunMode.SEPARATE)


def run(plan: RunPlan) -> RunResult:
    return run_unified(plan) if plan.mode is RunMode.UNIFIED else run_separate(plan)
