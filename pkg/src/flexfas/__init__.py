from .core import (ModalityId, Label, ModalitySample, FeatureBundle, ScoreRecord, validate_sample,
                   read_score_file, write_score_file)
from .models import (FusionKind, FusionConfig, HeadKind, HeadConfig, BranchConfig, ModelConfig, FlexModel,
                     build_model, encode, predict, loss, register_encoder, encoder_list)
from .augment import DropModalConfig, drop_modal, mask_modalities
from .metrics import EvalReport, ThresholdRule, classify_rates, eer_threshold, tpr_at_fpr, build_report
from .trainer import TrainConfig, train, save_checkpoint, load_checkpoint
from .protocols import ProtocolId, ProtocolSpec, RunMode, PROTOCOLS, get_protocols, load_manifest
from .protocols.runner import RunPlan, RunResult, run, run_unified, run_separate
from .efficiency import CostReport, count_params, count_flops, plan_cost
from .synthgen import SynthConfig, generate, write_dataset
from .config import load_config
from ._logger import set_verbose, set_logger, set_logging_level

from .exceptions import *
