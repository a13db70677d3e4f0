from .config import TrainConfig, OptimizerKind
from .loop import TrainResult, train, make_optimizer, halving_schedule
from .checkpoint import Checkpoint, save_checkpoint, load_checkpoint, CHECKPOINT_FORMAT, CHECKPOINT_VERSION
