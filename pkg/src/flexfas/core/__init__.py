from .modality import ModalityId, Label, ALL_MODALITIES, FULL_MODALITY_SET, MODALITY_CHANNELS, modality_set
from .sample import ModalitySample, validate_sample
from .features import FeatureBundle
from .records import ScoreRecord, read_score_file, write_score_file
