from enum import Enum


class ErrorCode(Enum):
    SHAPE_MISMATCH = 'SHAPE_MISMATCH'
    VALUE_RANGE = 'VALUE_RANGE'
    MISSING_RGB = 'MISSING_RGB'
    EMPTY_BATCH = 'EMPTY_BATCH'
    ONE_CLASS_ONLY = 'ONE_CLASS_ONLY'
    NONFINITE_LOSS = 'NONFINITE_LOSS'
    PARSE_ERROR = 'PARSE_ERROR'
    DUPLICATE_ID = 'DUPLICATE_ID'
    MISSING_RGB_PATH = 'MISSING_RGB_PATH'
    SHAPE_INVALID = 'SHAPE_INVALID'
    CHECKPOINT_INCOMPATIBLE = 'CHECKPOINT_INCOMPATIBLE'
    CONFIG_INVALID = 'CONFIG_INVALID'
    FILE_NOT_FOUND = 'FILE_NOT_FOUND'
    INVALID_ARGUMENT = 'INVALID_ARGUMENT'


class FlexFasException(Exception):
    def __init__(self, code: ErrorCode, message: str):
        super().__init__(f'[{code.value}] {message}')
        self.code = code


class InvalidSampleException(FlexFasException):
    def __init__(self, code: ErrorCode, sample_id: str, message: str):
        super().__init__(code, f'Sample "{sample_id}": {message}.')
        self.sample_id = sample_id


class FusionInputException(FlexFasException):
    def __init__(self, message: str, code: ErrorCode = ErrorCode.SHAPE_MISMATCH):
        super().__init__(code, message)


class ManifestException(FlexFasException):
    def __init__(self, code: ErrorCode, message: str, src_path: str, line: int | None = None):
        location = f'{src_path}:{line}' if line is not None else src_path
        super().__init__(code, f'Error when loading {location}: {message}.')
        self.line = line


class MetricsException(FlexFasException):
    def __init__(self, code: ErrorCode, message: str):
        super().__init__(code, message)


class TrainingException(FlexFasException):
    def __init__(self, code: ErrorCode, message: str, epoch: int | None = None, batch: int | None = None):
        if epoch is not None:
            message = f'{message} (epoch {epoch}, batch {batch})'
        super().__init__(code, message)
        self.epoch = epoch
        self.batch = batch


class ConfigException(FlexFasException):
    def __init__(self, key: str, message: str, suggestion: str | None = None):
        hint = f' Did you mean: "{suggestion}"?' if suggestion else ''
        super().__init__(ErrorCode.CONFIG_INVALID, f'Invalid config key "{key}": {message}.{hint}')
        self.key = key


class CheckpointException(FlexFasException):
    def __init__(self, message: str, src_path: str, code: ErrorCode = ErrorCode.CHECKPOINT_INCOMPATIBLE):
        super().__init__(code, f'Checkpoint {src_path}: {message}.')
        self.src_path = src_path


class CostException(FlexFasException):
    def __init__(self, message: str):
        super().__init__(ErrorCode.SHAPE_INVALID, message)


class RunPlanException(FlexFasException):
    def __init__(self, message: str, code: ErrorCode = ErrorCode.CONFIG_INVALID):
        super().__init__(code, message)
