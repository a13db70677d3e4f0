import logging
import sys

STDERR_FORMAT = '%(asctime)s %(levelname)s %(name)s: %(message)s'


def format_fields(msg: str, fields: dict) -> str:
    """`msg key=value ...`, keys sorted; floats in short general form."""
    if not fields:
        return msg
    rendered = ' '.join(f'{k}={v:.5g}' if isinstance(v, float) else f'{k}={v}'
                        for k, v in sorted(fields.items()))
    return f'{msg} {rendered}'


class FlexFasLogger:
    """Silent unless verbose; every record may carry `key=value` fields after its message."""

    def __init__(self):
        self.logger = logging.getLogger('flexfas')
        self.verbose = False

    def _log(self, level: int, msg: str, fields: dict):
        if self.verbose and self.logger.isEnabledFor(level):
            self.logger.log(level, format_fields(msg, fields))

    def debug(self, msg: str, **fields):
        self._log(logging.DEBUG, msg, fields)

    def info(self, msg: str, **fields):
        self._log(logging.INFO, msg, fields)

    def warning(self, msg: str, **fields):
        self._log(logging.WARNING, msg, fields)

    def error(self, msg: str, **fields):
        self._log(logging.ERROR, msg, fields)

    def set_verbose(self, verbose: bool):
        self.verbose = verbose

    def set_logger(self, logger: logging.Logger):
        self.logger = logger

    def set_logging_level(self, level: int | str):
        self.logger.setLevel(level)

    def attach_stderr_handler(self, level: int | str | None = None) -> logging.Handler:
        """Idempotent: a second call returns the handler attached by the first."""
        for h in self.logger.handlers:
            if getattr(h, '_flexfas_stderr', False):
                return h
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter(STDERR_FORMAT))
        if level is not None:
            handler.setLevel(level)
        handler._flexfas_stderr = True
        self.logger.addHandler(handler)
        return handler


LOGGER = FlexFasLogger()
LOGGER.set_logging_level(logging.INFO)


def set_verbose(verbose: bool):
    LOGGER.set_verbose(verbose)


def set_logger(logger: logging.Logger):
    LOGGER.set_logger(logger)


def set_logging_level(level: int | str):
    LOGGER.set_logging_level(level)
