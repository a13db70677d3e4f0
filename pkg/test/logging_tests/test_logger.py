"""
Tests for the verbose-gated flexfas logger
"""
import logging

import pytest

from src.flexfas._logger import LOGGER, format_fields, set_logging_level, set_verbose
from src.flexfas.protocols.manifest import parse_manifest

MANIFEST = ('sample_id,split,dataset_id,label,pai,rgb_path,depth_path,ir_path\n'
            'a,train,d0,bonafide,,a.png,,\n'
            'b,test,d0,attack,print,b.png,b_d.png,b_ir.png\n')


@pytest.fixture
def verbose(caplog):
    caplog.set_level(logging.DEBUG, logger='flexfas')
    set_verbose(True)
    yield caplog
    set_verbose(False)
    set_logging_level(logging.INFO)


def test_format_fields():
    assert format_fields('done', {}) == 'done'
    assert format_fields('epoch 1/2', {'loss': 0.123456789, 'lr': 0.001}) == 'epoch 1/2 loss=0.12346 lr=0.001'
    assert format_fields('x', {'b': 2, 'a': 'P1'}) == 'x a=P1 b=2'


def test_silent_unless_verbose(caplog):
    caplog.set_level(logging.DEBUG, logger='flexfas')
    LOGGER.info('hidden', rows=3)
    LOGGER.warning('hidden too')
    assert not caplog.records


def test_fields_in_message(verbose):
    LOGGER.info('Evaluated P2.', acer=0.25, rule='val_eer')
    LOGGER.debug('resolved')
    assert [r.getMessage() for r in verbose.records] == ['Evaluated P2. acer=0.25 rule=val_eer', 'resolved']
    assert verbose.records[0].levelno == logging.INFO


def test_level_filter(verbose):
    set_logging_level(logging.WARNING)
    LOGGER.info('dropped')
    LOGGER.error('kept', code='PARSE_ERROR')
    assert [r.getMessage() for r in verbose.records] == ['kept code=PARSE_ERROR']


def test_manifest_counts(verbose):
    parse_manifest(MANIFEST, 'two.csv')
    messages = [r.getMessage() for r in verbose.records]
    assert 'Loaded manifest two.csv. rows=2 test=1 train=1 val=0' in messages
    assert any('lack Depth or IR' in m for m in messages)


def test_stderr_handler_attached_once():
    handler = LOGGER.attach_stderr_handler(logging.WARNING)
    try:
        assert LOGGER.attach_stderr_handler() is handler
        assert handler.level == logging.WARNING
        assert sum(1 for h in LOGGER.logger.handlers if h is handler) == 1
    finally:
        LOGGER.logger.removeHandler(handler)
