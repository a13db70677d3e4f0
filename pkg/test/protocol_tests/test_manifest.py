"""
Tests for manifests and the protocol table
"""
import os
from dataclasses import replace
from pathlib import Path

import pytest

from src.flexfas.core.modality import ModalityId, Label, FULL_MODALITY_SET
from src.flexfas.exceptions import ErrorCode, ManifestException, RunPlanException
from src.flexfas.metrics import ThresholdRule
from src.flexfas.protocols.manifest import DatasetManifest, load_manifest, parse_manifest, write_manifest
from src.flexfas.protocols.protocol import PROTOCOLS, ProtocolId, ProtocolSpec, Split, get_protocols

RGB, DEPTH, IR = ModalityId.RGB, ModalityId.DEPTH, ModalityId.IR
HEADER = 'sample_id,split,dataset_id,label,pai,rgb_path,depth_path,ir_path\n'


def _path(path: str) -> str:
    return str(Path(os.path.abspath(__file__)).parent / path)


def _error(name: str) -> ManifestException:
    with pytest.raises(ManifestException) as e:
        load_manifest(_path(name))
    return e.value


@pytest.fixture(scope='module')
def three_rows() -> DatasetManifest:
    return load_manifest(_path('three_rows.csv'))


def test_three_rows(three_rows):
    assert len(three_rows) == 3
    assert [row.sample_id for row in three_rows] == ['a', 'b', 'c']
    assert three_rows.split_counts() == {Split.TRAIN: 1, Split.VAL: 1, Split.TEST: 1}
    assert three_rows.dataset_ids == {'casia'}

    a, b, c = three_rows.rows
    assert a.label is Label.BONAFIDE and a.pai is None
    assert b.label is Label.ATTACK and b.pai == 'print'
    assert b.absent_modalities == {DEPTH}
    assert c.absent_modalities == {IR}
    assert a.line == 2 and c.line == 4


def test_relative_paths_follow_the_manifest(three_rows):
    base = Path(_path('.'))
    a, _, c = three_rows.rows
    assert a.paths[RGB] == base / 'img' / 'a_rgb.png'
    assert c.paths[RGB] == Path('/data/c_rgb.png')


def test_duplicate_id():
    error = _error('duplicate_id.csv')
    assert error.code is ErrorCode.DUPLICATE_ID
    assert error.line == 4
    assert 'line 2' in str(error)


def test_missing_rgb_path():
    error = _error('missing_rgb.csv')
    assert error.code is ErrorCode.MISSING_RGB_PATH
    assert error.line == 3


def test_short_row():
    error = _error('short_row.csv')
    assert error.code is ErrorCode.PARSE_ERROR
    assert error.line == 4
    assert 'short_row.csv:4' in str(error)


def test_bad_label():
    error = _error('bad_label.csv')
    assert error.code is ErrorCode.PARSE_ERROR
    assert error.line == 2


def test_leading_empty_cell():
    with pytest.raises(ManifestException) as e:
        parse_manifest(HEADER + 'a,train,x,bonafide,,a.png,,\n,train,x,attack,,b.png,,\n')
    assert e.value.code is ErrorCode.PARSE_ERROR
    assert e.value.line == 3


@pytest.mark.parametrize('text', ['', '\n', '   \n\n', ' , \n'])
def test_empty_manifest(text):
    with pytest.raises(ManifestException) as e:
        parse_manifest(text, 'empty.csv')
    assert e.value.code is ErrorCode.PARSE_ERROR
    assert e.value.line == 1
    assert 'empty.csv:1' in str(e.value)


def test_bad_header():
    with pytest.raises(ManifestException) as e:
        parse_manifest('id,split,label\na,train,bonafide\n')
    assert e.value.code is ErrorCode.PARSE_ERROR


def test_missing_file():
    with pytest.raises(ManifestException) as e:
        load_manifest(_path('no_such_manifest.csv'))
    assert e.value.code is ErrorCode.FILE_NOT_FOUND


def test_subject_column_and_aliases():
    manifest = load_manifest(_path('with_subject.csv'))
    a, b = manifest.rows
    assert a.split is Split.VAL
    assert (a.subject_id, b.subject_id) == ('s01', 's02')
    assert b.absent_modalities == frozenset()


def test_crlf_and_blank_lines():
    text = HEADER.replace('\n', '\r\n') + '\r\n\r\na,test,x,attack,replay,a.png,,\r\n  \r\n'
    manifest = parse_manifest(text, base_dir='/root')
    assert len(manifest) == 1
    assert manifest.rows[0].paths[RGB] == Path('/root/a.png')


def test_write_then_load(tmp_path, three_rows):
    rows = tuple(replace(row, paths={m: tmp_path / 'img' / p.name for m, p in row.paths.items()})
                 for row in three_rows)
    path = tmp_path / 'manifest.csv'
    write_manifest(DatasetManifest(rows), path)
    assert 'img/a_rgb.png' in path.read_text()
    reloaded = load_manifest(path)
    assert [dict(row.paths) for row in reloaded] == [dict(row.paths) for row in rows]
    assert [(row.sample_id, row.split, row.label, row.pai) for row in reloaded] == \
        [(row.sample_id, row.split, row.label, row.pai) for row in rows]


def test_protocol_table():
    assert PROTOCOLS[ProtocolId.P1].eval_modalities == {RGB}
    assert PROTOCOLS[ProtocolId.P2].eval_modalities == {RGB, DEPTH}
    assert PROTOCOLS[ProtocolId.P3].eval_modalities == {RGB, IR}
    assert PROTOCOLS[ProtocolId.P4].eval_modalities == FULL_MODALITY_SET
    for spec in PROTOCOLS.values():
        assert spec.train_modalities == FULL_MODALITY_SET
        assert spec.threshold_rule is ThresholdRule.EER_ON_VALIDATION
    assert PROTOCOLS[ProtocolId.P3].name == 'P3 (RGB+IR)'


def test_get_protocols():
    assert [p.id for p in get_protocols(['p4', 'P1'])] == [ProtocolId.P4, ProtocolId.P1]
    fixed = get_protocols(rule=ThresholdRule.FIXED_0_5)
    assert len(fixed) == 4 and all(p.threshold_rule is ThresholdRule.FIXED_0_5 for p in fixed)
    with pytest.raises(RunPlanException):
        get_protocols(['P1', 'p1'])


def test_protocol_checks():
    with pytest.raises(RunPlanException):
        ProtocolSpec(ProtocolId.P1, frozenset({RGB}), train_modalities=frozenset({RGB}))
    with pytest.raises(RunPlanException) as e:
        ProtocolSpec(ProtocolId.P2, frozenset({DEPTH}))
    assert e.value.code is ErrorCode.MISSING_RGB
