"""
Test run documents, checkpoints and report files.
This script will:
1. Load and default-fill run documents
2. Reject malformed documents with the offending key
3. Write and reload checkpoints, and detect damaged ones
4. Write CSV and JSON reports
"""
import csv
import json
import sys
import tempfile
from pathlib import Path

import numpy as np

# Add project root to path
sys.path.append(str(Path(__file__).parent))

from config.settings import CONFIG_VERSION, RunConfig, load_config
from core.errors import CheckpointError, ConfigError
from core.spectral import build_torus, random_smooth
from models.enums import Command, Integrator, ProblemKind
from models.fields import HermitianField, MatrixFormField
from utils.checkpoint import load_checkpoint, save_checkpoint
from utils.presets import build_preset
from utils.report_writer import emit_report, write_csv


def _write(directory: Path, document) -> Path:
    path = directory / 'run.json'
    path.write_text(json.dumps(document) if not isinstance(document, str) else document, encoding='utf-8')
    return path


def _expect_config_error(directory: Path, document, key_part: str):
    try:
        load_config(_write(directory, document))
    except ConfigError as e:
        assert key_part in str(e), str(e)
        return
    raise AssertionError(f"no ConfigError for {document!r}")


def test_defaults_fill_missing_blocks():
    with tempfile.TemporaryDirectory() as tmp:
        config = load_config(_write(Path(tmp), {'version': CONFIG_VERSION, 'command': 'flow',
                                                'geometry': {'grid': 32}}))
    assert config.command == Command.FLOW
    assert config.geometry.grid == [32]
    assert config.geometry.periods == [1.0]
    assert config.bundle.kind == ProblemKind.HIGGS
    assert config.solver.integrator == Integrator.EXPONENTIAL
    assert config.solver.epsilons[0] == 1.0 and len(config.solver.epsilons) == 11
    assert config.name == 'flow'


def test_overrides_apply_before_validation():
    with tempfile.TemporaryDirectory() as tmp:
        path = _write(Path(tmp), {'version': CONFIG_VERSION})
        config = load_config(path, {'command': 'solve-he', 'solver.tol': 1e-6, 'outputs.directory': tmp})
        assert config.solver.tol == 1e-6
        assert config.outputs.directory == tmp
        assert config.command == Command.SOLVE_HE


def test_invalid_documents_name_the_key():
    with tempfile.TemporaryDirectory() as tmp:
        directory = Path(tmp)
        _expect_config_error(directory, {'version': CONFIG_VERSION, 'solver': {'tolerance': 1e-3}},
                             'solver.tolerance')
        _expect_config_error(directory, {'version': 99}, 'version')
        _expect_config_error(directory, {'version': CONFIG_VERSION, 'command': 'bogomolov'}, 'geometry.n')
        _expect_config_error(directory, {'version': CONFIG_VERSION, 'command': 'harmonic'}, 'bundle.kind')
        _expect_config_error(directory, {'version': CONFIG_VERSION, 'geometry': {'grid': 7}}, 'geometry')
        _expect_config_error(directory, {'version': CONFIG_VERSION, 'solver': {'schedule': [0.5, 1.0]}},
                             'solver')
        _expect_config_error(directory, {'version': CONFIG_VERSION, 'bundle': {'preset': 'atiyah', 'rank': 3}},
                             'bundle.rank')
        _expect_config_error(directory, '{"version": 1,\n "command": }', 'line 2')
        _expect_config_error(directory, '[1, 2]', 'JSON object')


def test_unknown_command_refused():
    config = RunConfig({'command': 'teleport'})
    try:
        config.command
        raised = False
    except ConfigError as e:
        raised = e.key == 'command'
    assert raised


def test_atiyah_with_zero_extension_is_split():
    geometry = build_torus(1, 1.0, 8)
    data = build_preset(geometry, ProblemKind.HIGGS, 2, 'atiyah', {'c': 0})
    assert data.structure.a.sup_norm() == 0.0
    try:
        build_preset(geometry, ProblemKind.PROJFLAT, 2, 'atiyah')
        raised = False
    except ConfigError:
        raised = True
    assert raised


def test_checkpoint_round_trip():
    geometry = build_torus(1, 1.0, 8)
    rng = np.random.default_rng(0)
    H = HermitianField(geometry, np.eye(2) + random_smooth(geometry, rng, 1, 0.1, (2, 2), hermitian=True))
    theta = MatrixFormField.single(geometry, ((0,), ()), random_smooth(geometry, rng, 1, 0.1, (2, 2)))
    empty = MatrixFormField.zeros(geometry, 2)
    with tempfile.TemporaryDirectory() as tmp:
        path = save_checkpoint(Path(tmp) / 'state.ckpt', geometry, 2,
                               {'metric': H, 'theta': theta, 'a': empty}, {'epsilon': 0.5})
        checkpoint = load_checkpoint(path, geometry)
    assert checkpoint.rank == 2
    assert checkpoint.meta == {'epsilon': 0.5}
    assert np.array_equal(checkpoint.fields['metric'].values, H.values)
    assert np.array_equal(checkpoint.fields['theta'].coefficient(((0,), ())), theta.coefficient(((0,), ())))
    assert checkpoint.fields['a'].is_zero()


def test_damaged_checkpoints_refused():
    geometry = build_torus(1, 1.0, 8)
    H = HermitianField.identity(geometry, 2)
    with tempfile.TemporaryDirectory() as tmp:
        path = save_checkpoint(Path(tmp) / 'state.ckpt', geometry, 2, {'metric': H})
        raw = path.read_bytes()
        damaged = {
            'version': raw[:4] + (2).to_bytes(2, 'little') + raw[6:],
            'truncated': raw[:-40],
            'checksum': raw[:-33] + bytes([raw[-33] ^ 0xFF]) + raw[-32:],
            'magic': b'XXXX' + raw[4:],
        }
        for label, content in damaged.items():
            target = Path(tmp) / f'{label}.ckpt'
            target.write_bytes(content)
            try:
                load_checkpoint(target, geometry)
                raised = False
            except CheckpointError:
                raised = True
            assert raised, label

        try:
            load_checkpoint(path, build_torus(1, 1.0, 16))
            raised = False
        except CheckpointError:
            raised = True
        assert raised


def test_reports_are_written():
    with tempfile.TemporaryDirectory() as tmp:
        directory = Path(tmp)
        empty = write_csv(directory / 'empty.csv', [], 'epsilon')
        with open(empty, newline='') as f:
            rows = list(csv.reader(f))
        assert len(rows) == 1 and rows[0][0] == 'epsilon'

        written = emit_report(directory, 'flow', {'converged': True, 'residual': np.float64(1e-9)},
                              [{'t': 0.0, 'ymh': 1.5}, {'t': 0.1, 'ymh': 1.25}], 'flow', dat=True)
        assert [p.suffix for p in written] == ['.json', '.csv', '.dat']
        summary = json.loads((directory / 'flow.json').read_text())
        assert summary == {'converged': True, 'residual': 1e-9}
        with open(directory / 'flow.csv', newline='') as f:
            rows = list(csv.DictReader(f))
        assert [float(r['ymh']) for r in rows] == [1.5, 1.25]
        assert rows[0]['psi_sup'] == ''


if __name__ == "__main__":
    tests = [test_defaults_fill_missing_blocks, test_overrides_apply_before_validation,
             test_invalid_documents_name_the_key, test_unknown_command_refused,
             test_atiyah_with_zero_extension_is_split, test_checkpoint_round_trip,
             test_damaged_checkpoints_refused, test_reports_are_written]
    failed = 0
    for test in tests:
        try:
            test()
            print(f"PASSED {test.__name__}")
        except AssertionError as e:
            failed += 1
            print(f"FAILED {test.__name__}: {e}")
    sys.exit(1 if failed else 0)
