"""Run and sweep configuration."""

import importlib
import json
import os
import subprocess
import sys

import pytest

from lutkan.config import RunConfig, SweepCell, SweepConfig
from lutkan.errors import ConfigError, InvalidEnumError
from lutkan.models import BoundaryMode, OobPolicy, Scheme
from lutkan.threads import THREAD_ENV_VARS, pin_threads, resolve_threads, threads_from_argv


class TestRunConfig:
    """Single-run settings."""

    def test_defaults(self):
        config = RunConfig()
        assert (config.L, config.scheme, config.dtype) == (64, 'symmetric', 'int8')
        assert (config.boundary_mode, config.oob_policy) == ('closed', 'clip_x')
        assert (config.batch, config.warmup, config.iters, config.num_samples) == (1024, 50, 200, 4096)

    def test_dtype_follows_scheme(self):
        assert RunConfig(scheme='asymmetric').dtype == 'uint8'

    def test_mismatched_dtype(self):
        with pytest.raises(ConfigError):
            RunConfig(scheme='asymmetric', dtype='int8')

    def test_bad_enum_names_field(self):
        with pytest.raises(InvalidEnumError) as info:
            RunConfig(oob_policy='wrap')
        assert info.value.field == 'oob_policy'

    def test_unknown_key(self):
        with pytest.raises(ConfigError):
            RunConfig.from_dict({'L': 32, 'colour': 'blue'})

    def test_overrides_skip_none(self):
        config = RunConfig(L=32).with_overrides(L=None, boundary_mode='half_open')
        assert config.L == 32 and config.boundary_mode == 'half_open'

    def test_quant_and_oob_views(self):
        config = RunConfig(L=16, scheme='asymmetric', param_dtype='float16', oob_policy='zero_spline')
        assert config.quant_config.scheme == Scheme.ASYMMETRIC
        assert config.quant_config.L == 16
        assert config.oob_config.oob_policy == OobPolicy.ZERO_SPLINE

    def test_file_round_trip(self, tmp_path):
        config = RunConfig(L=128, seed=4, widths=[6, 2], boundary_mode='half_open')
        path = str(tmp_path / 'run.json')
        config.save_to_file(path)
        assert RunConfig.load_from_file(path) == config

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            RunConfig.load_from_file(str(tmp_path / 'missing.json'))

    def test_invalid_json(self, tmp_path):
        path = tmp_path / 'bad.json'
        path.write_text('{not json')
        with pytest.raises(ConfigError):
            RunConfig.load_from_file(str(path))

    @pytest.mark.parametrize('field,value', [('batch', 0), ('iters', 0), ('warmup', -1), ('num_samples', 0)])
    def test_counts_validated(self, field, value):
        with pytest.raises(ConfigError):
            RunConfig(**{field: value})


class TestSweepConfig:
    """Sweep grids."""

    def test_default_grid(self):
        config = SweepConfig()
        cells = config.cells()
        assert len(cells) == 4 * 2 * 2 * 2 * 5
        assert cells[0] == SweepCell(16, 'symmetric', 'half_open', 'clip_x', 0)
        assert cells[-1] == SweepCell(128, 'asymmetric', 'closed', 'zero_spline', 4)
        assert {c.scheme for c in cells} == {s.value for s in Scheme}
        assert {c.boundary_mode for c in cells} == {b.value for b in BoundaryMode}

    def test_cell_paths(self):
        cell = SweepCell(64, 'symmetric', 'closed', 'clip_x', 3)
        assert cell.name == 'L64_symmetric_closed_clip_x'
        assert cell.relpath == os.path.join('L64_symmetric_closed_clip_x', 'seed_3')

    def test_run_config_of_cell(self):
        config = SweepConfig(value_repr='phi', num_samples=512)
        run = config.run_config(SweepCell(32, 'asymmetric', 'half_open', 'zero_spline', 2))
        assert (run.L, run.scheme, run.dtype, run.seed) == (32, 'asymmetric', 'uint8', 2)
        assert (run.value_repr, run.num_samples, run.threads) == ('phi', 512, 1)
        assert run.widths == [10, 8]

    def test_empty_axis(self):
        with pytest.raises(ConfigError):
            SweepConfig(seeds=[])

    def test_bad_values(self):
        with pytest.raises(ConfigError):
            SweepConfig(L_values=[1, 16])
        with pytest.raises(InvalidEnumError):
            SweepConfig(schemes=['logarithmic'])
        with pytest.raises(ConfigError):
            SweepConfig(workers=0)

    def test_file_round_trip(self, tmp_path):
        config = SweepConfig(L_values=[16], seeds=[0, 1], bench=True)
        path = str(tmp_path / 'sweep.json')
        config.save_to_file(path)
        with open(path) as f:
            assert json.load(f)['L_values'] == [16]
        assert SweepConfig.load_from_file(path) == config


class TestThreads:
    """Thread pinning."""

    def test_flag_wins(self, monkeypatch):
        monkeypatch.setenv('LUTKAN_THREADS', '4')
        assert resolve_threads(2) == 2

    def test_environment(self, monkeypatch):
        monkeypatch.setenv('LUTKAN_THREADS', '3')
        assert resolve_threads() == 3

    def test_default_one(self, monkeypatch):
        monkeypatch.delenv('LUTKAN_THREADS', raising=False)
        assert resolve_threads() == 1

    @pytest.mark.parametrize('value', [0, 'many'])
    def test_invalid(self, value):
        with pytest.raises(ConfigError):
            resolve_threads(value)

    def test_pin_sets_variables(self, monkeypatch):
        for name in THREAD_ENV_VARS:
            monkeypatch.delenv(name, raising=False)
        pin_threads(2)
        assert os.environ['OMP_NUM_THREADS'] == '2'
        assert os.environ['MKL_NUM_THREADS'] == '2'

    @pytest.mark.parametrize('argv, expected', [
        (['bench', '--threads', '3'], '3'),
        (['--threads=5', 'eval'], '5'),
        (['bench', '--threads'], None),
        (['eval'], None),
    ])
    def test_threads_from_argv(self, argv, expected):
        assert threads_from_argv(argv) == expected

    def test_entry_point_pins_before_cli(self, monkeypatch):
        for name in THREAD_ENV_VARS:
            monkeypatch.delenv(name, raising=False)
        entry = importlib.import_module('lutkan.__main__')
        entry._pin_early(['--threads', '6', 'bench'])
        assert all(os.environ[name] == '6' for name in THREAD_ENV_VARS)

    def test_entry_point_ignores_bad_value(self, monkeypatch):
        monkeypatch.setenv('OMP_NUM_THREADS', '1')
        importlib.import_module('lutkan.__main__')._pin_early(['--threads', 'many'])
        assert os.environ['OMP_NUM_THREADS'] == '1'

    def test_thread_module_does_not_load_numpy(self):
        root = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))
        code = "import sys, lutkan.threads, lutkan.__main__; sys.exit('numpy' in sys.modules)"
        assert subprocess.run([sys.executable, '-c', code], cwd=root).returncode == 0
