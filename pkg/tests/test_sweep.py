"""Sweep execution, resume and CSV aggregation."""

import json
import os

import pandas as pd
import pytest

from lutkan.artifact_io import load_artifact, load_report, save_report
from lutkan.config import SweepConfig
from lutkan.reports import RunReport
from lutkan.sweep import GROUP_KEYS, SweepRunner, aggregate, collect_results, load_results, run_sweep


@pytest.fixture
def small_sweep():
    return SweepConfig(L_values=[8, 16], schemes=['symmetric'], boundary_modes=['closed'],
                       oob_policies=['clip_x'], seeds=[0, 1], num_samples=128)


def report_paths(root):
    paths = []
    for dirpath, _, filenames in os.walk(root):
        if 'report.json' in filenames:
            paths.append(os.path.join(dirpath, 'report.json'))
    return sorted(paths)


class TestRunSweep:
    """Cell execution."""

    def test_layout(self, tmp_path, small_sweep):
        root = str(tmp_path / 'runs')
        summary = run_sweep(small_sweep, root)
        assert summary == {'total': 4, 'skipped': 0, 'completed': 4, 'failed': 0}
        cell_dir = os.path.join(root, 'L8_symmetric_closed_clip_x', 'seed_1')
        assert sorted(os.listdir(cell_dir)) == ['artifact.lut', 'config.json', 'manifest.json', 'report.json']
        assert os.path.isfile(os.path.join(root, 'sweep_config.json'))
        assert load_artifact(os.path.join(cell_dir, 'artifact.lut')).L == 8
        report = load_report(os.path.join(cell_dir, 'report.json'))
        assert report.ok and report.seed == 1
        assert report.eval.n_samples == 128
        assert report.memory.q_table_bytes == 80 * 8 * 8
        with open(os.path.join(cell_dir, 'config.json')) as f:
            assert json.load(f)['L'] == 8

    def test_resume_skips_finished_cells(self, tmp_path, small_sweep):
        root = str(tmp_path / 'runs')
        run_sweep(small_sweep, root)
        assert run_sweep(small_sweep, root) == {'total': 4, 'skipped': 4, 'completed': 0, 'failed': 0}
        os.remove(report_paths(root)[0])
        assert run_sweep(small_sweep, root)['completed'] == 1

    def test_failed_cells_are_retried(self, tmp_path, small_sweep):
        root = str(tmp_path / 'runs')
        runner = SweepRunner(small_sweep, root)
        runner.run()
        path = report_paths(root)[0]
        failed = RunReport(config={}, seed=0, status='error', error='RuntimeError: boom')
        save_report(failed, path)
        assert len(runner.pending_cells()) == 1
        assert runner.run()['completed'] == 1
        assert load_report(path).ok

    def test_rerun_is_bit_identical(self, tmp_path, small_sweep):
        first, second = str(tmp_path / 'a'), str(tmp_path / 'b')
        run_sweep(small_sweep, first)
        run_sweep(small_sweep, second)
        for a, b in zip(report_paths(first), report_paths(second)):
            assert load_report(a).eval == load_report(b).eval
        with open(os.path.join(first, 'L16_symmetric_closed_clip_x', 'seed_0', 'artifact.lut'), 'rb') as f1, \
                open(os.path.join(second, 'L16_symmetric_closed_clip_x', 'seed_0', 'artifact.lut'), 'rb') as f2:
            assert f1.read() == f2.read()

    def test_unclipped_sweep_sees_oob(self, tmp_path):
        config = SweepConfig(L_values=[8], schemes=['asymmetric'], boundary_modes=['half_open'],
                             oob_policies=['zero_spline'], seeds=[0], num_samples=256, clip_inputs=False)
        root = str(tmp_path / 'oob')
        run_sweep(config, root)
        report = load_report(report_paths(root)[0])
        assert report.eval.has_oob and report.eval.oob_any_frac > 0.5

    @pytest.mark.slow
    def test_bench_cells(self, tmp_path):
        config = SweepConfig(L_values=[16], schemes=['asymmetric'], boundary_modes=['closed'],
                             oob_policies=['clip_x'], seeds=[0], num_samples=64, bench=True,
                             batch=64, warmup=1, iters=3)
        root = str(tmp_path / 'bench')
        run_sweep(config, root)
        report = load_report(report_paths(root)[0])
        assert report.bench is not None and report.bench.batch == 64


def fake_rows(values, metric='mae_inrange', **keys):
    base = {'L': 64, 'scheme': 'symmetric', 'dtype': 'int8', 'boundary_mode': 'closed',
            'oob_policy': 'clip_x', 'backend': 'optimized', 'status': 'ok'}
    base.update(keys)
    return [{**base, 'seed': seed, metric: value} for seed, value in enumerate(values)]


class TestAggregate:
    """Per-configuration statistics."""

    def test_identical_reports_have_zero_std(self):
        table = aggregate(pd.DataFrame(fake_rows([0.5] * 5)), ['mae_inrange'])
        assert len(table) == 1
        row = table.iloc[0]
        assert row['n_seeds'] == 5
        assert row['mae_inrange_std'] == 0.0
        assert row['mae_inrange_mean'] == 0.5

    def test_mean_min_max(self):
        row = aggregate(pd.DataFrame(fake_rows([1.0, 2.0, 3.0])), ['mae_inrange']).iloc[0]
        assert row['mae_inrange_mean'] == 2.0
        assert (row['mae_inrange_min'], row['mae_inrange_max']) == (1.0, 3.0)
        assert row['mae_inrange_std'] == pytest.approx((2.0 / 3.0) ** 0.5)

    def test_groups_by_configuration(self):
        rows = fake_rows([1.0, 1.0]) + fake_rows([4.0, 6.0], L=128)
        table = aggregate(pd.DataFrame(rows), ['mae_inrange'])
        assert list(table['L']) == [64, 128]
        assert list(table['mae_inrange_mean']) == [1.0, 5.0]
        assert list(table.columns[:len(GROUP_KEYS)]) == GROUP_KEYS

    def test_failed_rows_excluded(self):
        rows = fake_rows([1.0, 3.0]) + fake_rows([100.0], status='error')
        row = aggregate(pd.DataFrame(rows), ['mae_inrange']).iloc[0]
        assert row['n_seeds'] == 2 and row['mae_inrange_mean'] == 2.0


class TestCollect:
    """CSV output."""

    def test_tables_written(self, tmp_path, small_sweep):
        root, outdir = str(tmp_path / 'runs'), str(tmp_path / 'tables')
        run_sweep(small_sweep, root)
        tables = collect_results(root, outdir)
        written = set(os.listdir(outdir))
        assert {'summary.csv', 'runs.csv', 'table_accuracy.csv', 'table_speed.csv', 'table_memory.csv',
                'table_oob.csv', 'table_sym_asym.csv'} <= written
        summary = pd.read_csv(os.path.join(outdir, 'summary.csv'))
        assert len(summary) == 2 and list(summary['n_seeds']) == [2, 2]
        assert len(tables['table_accuracy']) == 2

    def test_undefined_metrics_written_as_na(self, tmp_path, small_sweep):
        root, outdir = str(tmp_path / 'runs'), str(tmp_path / 'tables')
        run_sweep(small_sweep, root)
        collect_results(root, outdir)
        with open(os.path.join(outdir, 'runs.csv')) as f:
            assert 'N/A' in f.read()
        runs = load_results(root)
        assert runs['mae_oob'].isna().all()
        assert runs['mae_inrange'].notna().all()

    def test_empty_root(self, tmp_path):
        tables = collect_results(str(tmp_path))
        assert tables['summary'].empty
