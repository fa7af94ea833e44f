"""
Sweep orchestration and result aggregation.

Run directory layout (one directory per grid point and seed)::

    <root>/sweep_config.json
    <root>/L64_symmetric_closed_clip_x/seed_0/config.json
                                              artifact.lut
                                              manifest.json
                                              report.json

``report.json`` is written last and atomically, so its presence marks a
finished cell. Failed cells get a report with ``status: "error"`` and are
retried on the next run.
"""

import glob
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict
from typing import Dict, List, Optional

import pandas as pd

from .artifact import widen
from .artifact_io import build_manifest, load_report, save_artifact, save_report
from .bench import run_honest_bench
from .config import SweepCell, SweepConfig
from .errors import LutKanError
from .logging_config import TimingContext, get_logger, get_structured_logger
from .lut_compiler import compile_layer
from .lut_runtime import lut_layer_forward_batch
from .metrics import eval_accuracy, memory_breakdown
from .model_gen import STREAM_EVAL, gen_calibration, gen_inputs, gen_sanity_layer
from .reports import RunReport

logger = get_logger('sweep')
structured_logger = get_structured_logger('sweep')

REPORT_NAME = 'report.json'
GROUP_KEYS = ['L', 'scheme', 'dtype', 'boundary_mode', 'oob_policy', 'backend']
METRIC_COLUMNS = [
    'mae_inrange', 'maxabs_inrange', 'mae_oob', 'maxabs_oob', 'oob_any_frac',
    'mae_boundary', 'maxabs_boundary', 'layer_mae',
    'q_table_bytes', 'scale_bytes', 'y_min_bytes', 'knots_bytes', 'total_bytes',
    'float_model_bytes', 'overhead_ratio', 'q_table_fraction',
    'spline_ms', 'lut_ms', 'lut_ms_per_sample', 'speedup',
]
TABLES = {
    'table_accuracy': ['mae_inrange', 'maxabs_inrange'],
    'table_speed': ['spline_ms', 'lut_ms', 'lut_ms_per_sample', 'speedup'],
    'table_memory': ['q_table_bytes', 'scale_bytes', 'y_min_bytes', 'knots_bytes', 'total_bytes',
                     'overhead_ratio', 'q_table_fraction'],
    'table_oob': ['oob_any_frac', 'mae_inrange', 'maxabs_inrange', 'mae_oob', 'maxabs_oob'],
    'table_sym_asym': ['mae_inrange', 'maxabs_inrange', 'lut_ms'],
}


def _write_json_atomic(payload: Dict, path: str) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, 'w') as f:
        json.dump(payload, f, indent=2)
    os.replace(tmp, path)


def run_cell(sweep_dict: Dict, cell_dict: Dict, cell_dir: str) -> str:
    """Run one grid point for one seed and write its files; returns the report status.

    Takes plain dictionaries so it can run in a worker process.
    """
    sweep = SweepConfig.from_dict(sweep_dict)
    cell = SweepCell(**cell_dict)
    run_config = sweep.run_config(cell)
    os.makedirs(cell_dir, exist_ok=True)
    _write_json_atomic(run_config.to_dict(), os.path.join(cell_dir, 'config.json'))

    try:
        with TimingContext(structured_logger, 'sweep_cell', {'cell': cell.name, 'seed': cell.seed}):
            layer = gen_sanity_layer(cell.seed, sweep.in_dim, sweep.out_dim, sweep.num_segments, sweep.degree)
            artifact = compile_layer(layer, run_config.quant_config, run_config.oob_config)
            save_artifact(artifact, os.path.join(cell_dir, 'artifact.lut'))
            _write_json_atomic(build_manifest(artifact), os.path.join(cell_dir, 'manifest.json'))

            domain = widen(artifact.knots)
            X = gen_calibration(cell.seed, domain, sweep.in_dim, sweep.num_samples, clip=sweep.clip_inputs)
            evaluation = eval_accuracy(layer, artifact, X, seed=cell.seed, config=run_config.to_dict())
            _, stats = lut_layer_forward_batch(artifact, X)
            bench = None
            if sweep.bench:
                X_bench = gen_inputs(cell.seed, sweep.batch, domain, clip=sweep.clip_inputs,
                                     in_dim=sweep.in_dim, stream=STREAM_EVAL)
                bench = run_honest_bench(layer, artifact, X_bench, tier=sweep.tier, warmup=sweep.warmup,
                                         iters=sweep.iters, threads=1, config=run_config.to_dict(), seed=cell.seed)
            report = RunReport(
                config=run_config.to_dict(),
                seed=cell.seed,
                eval=evaluation,
                bench=bench,
                memory=memory_breakdown(artifact, layer),
                layer_stats=[stats],
            )
    except Exception as e:
        logger.error(f"Sweep cell {cell.name} seed {cell.seed} failed: {e}")
        report = RunReport(config=run_config.to_dict(), seed=cell.seed, status='error',
                           error=f"{type(e).__name__}: {e}")

    tmp = os.path.join(cell_dir, f"{REPORT_NAME}.tmp")
    save_report(report, tmp)
    os.replace(tmp, os.path.join(cell_dir, REPORT_NAME))
    structured_logger.log_sweep_cell(cell.name, cell.seed, report.status, error=report.error)
    return report.status


class SweepRunner:
    """Runs every cell of a sweep under one root directory, skipping finished cells."""

    def __init__(self, config: SweepConfig, root: str):
        self.config = config
        self.root = root
        self.logger = get_logger('sweep')
        os.makedirs(root, exist_ok=True)
        self.config.save_to_file(os.path.join(root, 'sweep_config.json'))
        self.logger.info(f"SweepRunner initialized - {len(config.cells())} cells under {root}")

    def cell_dir(self, cell: SweepCell) -> str:
        return os.path.join(self.root, cell.relpath)

    def is_complete(self, cell: SweepCell) -> bool:
        path = os.path.join(self.cell_dir(cell), REPORT_NAME)
        if not os.path.isfile(path):
            return False
        try:
            return load_report(path).ok
        except LutKanError:
            return False

    def pending_cells(self) -> List[SweepCell]:
        return [cell for cell in self.config.cells() if not self.is_complete(cell)]

    def run(self) -> Dict[str, int]:
        """Run pending cells, serially or across ``workers`` processes."""
        cells = self.config.cells()
        pending = self.pending_cells()
        for cell in cells:
            if cell not in pending:
                structured_logger.log_sweep_cell(cell.name, cell.seed, 'ok', skipped=True)

        sweep_dict = self.config.to_dict()
        jobs = [(sweep_dict, asdict(cell), self.cell_dir(cell)) for cell in pending]
        if self.config.workers > 1 and len(jobs) > 1:
            with ProcessPoolExecutor(max_workers=self.config.workers) as pool:
                statuses = list(pool.map(run_cell, *zip(*jobs)))
        else:
            statuses = [run_cell(*job) for job in jobs]

        summary = {
            'total': len(cells),
            'skipped': len(cells) - len(pending),
            'completed': sum(1 for s in statuses if s == 'ok'),
            'failed': sum(1 for s in statuses if s != 'ok'),
        }
        self.logger.info(f"Sweep finished: {summary}")
        return summary


def run_sweep(config: SweepConfig, root: str) -> Dict[str, int]:
    """Run (or resume) a sweep under ``root``."""
    return SweepRunner(config, root).run()


def _report_row(report: RunReport, path: str) -> Dict:
    config = report.config
    row = {
        'L': config.get('L'),
        'scheme': config.get('scheme'),
        'dtype': config.get('dtype'),
        'boundary_mode': config.get('boundary_mode'),
        'oob_policy': config.get('oob_policy'),
        'backend': config.get('tier'),
        'value_repr': config.get('value_repr'),
        'param_dtype': config.get('param_dtype'),
        'seed': report.seed,
        'status': report.status,
        'path': os.path.dirname(path),
    }
    if report.eval:
        e = report.eval
        row.update(mae_inrange=e.mae_inrange, maxabs_inrange=e.maxabs_inrange, mae_oob=e.mae_oob,
                   maxabs_oob=e.maxabs_oob, oob_any_frac=e.oob_any_frac, mae_boundary=e.mae_boundary,
                   maxabs_boundary=e.maxabs_boundary, layer_mae=e.layer_mae)
    if report.memory:
        m = report.memory
        row.update(q_table_bytes=m.q_table_bytes, scale_bytes=m.scale_bytes, y_min_bytes=m.y_min_bytes,
                   knots_bytes=m.knots_bytes, total_bytes=m.total, float_model_bytes=m.float_model_bytes,
                   overhead_ratio=m.overhead_ratio, q_table_fraction=m.q_table_fraction)
    if report.bench:
        b = report.bench
        row.update(spline_ms=b.spline_ms_mean, lut_ms=b.lut_ms_mean, lut_ms_per_sample=b.lut_ms_per_sample,
                   speedup=b.speedup)
    return row


def load_results(root: str) -> pd.DataFrame:
    """One row per report under ``root`` (failed cells included, flagged by status)."""
    rows = []
    for path in sorted(glob.glob(os.path.join(root, '**', REPORT_NAME), recursive=True)):
        try:
            report = load_report(path)
        except LutKanError as e:
            logger.warning(f"Skipping unreadable report {path}: {e}")
            continue
        if isinstance(report, RunReport):
            rows.append(_report_row(report, path))
    df = pd.DataFrame(rows)
    for column in GROUP_KEYS + METRIC_COLUMNS:
        if column not in df.columns:
            df[column] = None
    df[METRIC_COLUMNS] = df[METRIC_COLUMNS].apply(pd.to_numeric, errors="coerce")
    return df


def aggregate(df: pd.DataFrame, metrics: Optional[List[str]] = None) -> pd.DataFrame:
    """Mean, population std, min and max per configuration, plus the seed count."""
    ok = df[df['status'] == 'ok'] if 'status' in df.columns else df
    metrics = [m for m in (metrics or METRIC_COLUMNS) if m in ok.columns and ok[m].notna().any()]
    if ok.empty:
        return pd.DataFrame(columns=GROUP_KEYS + ['n_seeds'])
    grouped = ok.groupby(GROUP_KEYS, dropna=False, sort=True)
    out = grouped.size().rename('n_seeds').to_frame()
    for metric in metrics:
        values = grouped[metric]
        out[f'{metric}_mean'] = values.mean()
        out[f'{metric}_std'] = values.std(ddof=0)
        out[f'{metric}_min'] = values.min()
        out[f'{metric}_max'] = values.max()
    return out.reset_index()


def collect_results(root: str, outdir: Optional[str] = None) -> Dict[str, pd.DataFrame]:
    """Aggregate every report under ``root``; write summary.csv and per-table CSVs to ``outdir``.

    Metrics that are undefined for a configuration (OOB error without OOB
    inputs, speed without a bench run) are written as ``N/A``.
    """
    df = load_results(root)
    tables = {'summary': aggregate(df)}
    for name, metrics in TABLES.items():
        tables[name] = aggregate(df, metrics)
    if outdir:
        os.makedirs(outdir, exist_ok=True)
        for name, table in tables.items():
            table.to_csv(os.path.join(outdir, f'{name}.csv'), index=False, na_rep='N/A', float_format='%.10g')
        df.to_csv(os.path.join(outdir, 'runs.csv'), index=False, na_rep='N/A', float_format='%.10g')
        logger.info(f"Wrote {len(tables) + 1} CSV files for {len(df)} report(s) to {outdir}")
    return tables
