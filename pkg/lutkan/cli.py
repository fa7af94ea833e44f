"""
Command-line interface for lutkan.

Every command prints a JSON summary to stdout. Failures print
``{"error": <type>, "message": <text>}`` to stderr and exit with status 1;
bad flags exit with status 2.
"""

import argparse
import json
import os
import sys
from typing import Dict, List, Optional

import numpy as np

from .artifact import widen
from .artifact_io import load_any, save_artifact, save_model_artifacts, save_report
from .bench import run_honest_bench
from .config import RunConfig, SweepConfig
from .errors import ConfigError, LutKanError
from .logging_config import get_logger, setup_logging
from .lut_compiler import compile_model, stored_knots
from .lut_runtime import lut_model_forward_batch
from .metrics import eval_model_accuracy, model_memory_breakdown
from .model_gen import gen_inputs, gen_model, gen_sanity_layer
from .models import BenchMode, BoundaryMode, Interp, OobPolicy, ParamDtype, QuantDtype, Scheme, Tier, ValueRepr
from .models import load_model, save_model
from .reports import RunReport
from .sweep import collect_results, run_sweep
from .threads import pin_threads, resolve_threads


def _choices(enum_cls) -> List[str]:
    return [member.value for member in enum_cls]


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--config', help='JSON run config file (flags override its values)')
    parser.add_argument('--model', help='Model JSON file (one layer or {"layers": [...]})')
    parser.add_argument('--seed', type=int, help='Seed for generated inputs (default: 0)')


def _add_quant_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--L', type=int, help='Samples per segment (default: 64)')
    parser.add_argument('--scheme', choices=_choices(Scheme), help='Quantization scheme (default: symmetric)')
    parser.add_argument('--dtype', choices=_choices(QuantDtype), help='Table dtype; must match the scheme')
    parser.add_argument('--value-repr', choices=_choices(ValueRepr),
                        help='Store phi or only the spline branch (default: spline_component)')
    parser.add_argument('--interp', choices=_choices(Interp), help='Interpolation (default: linear)')
    parser.add_argument('--param-dtype', choices=_choices(ParamDtype),
                        help='Storage type of scale/y_min (default: float32)')
    parser.add_argument('--boundary-mode', choices=_choices(BoundaryMode), help='Domain convention at t_K (default: closed)')
    parser.add_argument('--oob-policy', choices=_choices(OobPolicy), help='Out-of-domain rule (default: clip_x)')


def _add_input_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--inputs', help='Input batch as a .npy file (default: generated clipped normal)')
    parser.add_argument('--num-samples', type=int, help='Number of generated inputs (default: 4096)')
    parser.add_argument('--no-clip', dest='clip_inputs', action='store_const', const=False,
                        help='Do not clamp generated inputs into the knot domain')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='lutkan', description='KAN spline-to-LUT compiler, runtime and benchmarks')
    parser.add_argument('--log-level', default='INFO', choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'],
                        help='Set logging level')
    parser.add_argument('--log-dir', help='Directory for rotating log files (console only when omitted)')
    parser.add_argument('--threads', type=int, help='Thread count for numeric libraries (default: $LUTKAN_THREADS or 1)')
    subparsers = parser.add_subparsers(dest='command', help='Available commands')

    gen_parser = subparsers.add_parser('gen', help='Generate a seeded synthetic model')
    gen_parser.add_argument('--seed', type=int, default=0, help='Generator seed (default: 0)')
    gen_parser.add_argument('--widths', type=int, nargs='+',
                            help='Layer widths, e.g. 78 32 16 1 (default: one 10x8 sanity layer)')
    gen_parser.add_argument('--num-segments', type=int, default=8, help='Knot segments K (default: 8)')
    gen_parser.add_argument('--degree', type=int, default=3, help='Spline degree p (default: 3)')
    gen_parser.add_argument('--out', required=True, help='Output model JSON path')
    gen_parser.add_argument('--inputs-out', help='Also write clipped-normal evaluation inputs (.npy)')
    gen_parser.add_argument('--num-samples', type=int, default=4096, help='Evaluation input count (default: 4096)')

    compile_parser = subparsers.add_parser('compile', help='Compile a model into LUT artifact(s)')
    _add_config_flags(compile_parser)
    _add_quant_flags(compile_parser)
    compile_parser.add_argument('--out', required=True,
                                help='Artifact path (single layer) or directory (multi-layer chain)')

    eval_parser = subparsers.add_parser('eval', help='Accuracy of artifact(s) against the float model')
    _add_config_flags(eval_parser)
    _add_input_flags(eval_parser)
    eval_parser.add_argument('--artifact', required=True, help='Artifact file or chain directory')
    eval_parser.add_argument('--report', help='Write the RunReport JSON here')

    bench_parser = subparsers.add_parser('bench', help='Honest-baseline timing in one tier')
    _add_config_flags(bench_parser)
    bench_parser.add_argument('--artifact', required=True, help='Artifact file or chain directory')
    bench_parser.add_argument('--tier', choices=_choices(Tier), help='Implementation tier (default: optimized)')
    bench_parser.add_argument('--mode', choices=_choices(BenchMode), help='steady or cold_start (default: steady)')
    bench_parser.add_argument('--batch', type=int, help='Batch size (default: 1024)')
    bench_parser.add_argument('--warmup', type=int, help='Warmup iterations (default: 50)')
    bench_parser.add_argument('--iters', type=int, help='Timed iterations (default: 200)')
    bench_parser.add_argument('--no-clip', dest='clip_inputs', action='store_const', const=False,
                              help='Do not clamp generated inputs into the knot domain')
    bench_parser.add_argument('--report', help='Write the RunReport JSON here')

    sweep_parser = subparsers.add_parser('sweep', help='Run (or resume) a controlled sweep')
    sweep_parser.add_argument('--config', help='JSON sweep config file (default grid when omitted)')
    sweep_parser.add_argument('--root', required=True, help='Run directory root')
    sweep_parser.add_argument('--workers', type=int, help='Worker processes')
    sweep_parser.add_argument('--bench', action='store_const', const=True, help='Also time every cell')

    collect_parser = subparsers.add_parser('collect', help='Aggregate sweep reports into CSV tables')
    collect_parser.add_argument('--root', required=True, help='Run directory root')
    collect_parser.add_argument('--outdir', required=True, help='Output directory for CSV files')
    return parser


RUN_FLAGS = ('model', 'seed', 'L', 'scheme', 'dtype', 'value_repr', 'interp', 'param_dtype',
             'boundary_mode', 'oob_policy', 'num_samples', 'clip_inputs', 'tier', 'mode',
             'batch', 'warmup', 'iters', 'threads')


def _run_config(args) -> RunConfig:
    """Defaults, then the --config file, then every flag that was given."""
    data = RunConfig.load_from_file(args.config).to_dict() if getattr(args, 'config', None) else {}
    flags = {name: getattr(args, name, None) for name in RUN_FLAGS}
    flags = {name: value for name, value in flags.items() if value is not None}
    if 'scheme' in flags and 'dtype' not in flags:
        # dtype follows the scheme given on the command line
        data.pop('dtype', None)
    return RunConfig.from_dict({**data, **flags})


def _require_model(config: RunConfig):
    if not config.model:
        raise ConfigError("A model file is required (--model or 'model' in --config)")
    return load_model(config.model)


def _artifact_config(config: RunConfig, artifacts) -> RunConfig:
    """The run config with the quantization and OOB settings the artifacts were compiled with."""
    first = artifacts[0]
    return RunConfig.from_dict({**config.to_dict(), **first.quant_config.to_dict(), **first.oob_config.to_dict()})


def _inputs(args, config: RunConfig, artifacts, n: int) -> np.ndarray:
    """The --inputs batch, or generated inputs clamped into the first artifact's stored domain."""
    path = getattr(args, 'inputs', None)
    if path:
        if not os.path.isfile(path):
            raise FileNotFoundError(f"Input file not found: {path}")
        return np.load(path)
    return gen_inputs(config.seed, n, widen(artifacts[0].knots), clip=config.clip_inputs,
                      in_dim=artifacts[0].in_dim)


def cmd_gen(args) -> Dict:
    if args.widths:
        layers = gen_model(args.widths, args.seed, args.num_segments, args.degree)
    else:
        layers = [gen_sanity_layer(args.seed, num_segments=args.num_segments, degree=args.degree)]
    save_model(layers, args.out)
    result = {'model': args.out, 'seed': args.seed, 'layers': [[l.in_dim, l.out_dim] for l in layers],
              'num_edges': [l.num_edges for l in layers]}
    if args.inputs_out:
        X = gen_inputs(args.seed, args.num_samples, stored_knots(layers[0].grid), clip=True,
                       in_dim=layers[0].in_dim)
        np.save(args.inputs_out, X)
        result['inputs'] = args.inputs_out
    return result


def cmd_compile(args) -> Dict:
    config = _run_config(args)
    layers = _require_model(config)
    artifacts = compile_model(layers, config.quant_config, config.oob_config)
    if len(artifacts) == 1:
        save_artifact(artifacts[0], args.out)
    else:
        save_model_artifacts(artifacts, args.out)
    return {
        'out': args.out,
        'config': config.to_dict(),
        'num_layers': len(artifacts),
        'q_table_bytes': [int(a.q_table.nbytes) for a in artifacts],
    }


def cmd_eval(args) -> Dict:
    config = _run_config(args)
    layers = _require_model(config)
    artifacts = load_any(args.artifact)
    config = _artifact_config(config, artifacts)
    X = _inputs(args, config, artifacts, config.num_samples)
    reports, chain = eval_model_accuracy(layers, artifacts, X, seed=config.seed, config=config.to_dict())
    _, stats = lut_model_forward_batch(artifacts, X)
    # the report's eval is the first layer, which sees the raw inputs
    run = RunReport(config=config.to_dict(), seed=config.seed, eval=reports[0],
                    memory=model_memory_breakdown(artifacts, layers), layer_stats=stats)
    if args.report:
        save_report(run, args.report)
    return {'eval': [r.to_dict() for r in reports], 'chain': chain, 'report': args.report}


def cmd_bench(args) -> Dict:
    config = _run_config(args)
    layers = _require_model(config)
    artifacts = load_any(args.artifact)
    config = _artifact_config(config, artifacts)
    X = _inputs(args, config, artifacts, config.batch)
    bench = run_honest_bench(layers, artifacts, X, tier=config.tier, mode=config.mode,
                             warmup=config.warmup, iters=config.iters, artifact_path=args.artifact,
                             threads=config.threads, config=config.to_dict(), seed=config.seed)
    run = RunReport(config=config.to_dict(), seed=config.seed, bench=bench, memory=bench.memory)
    if args.report:
        save_report(run, args.report)
    return {'bench': bench.to_dict(), 'report': args.report}


def cmd_sweep(args) -> Dict:
    config = SweepConfig.load_from_file(args.config) if args.config else SweepConfig()
    overrides = {k: v for k, v in (('workers', args.workers), ('bench', args.bench)) if v is not None}
    if overrides:
        config = SweepConfig.from_dict({**config.to_dict(), **overrides})
    summary = run_sweep(config, args.root)
    return {'root': args.root, 'cells': len(config.cells()), **summary}


def cmd_collect(args) -> Dict:
    tables = collect_results(args.root, args.outdir)
    return {'outdir': args.outdir, 'tables': {name: len(table) for name, table in tables.items()}}


COMMANDS = {
    'gen': cmd_gen,
    'compile': cmd_compile,
    'eval': cmd_eval,
    'bench': cmd_bench,
    'sweep': cmd_sweep,
    'collect': cmd_collect,
}


def main(argv: Optional[List[str]] = None) -> int:
    """Main CLI interface."""
    parser = build_parser()
    args = parser.parse_args(argv)

    setup_logging(args.log_level, args.log_dir)
    logger = get_logger('cli')

    if not args.command:
        parser.print_help()
        return 0

    logger.info(f"Starting lutkan CLI - Command: {args.command}")
    try:
        pin_threads(resolve_threads(args.threads))
        result = COMMANDS[args.command](args)
    except (LutKanError, FileNotFoundError, OSError, ValueError) as e:
        logger.error(f"Command {args.command} failed: {e}")
        print(json.dumps({'error': type(e).__name__, 'message': str(e)}), file=sys.stderr)
        return 1
    print(json.dumps(result, indent=2, default=str))
    return 0
