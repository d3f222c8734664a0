#!/usr/bin/env python3
"""
Experiment Runner

Command-line front end for the MA-FD optimizer:

    run        single alternating optimization with trace, plot and state snapshot
    sweep      Monte Carlo sweep from a sweep specification file
    gradcheck  finite-difference audit of the phase and position gradients
    oracle     small-instance brute-force comparisons
    plot       re-render sweep figures from a results CSV

Usage:
    python run_experiments.py run --profile desk --seed 7 --variant MA-ME
    python run_experiments.py sweep configs/sweep_n.json --workers 4
"""

import argparse
import logging
import os
import sys
from dataclasses import replace

from dotenv import load_dotenv

import ao
import harness
from channel import ConfigurationError, build_channels, describe, load_config, sample_realization, save_realization
from metrics import half_duplex_rate, sum_rate

logger = logging.getLogger(__name__)

PROFILES_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "configs")
DEFAULT_OUT_DIR = "./results"


def resolve_config(args):
    path = args.config or os.path.join(PROFILES_DIR, f"{args.profile}.json")
    return load_config(path)


def resolve_out_dir(args) -> str:
    return args.out_dir or os.environ.get("MAFD_OUT_DIR") or DEFAULT_OUT_DIR


def resolve_seed(args) -> int:
    return 0 if args.seed is None else args.seed


def cmd_run(args) -> int:
    config = resolve_config(args)
    seed = resolve_seed(args)
    mask, duplex = ao.parse_variant(args.variant)
    out_dir = resolve_out_dir(args)
    os.makedirs(out_dir, exist_ok=True)
    print(f"🚀 AO run: {describe(config)}, variant {args.variant}, seed {seed}")

    realization = sample_realization(config, seed)
    state, trace = ao.run(config, realization, mask, seed)
    ch = build_channels(realization, state.T_t, state.T_r, state.R)
    report = half_duplex_rate(ch, state, config) if duplex == "HD" else sum_rate(ch, state, config)

    stem = os.path.join(out_dir, f"run_{args.variant}_seed{seed}")
    trace.to_csv(f"{stem}_trace.csv")
    harness.plot_convergence({args.variant: trace}, f"{stem}_convergence.svg")
    ao.save_state(state, f"{stem}_state.json")
    save_realization(realization, f"{stem}_realization.json")

    status = "✅" if report.feasible else "⚠️ "
    print(f"{status} R_sum={report.rate_sum:.4f} bps/Hz (DL {report.rate_dl:.4f}, UL {report.rate_ul:.4f}), "
          f"{trace.iterations} iterations, converged={trace.converged}")
    print(f"📁 Outputs: {stem}_*")
    return 0


def cmd_sweep(args) -> int:
    base = resolve_config(args)
    spec = harness.load_sweep_spec(args.spec, base_config=base)
    if args.realizations:
        spec = replace(spec, realizations=args.realizations)
    if args.seed is not None:
        spec = replace(spec, seed_base=args.seed)
    out_dir = resolve_out_dir(args)
    print(f"🚀 Sweep over {spec.parameter} = {list(spec.values)} "
          f"({len(spec.variants)} variants x {spec.realizations} realizations)")
    table = harness.run_sweep(spec, workers=args.workers)
    written = harness.emit_outputs(table, out_dir, xlabel=spec.parameter)
    failures = int((table.frame["error"] != "").sum())
    print(f"✅ {len(table)} rows, {failures} failed cells")
    for path in written:
        print(f"   📄 {path}")
    return 0


def cmd_gradcheck(args) -> int:
    config = resolve_config(args)
    errors = harness.gradient_audit(config, resolve_seed(args), probes=args.probes)
    worst = max(errors.values())
    for block, err in errors.items():
        print(f"   {block:>6}: max relative error {err:.3e}")
    if worst < args.threshold:
        print(f"✅ Gradient audit passed (threshold {args.threshold:g})")
        return 0
    print(f"❌ Gradient audit failed: {worst:.3e} >= {args.threshold:g}")
    return 1


def cmd_oracle(args) -> int:
    config = resolve_config(args)
    ok = True
    power = [harness.power_oracle(config, resolve_seed(args) + k) for k in range(args.trials)]
    worst_p = max(r["p_error"] for r in power if r["qos_feasible"]) if any(
        r["qos_feasible"] for r in power) else 0.0
    print(f"   power: worst |p - p_grid| / P_u_max = {worst_p:.2e}")
    ok &= worst_p <= 1e-4

    combiner = [harness.combiner_oracle(config, resolve_seed(args) + k) for k in range(args.trials)]
    worst_angle = max(r["angle_rad"] for r in combiner)
    print(f"   combiner: worst angle to generalized eigenvector = {worst_angle:.2e} rad")
    ok &= worst_angle <= 1e-6

    single = harness.single_element_oracle(config, resolve_seed(args), position_points=args.grid,
                                           phase_points=args.grid)
    print(f"   single element: SCA {single['sca_rate']:.6f} vs grid {single['grid_rate']:.6f} "
          f"(shortfall {100 * single['relative_shortfall']:.3f}%)")
    ok &= single["relative_shortfall"] <= 0.01
    print("✅ Oracle checks passed" if ok else "❌ Oracle checks failed")
    return 0 if ok else 1


def cmd_plot(args) -> int:
    table = harness.ResultTable.from_csv(args.results)
    written = harness.emit_outputs(table, resolve_out_dir(args), variants=args.variants,
                                   xlabel=args.xlabel)
    for path in written:
        print(f"   📄 {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', help='Scenario JSON file (overrides --profile)')
    common.add_argument('--profile', choices=['desk', 'paper'], default='desk',
                        help='Named scenario profile in configs/')
    common.add_argument('--seed', type=int, help='Realization and initialization seed (sweep: seed base)')
    common.add_argument('--out-dir', '-o', help='Output directory (env MAFD_OUT_DIR, default ./results)')
    common.add_argument('--verbose', '-v', action='store_true', help='Debug logging')

    parser = argparse.ArgumentParser(description='Movable-antenna full-duplex sum-rate optimizer')
    sub = parser.add_subparsers(dest='command', required=True)

    run_p = sub.add_parser('run', help='Single AO run with trace', parents=[common])
    run_p.add_argument('--variant', default='MA-ME', help='MA-ME, FA-ME, MA-FE, FA-FE (suffix -HD for half duplex)')
    run_p.set_defaults(func=cmd_run)

    sweep_p = sub.add_parser('sweep', help='Monte Carlo sweep from a specification file', parents=[common])
    sweep_p.add_argument('spec', help='Sweep specification JSON')
    sweep_p.add_argument('--workers', type=int, default=1)
    sweep_p.add_argument('--realizations', type=int, help='Override the realization count')
    sweep_p.set_defaults(func=cmd_sweep)

    grad_p = sub.add_parser('gradcheck', help='Finite-difference gradient audit', parents=[common])
    grad_p.add_argument('--probes', type=int, default=200)
    grad_p.add_argument('--threshold', type=float, default=1e-5)
    grad_p.set_defaults(func=cmd_gradcheck)

    oracle_p = sub.add_parser('oracle', help='Small-instance brute-force comparisons', parents=[common])
    oracle_p.add_argument('--trials', type=int, default=100)
    oracle_p.add_argument('--grid', type=int, default=201)
    oracle_p.set_defaults(func=cmd_oracle)

    plot_p = sub.add_parser('plot', help='Re-render figures from a results CSV', parents=[common])
    plot_p.add_argument('results', help='results.csv written by a sweep')
    plot_p.add_argument('--variants', nargs='*', help='Subset of variants to plot')
    plot_p.add_argument('--xlabel', default='swept value')
    plot_p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    """Parse arguments and dispatch to a subcommand."""
    load_dotenv()
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format='%(asctime)s - %(levelname)s - %(message)s'
    )
    try:
        return args.func(args)
    except ConfigurationError as e:
        print(f"❌ Configuration error: {e}")
        return 2
    except OSError as e:
        print(f"❌ I/O error: {e}")
        return 3
    except Exception as e:
        logger.error(f"Unexpected failure: {e}")
        import traceback
        traceback.print_exc()
        return 1


if __name__ == "__main__":
    sys.exit(main())
