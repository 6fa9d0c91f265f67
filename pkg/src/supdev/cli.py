"""Command-line entry point.

Exit codes: 0 when every assertion row passes, 1 when any assertion fails,
2 for usage or config errors.  The seed resolves as CLI flag > SUPDEV_SEED
environment variable > config file > 0 and is echoed in every output row.
"""

from __future__ import annotations

import argparse
import sys

from .errors import SupdevError, ConfigError
from .harness import (
    EXPERIMENT_KINDS,
    SEED_ENV_VAR,
    calibrate,
    default_config,
    emit,
    load_config,
    run_experiment,
)

_KIND_HELP = {
    "equicorrelated": "grid max of an equicorrelated Gaussian vector vs the product bound",
    "block": "block-partitioned covariance max vs the factorized Gaussian bound",
    "szego": "stationary-sequence max vs the spectral geometric-mean sandwich",
    "moderate-trig": "periodic-sum grid supremum vs the moderate-deviation bound",
    "cyclic-transfer": "almost periodic sup vs its rational-frequency companion plus error term",
    "decoupling": "product-of-indicators factorization, correlation inequalities, OU row-sum constant",
    "kronecker-search": "simultaneous approximation on a step lattice: hit search and counts",
    "limsup": "running maximum of an exponential sum along an arithmetic progression",
    "divergence": "growth of the normalized absolute-covariance partial sums",
    "lattice-correlation": "correlation cap and variance floor of the cosine part on lattice points",
}


def _add_common(sub):
    sub.add_argument("-c", "--config", help="INI config file (defaults per kind otherwise)")
    sub.add_argument("--seed", type=int, default=None, help=f"seed override (beats {SEED_ENV_VAR} and config)")
    sub.add_argument("--reps", type=int, default=None, help="replication override")
    sub.add_argument("--workers", type=int, default=None, help="worker threads (results do not depend on this)")
    sub.add_argument("--csv", help="write rows as CSV to this path")
    sub.add_argument("--json", help="write the record as JSON to this path")
    sub.add_argument("--plotdata", help="write (x, mc, mc_lo, mc_hi, bound) rows to this path")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="supdev",
        description="Deviation bounds for Gaussian suprema: evaluate bounds, run seeded "
        "Monte Carlo estimates, and verify every implemented inequality.",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    p_verify = subs.add_parser(
        "verify",
        help="run one experiment kind's standard comparison",
        description="Checks for each kind:\n"
        + "\n".join(f"  {k:>19}: {v}" for k, v in _KIND_HELP.items()),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    p_verify.add_argument("kind", choices=EXPERIMENT_KINDS)
    _add_common(p_verify)

    p_bound = subs.add_parser("bound", help="evaluate the closed-form bound side only")
    p_bound.add_argument("kind", choices=EXPERIMENT_KINDS)
    _add_common(p_bound)

    p_sim = subs.add_parser("simulate", help="run the Monte Carlo estimate side only")
    p_sim.add_argument("kind", choices=EXPERIMENT_KINDS)
    _add_common(p_sim)

    for alias, kind in (("decouple", "decoupling"), ("cyclic", "cyclic-transfer"), ("kronecker", "kronecker-search")):
        p_alias = subs.add_parser(alias, help=f"alias for 'verify {kind}'")
        _add_common(p_alias)
        p_alias.set_defaults(alias_kind=kind)

    p_cal = subs.add_parser("calibrate", help="fit free constants and report them (never persisted)")
    p_cal.add_argument("kind", choices=("cyclic-transfer", "kronecker-search"))
    _add_common(p_cal)

    return parser


def _resolve_config(args, kind):
    if args.config:
        cfg = load_config(args.config)
        if cfg.kind != kind:
            raise ConfigError(f"config kind {cfg.kind!r} does not match requested {kind!r}")
    else:
        cfg = default_config(kind)
    updates = {}
    if args.reps is not None:
        updates["reps"] = args.reps
    if args.workers is not None:
        updates["workers"] = args.workers
    if updates:
        from dataclasses import replace

        cfg = replace(cfg, **updates)
    return cfg


def _print_record(record, bound_only=False, mc_only=False) -> bool:
    print(f"experiment={record.experiment} seed={record.seed} reps={record.reps} hash={record.config_hash}")
    ok = True
    for row in record.checks:
        bits = [f"  {row.name}:"]
        if row.mc is not None and not bound_only:
            bits.append(f"mc={row.mc:.6g}")
            if row.mc_lo is not None:
                bits.append(f"ci=[{row.mc_lo:.6g}, {row.mc_hi:.6g}]")
        if row.bound is not None and not mc_only:
            bits.append(f"bound={row.bound:.6g}")
        if row.margin is not None and not bound_only and not mc_only:
            bits.append(f"margin={row.margin:.6g}")
        if row.passed is not None:
            bits.append("PASS" if row.passed else "FAIL")
            ok &= row.passed
        print(" ".join(bits))
    return ok


def _write_outputs(record, cfg, args):
    targets = dict(cfg.output)
    for fmt in ("csv", "json", "plotdata"):
        flag = getattr(args, fmt, None)
        if flag:
            targets[fmt] = flag
    for fmt, path in targets.items():
        emit([record], fmt, path)
        print(f"wrote {fmt} -> {path}")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    kind = getattr(args, "alias_kind", None) or getattr(args, "kind", None)
    try:
        cfg = _resolve_config(args, kind)
        if args.command == "calibrate":
            result = calibrate(cfg, seed=args.seed)
            for key, val in result.items():
                print(f"{key}={val}")
            print("note: calibrated constants are reported only, never stored as defaults")
            return 0
        record = run_experiment(cfg, seed=args.seed)
        bound_only = args.command == "bound"
        mc_only = args.command == "simulate"
        ok = _print_record(record, bound_only=bound_only, mc_only=mc_only)
        _write_outputs(record, cfg, args)
        if bound_only or mc_only:
            return 0
        return 0 if ok else 1
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except SupdevError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
