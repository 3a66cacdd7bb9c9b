"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 counterexample search failed, 5 verification FAIL.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from .config import ConfigError, load_config
from .experiments import (
    CERTIFICATE_RTOL,
    THEOREMS,
    counterexample_grid_value,
    csv_text,
    json_text,
    run_verification,
    write_csv,
    write_json,
)
from .grids import GridError, InvariantError
from .oracles import (
    SearchFailed,
    counterexample_search,
    landau_counterexample_search,
    model_counterexample_search,
)
from .profiles import BracketError, beta_from_mass
from .solvers import (
    Flow,
    NumericalError,
    StabilityError,
    build_grid,
    initial_field,
    resolve_beta,
    simulate,
    snapshot,
)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_SEARCH, EXIT_FAIL = 0, 2, 3, 4, 5


def _err(msg: str) -> None:
    print(f"error: {msg}", file=sys.stderr)


def _apply_overrides(cfg, args):
    changes = {}
    for flag, attr in (("epsilon", "epsilon"), ("alpha", "init_alpha"), ("dim", "dimension"),
                       ("equation", "equation")):
        value = getattr(args, flag, None)
        if value is not None:
            changes[attr] = value
    # a command-line beta or mass replaces whichever the file gave
    if getattr(args, "beta", None) is not None:
        changes.update(beta=args.beta, mass=None)
    if getattr(args, "mass", None) is not None:
        changes.update(mass=args.mass, beta=None)
    if changes:
        if "equation" in changes or "dimension" in changes:
            changes.setdefault("grid_kind", None)
        cfg = dataclasses.replace(cfg, **changes)
    return cfg


def _load(args):
    if not args.config:
        raise ConfigError("--config is required")
    return _apply_overrides(load_config(args.config), args)


def cmd_simulate(args) -> int:
    cfg = _load(args)
    log = simulate(cfg)
    out = Path(args.out) if args.out else None
    csv_path = cfg.output_csv or (out / "trajectory.csv" if out else None)
    json_path = cfg.output_json or (out / "trajectory.json" if out and args.json else None)
    if csv_path:
        write_csv(log.snapshots, csv_path)
    if json_path:
        write_json(log.as_dict(), json_path)
    if args.json and not json_path:
        print(json_text(log.as_dict()))
    elif not csv_path:
        sys.stdout.write(csv_text(log.snapshots))
    print(f"{len(log.snapshots)} snapshots, {log.steps} steps of dt={log.dt:.6g}, "
          f"clip mass {log.clip_mass:.3g}", file=sys.stderr)
    return EXIT_OK


def cmd_oracle(args) -> int:
    cfg = _load(args)
    grid = build_grid(cfg)
    beta = resolve_beta(cfg)
    field = initial_field(cfg, grid, beta)
    snap = snapshot(field, Flow(cfg.equation, grid, cfg.epsilon, beta), 0.0)
    if args.json:
        print(json_text(snap.as_dict()))
    else:
        sys.stdout.write(csv_text([snap]))
    return EXIT_OK


def cmd_counterexample(args) -> int:
    eps = 0.2 if args.epsilon is None else args.epsilon
    if eps < 0:
        raise ConfigError(f"epsilon must be >= 0, got {eps}")
    equation = args.equation or "fdfp"
    d = args.dim or 2
    beta = args.beta
    if args.mass is not None:
        beta = beta_from_mass(eps, args.mass, d)
    beta = 1.0 if beta is None else beta
    if equation == "heat":
        raise ConfigError("counterexamples exist for fdfp, model and landau only")
    if d not in (1, 2) or (equation != "fdfp" and d != 2):
        raise ConfigError(f"dimension {d} is not supported for {equation} certificates")
    try:
        if equation == "fdfp":
            result = counterexample_search(eps, d)
        elif equation == "model":
            result = model_counterexample_search(eps, args.alpha or 1.0, d)
        else:
            result = landau_counterexample_search(eps, beta, d)
    except ValueError as exc:
        raise SearchFailed(str(exc)) from None
    grid_value = counterexample_grid_value(result, beta)
    agree = abs(grid_value - result.djdt0) <= CERTIFICATE_RTOL * abs(result.djdt0)
    ok = result.djdt0 > 0 and grid_value > 0
    info = {
        "equation": equation,
        "epsilon": eps,
        "d": d,
        "alpha": result.alpha,
        "u_norm": result.u_norm,
        "u_threshold": result.u_threshold,
        ("D0" if equation != "model" else "A"): result.D0,
        ("D1" if equation != "model" else "B"): result.D1,
        "djdt0_quadrature": result.djdt0,
        "djdt0_grid": grid_value,
        "within_tolerance": agree,
        "positive": ok,
    }
    if args.json:
        print(json_text(info))
    else:
        for k, v in info.items():
            print(f"{k:>18} = {v}")
    if args.out:
        write_json(info, Path(args.out) / f"counterexample_{equation}.json")
    return EXIT_OK if ok else EXIT_NUMERIC


def cmd_verify(args) -> int:
    beta = args.beta
    if args.mass is not None:
        beta = beta_from_mass(0.0 if args.epsilon is None else args.epsilon, args.mass, args.dim or 2)
    overrides = {"epsilon": args.epsilon, "beta": beta, "alpha": args.alpha, "dim": args.dim}
    report = run_verification(args.theorem, **overrides)
    data = report.as_dict()
    if args.json:
        print(json_text(data))
    else:
        print(report.summary())
    if args.out:
        write_json(data, Path(args.out) / f"{args.theorem}.json")
    return EXIT_OK if report.passed else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fdfisher", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value config file")
    common.add_argument("--epsilon", type=float)
    common.add_argument("--beta", type=float)
    common.add_argument("--mass", type=float)
    common.add_argument("--alpha", type=float)
    common.add_argument("--dim", type=int)
    common.add_argument("--equation", choices=("fdfp", "heat", "model", "landau"))
    common.add_argument("--out", help="output directory")
    common.add_argument("--json", action="store_true", help="emit JSON instead of text")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="run a configured flow")
    sub.add_parser("oracle", parents=[common], help="functionals and oracle of the initial field")
    sub.add_parser("counterexample", parents=[common], help="search and grid-check a certificate")
    verify = sub.add_parser("verify", parents=[common], help="run a canned theorem check")
    verify.add_argument("theorem", choices=THEOREMS)
    return parser


COMMANDS = {
    "simulate": cmd_simulate,
    "oracle": cmd_oracle,
    "counterexample": cmd_counterexample,
    "verify": cmd_verify,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, BracketError) as exc:
        _err(str(exc))
        return EXIT_CONFIG
    except SearchFailed as exc:
        _err(f"search failed: {exc}")
        return EXIT_SEARCH
    except (StabilityError, NumericalError, InvariantError, GridError) as exc:
        _err(str(exc))
        return EXIT_NUMERIC
    except ValueError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    except Exception as exc:  # the exit-code contract covers every run
        _err(f"{type(exc).__name__}: {exc}")
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
