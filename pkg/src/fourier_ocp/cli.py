"""Command-line entry point: ``fourier-ocp {solve,evaluate,bounds,reference}``.

Exit codes: 0 success, 2 configuration or input error, 3 solver failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import tempfile
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import bounds as bd
from .config import load_config
from .errors import ArgumentError, ConfigError, DataError, RunError

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_RUN = 3

log = logging.getLogger("fourier_ocp")


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fourier-ocp", description="Fourier-surface solver for optimal control problems.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="train surfaces from a TOML config and write all outputs")
    s.add_argument("config")
    s.add_argument("--dry-run", action="store_true", help="validate and print the resolved config only")
    s.add_argument("--seed", type=int)
    s.add_argument("--output-dir")

    e = sub.add_parser("evaluate", help="evaluate saved surfaces")
    e.add_argument("coefficients")
    e.add_argument("--t", type=_floats, help="times, comma separated")
    e.add_argument("--ic", type=_floats, default=[], help="one initial condition, comma separated")
    e.add_argument("--grid", type=int, help="evaluate on this many equally spaced times in [0, T]")
    e.add_argument("--sweep", type=int, help="with --grid: also sweep this IC axis (1-based) over its training range")
    e.add_argument("--out", help="write the CSV here instead of stdout")

    b = sub.add_parser("bounds", help="truncation-error bound arithmetic and checks")
    b.add_argument("--T", type=float, default=1.0, help="half period in time")
    b.add_argument("--U", type=float, help="half period of a second axis (2-D bound)")
    b.add_argument("--C", type=float, help="total variation over one period")
    b.add_argument("--eps", type=float, help="target mean square error")
    b.add_argument("--function", help="named corpus function to check empirically")
    b.add_argument("--K", type=_ints, default=[1, 2, 4, 8, 16, 32], help="orders to check")
    b.add_argument("--surface", help="coefficients file: report the variation of the control surface")
    b.add_argument("--ic", type=_floats, default=[])

    r = sub.add_parser("reference", help="compute reference trajectories for a config")
    r.add_argument("config")
    r.add_argument("--output-dir")
    return p


def _cmd_solve(args) -> int:
    from .experiment import run_experiment

    cfg = load_config(args.config, seed=args.seed, output_dir=args.output_dir)
    if args.dry_run:
        echo = cfg.echo()
        echo["n_ics"] = len(cfg.ics)
        print(json.dumps(echo, indent=2, sort_keys=True))
        return EXIT_OK
    rep = run_experiment(cfg)
    m = rep.metrics
    res = rep.solve
    print(
        f"{cfg.problem.name}: outer={res.outer_iterations} inner={res.inner_iterations} "
        f"converged={res.converged} nu={res.nu:.3e}"
    )
    print(f"MSE={m.mse:.6g} MAE={m.mae:.6g} MAPE={m.mape:.6g} sMAPE={m.smape:.6g} Jerr={m.j_pct_error:.6g}%")
    if rep.gamma_ok is False:
        print(f"warning: control drops to {rep.gamma_min:.4g} < -1", file=sys.stderr)
    print(f"outputs in {cfg.output_dir}")
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    from .experiment import export_surface_grid
    from .fourier import evaluate, load_surfaces

    surfaces = load_surfaces(args.coefficients)
    dom = surfaces[0].domain
    if (args.t is None) == (args.grid is None):
        raise ArgumentError("give exactly one of --t or --grid")
    if args.grid is not None and args.grid < 2:
        raise ArgumentError("--grid needs at least 2 points")
    ic = list(args.ic)
    sweep = None
    if args.sweep is not None:
        if args.grid is None or not 1 <= args.sweep <= dom.ic_dim:
            raise ArgumentError(f"--sweep needs --grid and an axis between 1 and {dom.ic_dim}")
        sweep = args.sweep - 1
        if len(ic) == dom.ic_dim:
            ic.pop(sweep)
        if len(ic) != dom.ic_dim - 1:
            raise ArgumentError(f"--ic needs values for the {dom.ic_dim - 1} axes not swept")
        ic.insert(sweep, 0.5 * (dom.ic_lo[sweep] + dom.ic_hi[sweep]))
    elif len(ic) != dom.ic_dim:
        raise ArgumentError(f"--ic needs {dom.ic_dim} values")
    if dom.ic_dim and not dom.contains(0.0, ic):
        log.warning("initial condition lies outside the training box; values are extrapolated")
    if args.grid is not None:
        fixed = {i: v for i, v in enumerate(ic) if i != sweep}
        if args.out:
            export_surface_grid(Path(args.out), surfaces, args.grid, fixed, sweep)
        else:
            with tempfile.TemporaryDirectory() as tmp:
                p = export_surface_grid(Path(tmp) / "grid.csv", surfaces, args.grid, fixed, sweep)
                sys.stdout.write(p.read_text())
        return EXIT_OK
    t = np.array(args.t)
    if np.any(t < 0) or np.any(t > dom.horizon):
        log.warning("some times lie outside [0, %g]", dom.horizon)
    cols = [np.atleast_1d(evaluate(s, t, ic)) for s in surfaces]
    names = ["gamma_hat"] + [f"u_hat_{i + 1}" for i in range(len(surfaces) - 1)]
    lines = [",".join(["t"] + names)]
    for row in np.column_stack([t] + cols):
        lines.append(",".join(format(float(v), ".17g") for v in row))
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _cmd_bounds(args) -> int:
    if args.eps is not None and not args.eps > 0:
        raise ArgumentError(f"--eps must be positive, got {args.eps}")
    did = False
    if args.C is not None and args.eps is not None:
        did = True
        if args.U is None:
            K = bd.coefficients_for_tolerance_1d(args.T, args.C, args.eps)
            print(f"K={K} bound={bd.bound_1d(args.T, args.C, max(K, 1)):.6g}")
        else:
            kl, K = bd.coefficients_for_tolerance_2d(args.T, args.U, args.C, args.eps)
            print(f"KL={kl} K=L={K} bound={bd.bound_2d(args.T, args.U, args.C, K, K):.6g}")
    if args.function:
        did = True
        if args.U is None:
            corpus = bd.corpus_1d(args.T)
        else:
            corpus = bd.corpus_2d(args.T, args.U)
        if args.function not in corpus:
            raise ArgumentError(f"unknown function {args.function!r}; choose from {', '.join(corpus)}")
        f = corpus[args.function]
        print("K,C,bound,empirical_mse,satisfied")
        for K in args.K:
            if args.U is None:
                rep = bd.check_bound_1d(f, args.T, K, args.C)
            else:
                rep = bd.check_bound_2d(f, args.T, args.U, K, K, args.C)
            print(f"{K},{rep.C:.6g},{rep.bound_value:.6g},{rep.empirical_mse:.6g},{str(rep.satisfied).lower()}")
    if args.surface:
        did = True
        from .fourier import load_surfaces

        gamma = load_surfaces(args.surface)[0]
        C = bd.surface_variation(gamma, args.ic)
        T = gamma.domain.horizon
        print(f"C={C:.6g} T={T:g}")
        if args.eps is not None:
            print(f"K={bd.coefficients_for_tolerance_1d(T, C, args.eps)}")
    if not did:
        raise ArgumentError("nothing to do: give --C and --eps, --function, or --surface")
    return EXIT_OK


def _cmd_reference(args) -> int:
    from .experiment import write_reference_files

    cfg = load_config(args.config, output_dir=args.output_dir)
    refs, paths = write_reference_files(cfg)
    for ic, j, p in zip(cfg.ics, refs.j_star, paths):
        print(f"{','.join(format(float(v), 'g') for v in ic)}: J*={j:.10g} -> {p}")
    return EXIT_OK


COMMANDS = {"solve": _cmd_solve, "evaluate": _cmd_evaluate, "bounds": _cmd_bounds, "reference": _cmd_reference}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, ArgumentError, DataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except RunError as exc:
        print(f"solver failed: {exc}", file=sys.stderr)
        return EXIT_RUN


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
