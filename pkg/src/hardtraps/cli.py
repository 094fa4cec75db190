"""Command-line driver.

Subcommands
-----------
env        write a seeded obstacle environment
survival   quenched, averaged or annealed survival at a list of times
phase      table and SVG of the averaged decay rate against gamma
limitlaw   normalised gap-sum experiment against the infinitely divisible limit
validate   run the invariant checks

Every output file starts with ``#`` lines holding the package version and
the resolved configuration.  Exit codes: 0 success, 1 validation failure,
2 usage or parameter error.
"""
from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from . import env as E
from . import limitlaw as LL
from . import montecarlo as MC
from . import regimes as R
from . import survival as S
from . import validation as V
from .errors import DimensionError, HardTrapsError, ParameterError

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


# -- argument types --------------------------------------------------------------


def positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def float_list(text: str) -> list:
    try:
        return [float(x) for x in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def int_list(text: str) -> list:
    try:
        return [int(x) for x in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


# -- output helpers ----------------------------------------------------------------


def header(command: str, config: dict) -> str:
    items = " ".join(f"{k}={config[k]}" for k in sorted(config))
    return f"# hardtraps {__version__}\n# command: {command}\n# config: {items}\n"


def fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def csv_text(command: str, config: dict, columns: Sequence[str], rows) -> str:
    lines = [header(command, config) + ",".join(columns)]
    lines += [",".join(fmt(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def emit(text: str, path: Optional[str]) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def resolved(args: argparse.Namespace) -> dict:
    return {k: v for k, v in vars(args).items() if k not in ("func", "command")}


# -- env ------------------------------------------------------------------------------


def cmd_env(args) -> int:
    envr = E.sample_environment(args.dim, args.radius, args.p, args.seed)
    emit(header("env", resolved(args)) + envr.to_text(), args.out)
    return EXIT_OK


# -- survival --------------------------------------------------------------------------


def _load_env(args) -> E.Environment:
    if args.env:
        return E.Environment.load(args.env)
    missing = [f for f in ("dim", "radius", "p") if getattr(args, f) is None]
    if missing:
        raise ParameterError("give --env or all of --dim --radius --p (missing: " + ", ".join("--" + m for m in missing) + ")")
    return E.sample_environment(args.dim, args.radius, args.p, args.seed)


def quenched_value(envr: E.Environment, x, t: float) -> S.SurvivalValue:
    """``p(x, t)`` in any dimension; components cut by the box give a bracket."""
    if envr.dim == 1:
        return S.quenched_survival_1d(E.gap_structure(envr), int(x[0]), t)
    comp = E.free_component(envr, x)
    if comp.is_obstacle:
        return S.SurvivalValue(0.0, "exact", 0.0, t, tuple(x))
    v = S.truncated_survival(envr, x, t, comp.sites).value
    if comp.touches_boundary:
        return S.SurvivalValue.bracket(v, 1.0, t, tuple(x))
    return S.SurvivalValue(v, "exact", 0.0, t, tuple(x))


def cmd_survival(args) -> int:
    rows = []
    failed = []
    if args.mode in ("quenched", "averaged"):
        envr = _load_env(args)
        cfg = resolved(args) | {"dim": envr.dim, "radius": envr.radius, "p": envr.density, "seed": envr.seed}
        x = args.x if args.x is not None else [0] * envr.dim
        if len(x) != envr.dim:
            raise DimensionError(f"--x needs {envr.dim} coordinates, got {len(x)}")
        for t in args.t:
            if args.mode == "quenched":
                v = quenched_value(envr, x, t)
            else:
                v = S.averaged_survival(envr, t, args.L)
            rows.append((t, v.value, v.error, v.mode))
    else:
        if args.p is None:
            raise ParameterError(f"--p is required for mode {args.mode}")
        dim = args.dim or 1
        cfg = resolved(args) | {"dim": dim}
        for t in args.t:
            if args.mode == "annealed-exact":
                if dim != 1:
                    raise DimensionError("annealed-exact is available in d = 1 only; use annealed-mc")
                v = S.annealed_exact_1d(args.p, t)
                rows.append((t, v.value, v.error, v.mode))
                if args.check:
                    mc = MC.annealed_mc(1, args.p, t, args.n, args.seed)
                    z = mc.z_score(v.value)
                    rows.append((t, mc.mean, mc.std_error, "annealed-mc"))
                    if z > 3.0:
                        failed.append(f"t={t}: exact {v.value:.6g} vs MC {mc.mean:.6g} ({z:.2f} sigma)")
            else:
                mc = MC.annealed_mc(dim, args.p, t, args.n, args.seed)
                rows.append((t, mc.mean, mc.std_error, "annealed-mc"))
    emit(csv_text("survival", cfg, ("t", "value", "error", "mode"), rows), args.out)
    for msg in failed:
        print(f"check failed: {msg}", file=sys.stderr)
    return EXIT_FAIL if failed else EXIT_OK


# -- phase ------------------------------------------------------------------------------


def cmd_phase(args) -> int:
    if args.gamma_steps < 1 or not args.gamma_max >= args.gamma_min or args.gamma_min < 0:
        raise ParameterError("empty gamma grid: need 0 <= gamma-min <= gamma-max and gamma-steps >= 1")
    if args.gamma_steps == 1:
        grid = [args.gamma_min]
    else:
        grid = np.linspace(args.gamma_min, args.gamma_max, args.gamma_steps)
    rows = R.figure1_table(args.dim, grid)
    cfg = resolved(args) | {"gamma1": R.gamma1(args.dim), "gamma2": R.gamma2(args.dim)}
    emit(csv_text("phase", cfg, ("gamma", "abar", "inv_abar", "cases"),
                  [(r.gamma, r.abar, r.inv_abar, r.cases) for r in rows]), args.out)
    if args.svg:
        svg = R.figure1_svg(rows, args.dim)
        comment = "<!--\n" + header("phase", cfg).replace("--", "- -") + "-->\n"
        Path(args.svg).write_text(comment + svg)
    return EXIT_OK


# -- limitlaw --------------------------------------------------------------------------------


def cmd_limitlaw(args) -> int:
    params = LL.scaling_params(args.gamma, args.p, args.c)
    if args.t_list:
        times = list(args.t_list)
    else:
        times = [LL.time_for_bracket(params, b, args.frac) for b in args.brackets]
    cfg = resolved(args) | {"times": ",".join(repr(t) for t in times)}
    run = LL.cf_experiment(args.gamma, args.p, args.c, times, args.n_envs, args.seed, args.centered,
                           args.u_max, args.u_points)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = [(t, i, v) for t, vals in zip(times, run.samples) for i, v in enumerate(vals)]
    (out / "samples.csv").write_text(csv_text("limitlaw", cfg, ("t", "draw", "value"), rows))
    rows = [(t, uu, e.real, e.imag, f.real, f.imag)
            for t, ecf in zip(times, run.ecf) for uu, e, f in zip(run.u, ecf, run.phi)]
    (out / "cf.csv").write_text(csv_text("limitlaw", cfg, ("t", "u", "re_ecf", "im_ecf", "re_phi", "im_phi"), rows))
    lines = [header("limitlaw", cfg).rstrip("\n")]
    lines.append(f"beta={run.beta!r}")
    lines.append(f"levy_tail_at_1={run.tail_limit!r}")
    for row in run.rows:
        lines.append(" ".join(f"{k}={fmt(v)}" for k, v in row.items()))
    lines.append(f"max_cf_diff_nonincreasing={run.cf_nonincreasing}")
    lines.append(f"final_tail_within_30pct={run.rows[-1]['tail_rel_gap'] < 0.30}")
    (out / "summary.txt").write_text("\n".join(lines) + "\n")
    sys.stdout.write("\n".join(lines[3:]) + "\n")
    return EXIT_OK


# -- validate ----------------------------------------------------------------------------------


def cmd_validate(args) -> int:
    checks = V.select(args.filter)
    if not checks:
        raise ParameterError(f"no checks match filter {args.filter!r}")
    if args.list:
        for c in checks:
            print(c.qualname)
        return EXIT_OK
    sys.stdout.write(header("validate", resolved(args)))
    results = V.run_checks(checks, args.seed)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.check.qualname} {r.seconds:.3f}s {r.detail}", flush=True)
    failed = [r for r in results if not r.passed]
    print(f"# {len(results) - len(failed)}/{len(results)} passed, {sum(r.seconds for r in results):.2f}s total")
    if failed:
        print(f"first failure: {failed[0].check.qualname}: {failed[0].detail}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


# -- parser --------------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hardtraps", description=__doc__.split("\n")[0])
    ap.add_argument("--version", action="version", version=f"hardtraps {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("env", help="write a seeded obstacle environment",
                       description="Writes '# ...' header lines, then 'dim radius density seed' and the hex occupancy.")
    p.add_argument("--dim", type=positive_int, required=True)
    p.add_argument("--radius", type=int, required=True)
    p.add_argument("--p", type=float, required=True, help="obstacle density in [0, 1)")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", default=None, help="output path (default stdout)")
    p.set_defaults(func=cmd_env)

    p = sub.add_parser("survival", help="survival probabilities at a list of times",
                       description="CSV columns: t,value,error,mode.  'error' is the half-width of a "
                                   "bracket (bounded), the series tail bound (series) or the standard error (MC).")
    p.add_argument("--env", help="environment file written by 'env'")
    p.add_argument("--dim", type=positive_int)
    p.add_argument("--radius", type=int)
    p.add_argument("--p", type=float)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--t", type=float_list, required=True, help="comma-separated times")
    p.add_argument("--mode", choices=("quenched", "averaged", "annealed-exact", "annealed-mc"), required=True)
    p.add_argument("--x", type=int_list, help="start site for quenched mode (default origin)")
    p.add_argument("--L", type=int, default=0, help="box radius for averaged mode")
    p.add_argument("--n", type=positive_int, default=100_000, help="Monte Carlo walks")
    p.add_argument("--check", action="store_true", help="annealed-exact: also run MC and fail beyond 3 sigma")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_survival)

    p = sub.add_parser("phase", help="averaged decay rate against gamma",
                       description="CSV columns: gamma,abar,inv_abar,cases; optional SVG of 1/abar.")
    p.add_argument("--dim", type=positive_int, default=2)
    p.add_argument("--gamma-min", type=float, default=0.0)
    p.add_argument("--gamma-max", type=float, default=1.2)
    p.add_argument("--gamma-steps", type=int, default=241)
    p.add_argument("--out", default=None, help="CSV path (default stdout)")
    p.add_argument("--svg", default=None, help="SVG path")
    p.set_defaults(func=cmd_phase)

    p = sub.add_parser("limitlaw", help="normalised gap sums against the limit law",
                       description="Writes samples.csv (t,draw,value), cf.csv (t,u,re_ecf,im_ecf,re_phi,im_phi) "
                                   "and summary.txt into --out-dir.")
    p.add_argument("--gamma", type=float, default=0.5)
    p.add_argument("--p", type=float, default=0.5)
    p.add_argument("--c", type=float, default=1.0)
    p.add_argument("--t-list", type=float_list, default=None, help="times; default from --brackets")
    p.add_argument("--brackets", type=int_list, default=[10, 15, 20])
    p.add_argument("--frac", type=float, default=1.0, help="position inside each bracket plateau, in (0, 1]")
    p.add_argument("--n-envs", type=positive_int, default=10_000)
    p.add_argument("--centered", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--u-max", type=float, default=5.0)
    p.add_argument("--u-points", type=positive_int, default=5001)
    p.add_argument("--out-dir", default="limitlaw_out")
    p.set_defaults(func=cmd_limitlaw)

    p = sub.add_parser("validate", help="run the invariant checks")
    p.add_argument("--filter", default=None, help="comma-separated substrings of check names, e.g. 'spectral'")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--list", action="store_true", help="list matching checks and exit")
    p.set_defaults(func=cmd_validate)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except HardTrapsError as exc:
        print(f"hardtraps {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BrokenPipeError:
        # reader closed the pipe (e.g. `| head`); silence the flush at exit
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return 0


if __name__ == "__main__":
    sys.exit(main())
