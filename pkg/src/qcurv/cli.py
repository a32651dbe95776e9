"""Command-line front end: ``qcurv {table,orbit,poho-inverse,fit,check}``.

Data goes to stdout (or ``--out``); diagnostics go to stderr.  Exit codes:
0 success, 1 computation or check failure, 2 usage or input error,
3 value out of range, 4 fit did not converge.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .core import QCurvError, coefficients
from .delaunay import ShootingConfig, ShootingError, cached_orbit
from .ode import IntegratorConfig, hamiltonian_array

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2
EXIT_RANGE = 3
EXIT_NOCONV = 4


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    n: int = 5
    eps_grid: tuple = (0.1, 0.9, 9)
    fmt: str = "csv"
    out: str | None = None
    rel_tol: float | None = None
    jobs: int = 1

    @property
    def integrator(self) -> IntegratorConfig:
        if self.rel_tol is None:
            return IntegratorConfig()
        return IntegratorConfig(rel_tol=self.rel_tol, abs_tol=self.rel_tol * 1e-2)

    @property
    def shooting(self) -> ShootingConfig:
        return ShootingConfig(integrator=self.integrator)

    def grid(self) -> np.ndarray:
        start, stop, count = self.eps_grid
        return np.linspace(start, stop, count) if count > 1 else np.array([start])


# --- parsing helpers --------------------------------------------------------

def parse_eps_grid(text: str) -> tuple:
    parts = text.split(":")
    if len(parts) != 3:
        raise UsageError(f"--eps-grid must be start:stop:count, got {text!r}")
    try:
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise UsageError(f"--eps-grid must be start:stop:count, got {text!r}") from None
    if count < 1:
        raise UsageError("--eps-grid count must be at least 1 (empty grid)")
    if count == 1 and start != stop:
        raise UsageError("a single-point grid needs start == stop")
    for x in (start, stop):
        if not 0 < x <= 1:
            raise UsageError(f"--eps-grid values are fractions of eps_n in (0, 1], got {x}")
    return (min(start, stop), max(start, stop), count)


def default_jobs() -> int:
    env = os.environ.get("QCURV_JOBS")
    if env:
        try:
            jobs = int(env)
        except ValueError:
            raise UsageError(f"QCURV_JOBS must be a positive integer, got {env!r}") from None
        if jobs < 1:
            raise UsageError("QCURV_JOBS must be a positive integer")
        return jobs
    return os.cpu_count() or 1


def fmt_float(x) -> str:
    """Shortest round-trip representation (at most 17 significant digits)."""
    return repr(float(x))


class Output:
    def __init__(self, path):
        self.path = path
        self.chunks = []

    def write(self, text: str):
        self.chunks.append(text)

    def close(self):
        data = "".join(self.chunks)
        if self.path in (None, "-"):
            sys.stdout.write(data)
            sys.stdout.flush()
        else:
            with open(self.path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(data)


def emit(rows: list[dict], cfg: RunConfig, columns: list[str]):
    out = Output(cfg.out)
    if cfg.fmt == "json":
        out.write(json.dumps(rows, indent=2) + "\n")
    else:
        out.write(",".join(columns) + "\n")
        for row in rows:
            out.write(",".join(_cell(row[c]) for c in columns) + "\n")
    out.close()


def _cell(x) -> str:
    if isinstance(x, bool):
        return str(x).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return fmt_float(x)
    return str(x)


def _err(msg: str):
    print(f"qcurv: {msg}", file=sys.stderr)


# --- table ------------------------------------------------------------------

TABLE_COLUMNS = ["eps_rel", "eps_abs", "kappa", "period", "ham_level", "pohozaev"]


def _table_row(args):
    n, rel, shooting = args
    c = coefficients(n)
    orbit = cached_orbit(float(rel) * c.eps_n, n, shooting)
    return {
        "eps_rel": float(rel),
        "eps_abs": orbit.eps,
        "kappa": orbit.kappa,
        "period": orbit.period,
        "ham_level": orbit.ham_level,
        "pohozaev": c.sphere_area * orbit.ham_level,
    }


def cmd_table(cfg: RunConfig) -> int:
    c = coefficients(cfg.n)
    grid = sorted(cfg.grid())
    tasks = [(cfg.n, rel, cfg.shooting) for rel in grid]
    rows = []
    try:
        if cfg.jobs > 1 and len(tasks) > 1:
            with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
                # map keeps grid order whatever the scheduling
                rows = list(pool.map(_table_row, tasks))
        else:
            rows = [_table_row(t) for t in tasks]
    except QCurvError as exc:
        _err(f"shooting failed: {exc}")
        return EXIT_FAIL
    rows.append({
        "eps_rel": 1.0,
        "eps_abs": c.eps_n,
        "kappa": 0.0,
        "period": c.linear_period,
        "ham_level": c.cylinder_energy,
        "pohozaev": c.sphere_area * c.cylinder_energy,
    })
    emit(rows, cfg, TABLE_COLUMNS)
    return EXIT_OK


# --- orbit ------------------------------------------------------------------

ORBIT_COLUMNS = ["t", "v", "dv", "d2v", "d3v", "ham_drift"]


def cmd_orbit(cfg: RunConfig, eps_rel: float, periods: int) -> int:
    if not 0 < eps_rel <= 1:
        raise UsageError(f"--eps is a fraction of eps_n in (0, 1], got {eps_rel}")
    if periods < 1:
        raise UsageError("--periods must be at least 1")
    c = coefficients(cfg.n)
    try:
        orbit = cached_orbit(eps_rel * c.eps_n, cfg.n, cfg.shooting)
    except QCurvError as exc:
        _err(f"shooting failed at eps={eps_rel * c.eps_n!r}: {exc}")
        return EXIT_FAIL
    m = len(orbit.t) - 1
    t = np.concatenate([orbit.t[:m] + k * orbit.period for k in range(periods)] + [[periods * orbit.period]])
    states = np.vstack([orbit.states[:m]] * periods + [orbit.states[-1:]])
    h = hamiltonian_array(states, c)
    drift = np.maximum.accumulate(np.abs(h - h[0]) / max(1.0, abs(h[0])))
    rows = [
        {"t": t[i], "v": states[i, 0], "dv": states[i, 1], "d2v": states[i, 2], "d3v": states[i, 3],
         "ham_drift": drift[i]}
        for i in range(len(t))
    ]
    emit(rows, cfg, ORBIT_COLUMNS)
    return EXIT_OK


# --- poho-inverse -----------------------------------------------------------

def cmd_poho_inverse(cfg: RunConfig, P: float) -> int:
    from .pohozaev import OutOfRange, necksize_from_pohozaev, pohozaev_of_necksize, pohozaev_range

    c = coefficients(cfg.n)
    lo, hi = pohozaev_range(c)
    try:
        eps = necksize_from_pohozaev(P, c, cfg.shooting)
    except OutOfRange as exc:
        _err(f"{exc}")
        return EXIT_RANGE
    except ShootingError as exc:
        _err(f"necksize outside the computable range: {exc}")
        return EXIT_RANGE
    check = pohozaev_of_necksize(eps, c, cfg.shooting)
    emit([{"eps": eps, "eps_rel": eps / c.eps_n, "pohozaev": check}], cfg, ["eps", "eps_rel", "pohozaev"])
    return EXIT_OK


# --- fit --------------------------------------------------------------------

def _json_safe(obj):
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def cmd_fit(cfg: RunConfig, source: str) -> int:
    from .asymptotics import CsvFormatError, EpsAtBoundary, FitConfig, NoConvergence, fit_tail, read_tail_csv

    try:
        if source == "-":
            samples = read_tail_csv(sys.stdin)
        else:
            with open(source, newline="", encoding="utf-8") as fh:
                samples = read_tail_csv(fh)
    except (OSError, CsvFormatError) as exc:
        _err(f"cannot read tail samples: {exc}")
        return EXIT_USAGE
    c = coefficients(cfg.n)
    out = Output(cfg.out)
    try:
        result = fit_tail(samples, c, FitConfig(shooting=cfg.shooting))
    except (NoConvergence, EpsAtBoundary) as exc:
        best = exc.best.as_dict() if hasattr(exc.best, "as_dict") else (exc.best or {})
        payload = {"error": type(exc).__name__, "message": str(exc), "best": best}
        out.write(json.dumps(_json_safe(payload), indent=2) + "\n")
        out.close()
        _err(str(exc))
        return EXIT_NOCONV
    out.write(json.dumps(_json_safe(result.as_dict()), indent=2) + "\n")
    out.close()
    return EXIT_OK


# --- check ------------------------------------------------------------------

def cmd_check(cfg: RunConfig, only=None) -> int:
    from .checks import CHECKS, run_checks, selected

    if only and not any(selected(name, only) for name, _ in CHECKS):
        raise UsageError(f"no check matches {', '.join(only)}")
    coefficients(cfg.n)
    results = run_checks(cfg.n, cfg.integrator, only)
    out = Output(cfg.out)
    if cfg.fmt == "json":
        out.write(json.dumps([{"name": r.name, "passed": r.passed, "detail": r.detail} for r in results],
                             indent=2) + "\n")
    else:
        for r in results:
            out.write(f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.detail}\n")
    out.close()
    for r in results:
        print(f"{r.name}: {r.seconds:.3f} s", file=sys.stderr)
    failed = [r.name for r in results if not r.passed]
    if failed:
        _err(f"{len(failed)} check(s) failed: {', '.join(failed)}")
        return EXIT_FAIL
    return EXIT_OK


# --- entry point ------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--n", type=int, default=5, help="dimension (5..12)")
    common.add_argument("--format", choices=("csv", "json"), default="csv", dest="fmt")
    common.add_argument("--out", default=None, help="output file (default stdout)")
    common.add_argument("--rel-tol", type=float, default=None, help="integrator relative tolerance")
    common.add_argument("--jobs", type=int, default=None, help="worker processes (default $QCURV_JOBS or cores)")

    parser = argparse.ArgumentParser(prog="qcurv", description="Singular constant Q-curvature Delaunay metrics.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("table", parents=[common], help="tabulate the Delaunay family")
    p.add_argument("--eps-grid", default="0.1:0.9:9", help="start:stop:count in units of eps_n")

    p = sub.add_parser("orbit", parents=[common], help="dump one orbit")
    p.add_argument("--eps", type=float, required=True, help="necksize in units of eps_n")
    p.add_argument("--periods", type=int, default=1)

    p = sub.add_parser("poho-inverse", parents=[common], help="necksize from a Pohozaev value")
    p.add_argument("value", type=float, help="Pohozaev invariant P")

    p = sub.add_parser("fit", parents=[common], help="fit the tail asymptotics to a t,s,v CSV")
    p.add_argument("input", help="CSV file, or - for stdin")

    p = sub.add_parser("check", parents=[common], help="run the invariant suite")
    p.add_argument("--only", action="append", default=None, help="run checks whose name, with or without the module prefix, starts with this (repeatable)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        jobs = args.jobs if args.jobs is not None else default_jobs()
        if jobs < 1:
            raise UsageError("--jobs must be at least 1")
        if args.rel_tol is not None and not args.rel_tol > 0:
            raise UsageError("--rel-tol must be positive")
        try:
            coefficients(args.n)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        grid = parse_eps_grid(args.eps_grid) if args.command == "table" else (0.1, 0.9, 9)
        cfg = RunConfig(args.n, grid, args.fmt, args.out, args.rel_tol, jobs)
        try:
            cfg.integrator
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        if args.command == "table":
            return cmd_table(cfg)
        if args.command == "orbit":
            return cmd_orbit(cfg, args.eps, args.periods)
        if args.command == "poho-inverse":
            return cmd_poho_inverse(cfg, args.value)
        if args.command == "fit":
            return cmd_fit(cfg, args.input)
        return cmd_check(cfg, args.only)
    except UsageError as exc:
        _err(str(exc))
        return EXIT_USAGE
    except BrokenPipeError:
        # reader went away (e.g. piped into head); silence the flush at exit
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
