"""Batch runner: ``hardycorner {eigen,hardy,evolve,sweep} --config run.ini [--out table.csv]``.

Configs are INI files.  Every run echoes its fully materialised config, the
package version and the seed as ``#`` lines above the CSV header, so a table
can be regenerated from its own header.  Exit status: 0 within tolerance,
1 tolerance exceeded or solver failure, 2 invalid input.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import io
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import __version__
from .eigen import EigenSolverError, lowest_eigenvalues
from .evolve import INITIAL_DATA, bound_ratio, decay_fit, evolve, make_initial
from .hardy import sharpness_scan
from .model import CornerParams, hardy_constant
from .radial import SCHEMES, RadialGrid, assemble

EIGEN_COLUMNS = ["n_grid", "r_min", "r_max", "mu0", "mu0_exact", "abs_err", "gap", "runtime_ms"]
HARDY_COLUMNS = ["epsilon", "quotient", "gap", "gap_times_log_eps", "norm_Lambda_eps"]
EVOLVE_COLUMNS = ["s", "t", "norm_v", "norm_u", "bound_ratio", "profile_error", "weighted_bound_ratio"]
SWEEP_COLUMNS = ["dim", "corner", "lam", "m", "mu0", "mu0_exact", "abs_err",
                 "fitted_exponent", "expected_exponent", "exponent_rel_err", "bound_holds"]


class ConfigError(ValueError):
    """Invalid configuration; the message starts with the offending section.key."""


# --- config --------------------------------------------------------------------

@dataclass
class ParamsSection:
    dim: int = 3
    corner: int = 1
    lam: str = "critical"


@dataclass
class GridSection:
    r_max: float = 20.0
    n: str = "20000"
    r_min: str = "auto"  # auto: 1e-4 * r_max
    scheme: str = "regular"


@dataclass
class EigenSection:
    count: int = 2
    solver_tol: float = 1e-10
    tol: float = 1e-3


@dataclass
class HardySection:
    eps_list: str = "1e-2, 1e-3"
    gap_log_bound: float = 8.0


@dataclass
class EvolveSection:
    initial: str = "generic"
    seed: int = 0
    ds: float = 1e-3
    s_end: float = 8.0
    every: float = 0.1
    s_burn: float = 1.0
    tol: float = 0.02


@dataclass
class SweepSection:
    dims: str = "4"
    corners: str = "0, 1, 2"
    lams: str = "0"
    workers: int = 0  # 0: one per CPU, capped by the number of triples


@dataclass
class ExperimentConfig:
    params: ParamsSection = field(default_factory=ParamsSection)
    grid: GridSection = field(default_factory=GridSection)
    eigen: EigenSection = field(default_factory=EigenSection)
    hardy: HardySection = field(default_factory=HardySection)
    evolve: EvolveSection = field(default_factory=EvolveSection)
    sweep: SweepSection = field(default_factory=SweepSection)

    # derived, validated views -------------------------------------------------
    def corner_params(self) -> CornerParams:
        return _params(self.params.dim, self.params.corner, self.params.lam, "params.lam")

    def grids(self) -> list[RadialGrid]:
        ns = _int_list(self.grid.n, "grid.n")
        return [_grid(self.grid, n) for n in ns]

    def eps_values(self) -> list[float]:
        vals = _float_list(self.hardy.eps_list, "hardy.eps_list")
        for e in vals:
            if not (0 < e < 0.25 and e + e ** 4 < 1 / e - e ** 4):
                raise ConfigError(f"hardy.eps_list: epsilon={e} outside (0, 1/4)")
        return vals

    def triples(self) -> list[CornerParams]:
        dims = _int_list(self.sweep.dims, "sweep.dims")
        corners = _int_list(self.sweep.corners, "sweep.corners")
        lams = [s.strip() for s in self.sweep.lams.split(",") if s.strip()]
        if not lams:
            raise ConfigError("sweep.lams: empty list")
        out = []
        for N in dims:
            for k in corners:
                for lam in lams:
                    out.append(_params(N, k, lam, "sweep.lams"))
        return sorted(out, key=lambda q: (q.dim, q.corner, q.lam))

    def echo(self) -> list[str]:
        lines = []
        for f in fields(self):
            for key, val in asdict(getattr(self, f.name)).items():
                lines.append(f"[{f.name}] {key} = {val}")
        return lines


def _params(N, k, lam, name) -> CornerParams:
    try:
        hc = hardy_constant(N, k)
    except ValueError as exc:
        raise ConfigError(f"params.dim/params.corner: {exc}") from None
    text = str(lam).strip().lower()
    if text == "critical":
        value = hc
    elif text == "half":
        value = hc / 2
    else:
        try:
            value = float(text)
        except ValueError:
            raise ConfigError(f"{name}: expected a number, 'half' or 'critical', got {lam!r}") from None
    try:
        return CornerParams(N, k, value)
    except ValueError as exc:
        raise ConfigError(f"{name}: {exc}") from None


def _grid(g: GridSection, n: int) -> RadialGrid:
    if g.scheme not in SCHEMES:
        raise ConfigError(f"grid.scheme: expected one of {SCHEMES}, got {g.scheme!r}")
    try:
        if str(g.r_min).strip().lower() == "auto":
            return RadialGrid.default(g.r_max, n)
        return RadialGrid(float(g.r_min), g.r_max, n)
    except ValueError as exc:
        raise ConfigError(f"grid.r_min/grid.r_max/grid.n: {exc}") from None


def _int_list(text, name) -> list[int]:
    try:
        vals = [int(s) for s in str(text).split(",") if s.strip()]
    except ValueError:
        raise ConfigError(f"{name}: expected comma-separated integers, got {text!r}") from None
    if not vals:
        raise ConfigError(f"{name}: empty list")
    return vals


def _float_list(text, name) -> list[float]:
    try:
        vals = [float(s) for s in str(text).split(",") if s.strip()]
    except ValueError:
        raise ConfigError(f"{name}: expected comma-separated numbers, got {text!r}") from None
    if not vals:
        raise ConfigError(f"{name}: empty list")
    return vals


def load_config(path: str) -> ExperimentConfig:
    parser = configparser.ConfigParser()
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"--config: cannot read {path}: {exc.strerror}") from None
    except configparser.Error as exc:
        raise ConfigError(f"--config: malformed file: {exc}") from None
    cfg = ExperimentConfig()
    known = {f.name for f in fields(cfg)}
    for section in parser.sections():
        if section not in known:
            raise ConfigError(f"[{section}]: unknown section; expected one of {sorted(known)}")
        target = getattr(cfg, section)
        types = {f.name: f.type for f in fields(target)}
        for key, raw in parser.items(section):
            if key not in types:
                raise ConfigError(f"{section}.{key}: unknown key; expected one of {sorted(types)}")
            kind = types[key]
            try:
                value = {"int": int, "float": float}.get(kind, str)(raw.strip())
            except ValueError:
                raise ConfigError(f"{section}.{key}: expected {kind}, got {raw!r}") from None
            setattr(target, key, value)
    _validate(cfg)
    return cfg


def _validate(cfg: ExperimentConfig):
    cfg.corner_params()
    cfg.grids()
    if not 1 <= cfg.eigen.count <= 6:
        raise ConfigError("eigen.count: must lie in 1..6")
    for key in ("solver_tol", "tol"):
        if not getattr(cfg.eigen, key) > 0:
            raise ConfigError(f"eigen.{key}: must be positive")
    cfg.eps_values()
    ev = cfg.evolve
    if ev.initial not in INITIAL_DATA:
        raise ConfigError(f"evolve.initial: expected one of {INITIAL_DATA}, got {ev.initial!r}")
    for key in ("ds", "s_end", "every", "tol"):
        if not getattr(ev, key) > 0:
            raise ConfigError(f"evolve.{key}: must be positive")
    if not 0 <= ev.s_burn < ev.s_end:
        raise ConfigError("evolve.s_burn: must lie in [0, s_end)")
    if ev.s_end - ev.s_burn < 3:
        raise ConfigError("evolve.s_end: fit window s_end - s_burn must be at least 3")
    per = round(ev.every / ev.ds)
    if per < 1 or abs(per * ev.ds - ev.every) > 1e-9 * ev.every:
        raise ConfigError("evolve.every: must be a multiple of evolve.ds")
    if abs(round(ev.s_end / ev.every) * ev.every - ev.s_end) > 1e-9 * ev.s_end:
        raise ConfigError("evolve.s_end: must be a multiple of evolve.every")
    if cfg.sweep.workers < 0:
        raise ConfigError("sweep.workers: must be >= 0")
    cfg.triples()


# --- output --------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return str(v)


def write_table(out, cfg: ExperimentConfig, command: str, columns, rows, extra=()):
    buf = io.StringIO()
    buf.write(f"# hardycorner {__version__} command={command}\n")
    buf.write(f"# seed = {cfg.evolve.seed}\n")
    for line in cfg.echo():
        buf.write(f"# {line}\n")
    for line in extra:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    out.write(buf.getvalue())


# --- commands ---------------------------------------------------------------------

def cmd_eigen(cfg: ExperimentConfig, out) -> int:
    p = cfg.corner_params()
    rows = []
    for g in cfg.grids():
        t0 = time.perf_counter()
        spec = lowest_eigenvalues(assemble(p, g, cfg.grid.scheme), max(cfg.eigen.count, 2), cfg.eigen.solver_tol)
        ms = 1e3 * (time.perf_counter() - t0)
        mu0 = float(spec.eigenvalues[0])
        rows.append((g.n, g.r_min, g.r_max, mu0, p.mu0, abs(mu0 - p.mu0),
                     float(spec.eigenvalues[1] - mu0), ms))
    write_table(out, cfg, "eigen", EIGEN_COLUMNS, rows)
    return 0 if all(row[5] <= cfg.eigen.tol for row in rows) else 1


def cmd_hardy(cfg: ExperimentConfig, out) -> int:
    p = cfg.corner_params()
    scan = sharpness_scan(p, cfg.eps_values())
    write_table(out, cfg, "hardy", HARDY_COLUMNS, scan.rows, [f"monotone = {int(scan.monotone)}"])
    ok = scan.monotone and all(r.gap_times_log_eps <= cfg.hardy.gap_log_bound for r in scan.rows)
    return 0 if ok else 1


def _run_evolution(p: CornerParams, cfg: ExperimentConfig):
    ev = cfg.evolve
    op = assemble(p, cfg.grids()[0], cfg.grid.scheme)
    v0 = make_initial(ev.initial, op, np.random.default_rng(ev.seed))
    trace = evolve(op, v0, ev.s_end, ev.ds, ev.every)
    return trace, decay_fit(trace, p, ev.s_burn)


def _exponent_ok(rep, tol, initial) -> bool:
    # orthogonal data decays at the next ladder level, so only the bound is checked
    return initial == "orthogonal" or rep.rel_err <= tol


def cmd_evolve(cfg: ExperimentConfig, out) -> int:
    p = cfg.corner_params()
    trace, rep = _run_evolution(p, cfg)
    ratio = bound_ratio(trace, p)
    rows = zip(trace.s_values, trace.t_values, trace.l2_norms, trace.u_norms, ratio,
               rep.profile_errors, rep.weighted_ratios)
    extra = [f"fitted_exponent = {rep.fitted_exponent:.17g}",
             f"expected_exponent = {rep.expected_exponent:.17g}",
             f"beta0 = {rep.beta:.17g}",
             f"u0_weighted_norm = {rep.u0_weighted_norm:.17g}",
             f"bound_holds = {int(rep.bound_holds)}"]
    write_table(out, cfg, "evolve", EVOLVE_COLUMNS, rows, extra)
    return 0 if rep.bound_holds and _exponent_ok(rep, cfg.evolve.tol, cfg.evolve.initial) else 1


def _sweep_task(args):
    p, cfg = args
    g = cfg.grids()[0]
    spec = lowest_eigenvalues(assemble(p, g, cfg.grid.scheme), 1, cfg.eigen.solver_tol)
    mu0 = float(spec.eigenvalues[0])
    _, rep = _run_evolution(p, cfg)
    return (p.dim, p.corner, p.lam, p.m, mu0, p.mu0, abs(mu0 - p.mu0), rep.fitted_exponent,
            rep.expected_exponent, rep.rel_err, rep.bound_holds)


def cmd_sweep(cfg: ExperimentConfig, out) -> int:
    triples = cfg.triples()
    workers = cfg.sweep.workers or min(len(triples), os.cpu_count() or 1)
    tasks = [(p, cfg) for p in triples]
    if workers == 1:
        rows = [_sweep_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_task, tasks))
    rows.sort(key=lambda r: (r[0], r[1], r[2]))
    write_table(out, cfg, "sweep", SWEEP_COLUMNS, rows)
    ok = all(r[6] <= cfg.eigen.tol and r[10] and _exponent_ok_row(r, cfg) for r in rows)
    return 0 if ok else 1


def _exponent_ok_row(row, cfg) -> bool:
    return cfg.evolve.initial == "orthogonal" or row[9] <= cfg.evolve.tol


COMMANDS = {"eigen": cmd_eigen, "hardy": cmd_hardy, "evolve": cmd_evolve, "sweep": cmd_sweep}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hardycorner", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="INI file")
        sp.add_argument("--out", default=None, help="CSV path (default: stdout)")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    buf = io.StringIO()
    try:
        status = COMMANDS[args.command](cfg, buf)
    except (ValueError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (EigenSolverError, np.linalg.LinAlgError, RuntimeError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    if status:
        print("tolerance exceeded", file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
