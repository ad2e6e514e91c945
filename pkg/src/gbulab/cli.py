"""Command-line front end: config parsing, run-directory lifecycle, preset
registry and post-hoc fit/diagnostic emission.

Subcommands: run, mms, check, barrier, fit, sweep.  Exit codes: 0 success,
2 invalid config, 3 numeric failure, 4 convergence failure, 5 corrupt
snapshot.  All outputs are deterministic data files (CSV/JSON); plotting is
left to external tools.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict, dataclass, field

import numpy as np
import yaml

from . import diagnostics as diag
from . import initial_data, profile_fit, solver
from .errors import (ConfigurationError, DtUnderflow, FitError, GbulabError,
                     NumericError)
from .grid import Grid2D, ScalarField, read_snapshot
from .profile_math import (calibrate_barrier_c0, manufactured_params,
                           manufactured_solution, profile_constants)

__all__ = ["RunConfig", "load_config", "preset_path", "main",
           "cmd_run", "cmd_mms", "cmd_check", "cmd_barrier", "cmd_fit",
           "cmd_sweep"]

_PRESET_DIR = os.path.join(os.path.dirname(__file__), "presets")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_CONVERGENCE = 4
EXIT_SNAPSHOT = 5


# --------------------------------------------------------------------------
# Configuration
# --------------------------------------------------------------------------


@dataclass
class RunConfig:
    p: float
    domain: dict = field(default_factory=lambda: {"Lx": 0.25, "Ly": 0.25})
    grid: dict = field(default_factory=lambda: {"nx": 129, "ny": 129})
    initial_data: dict = field(default_factory=dict)
    solver: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)
    fits: dict = field(default_factory=dict)

    _FAMILIES = ("bump", "cap", "sine_1d")
    _SOLVER_KEYS = ("cfl_safety", "dt_floor", "stop_grad_norm", "t_max",
                    "snapshot_stride", "symmetry_mode")
    _DIAG_KEYS = ("probe_box", "q", "threshold")
    _FIT_KEYS = ("level_frac", "extent")

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        if not isinstance(d, dict):
            raise ConfigurationError("config root must be a mapping")
        known = ("p", "domain", "grid", "initial_data", "solver",
                 "diagnostics", "fits")
        for key in d:
            if key not in known:
                raise ConfigurationError(f"unknown config field: {key}")
        if "p" not in d:
            raise ConfigurationError("missing config field: p")
        cfg = cls(p=float(d["p"]))
        cfg.domain.update(_subdict(d, "domain", ("Lx", "Ly")))
        cfg.grid.update(_subdict(d, "grid", ("nx", "ny")))
        cfg.initial_data = _subdict(
            d, "initial_data",
            ("family", "C_amp", "epsilon", "amplitude", "width"))
        cfg.solver = _subdict(d, "solver", cls._SOLVER_KEYS)
        cfg.diagnostics = _subdict(d, "diagnostics", cls._DIAG_KEYS)
        cfg.fits = _subdict(d, "fits", cls._FIT_KEYS)
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        return asdict(self)

    def validate(self):
        if not self.p > 2:
            raise ConfigurationError(f"p: must be > 2, got {self.p}")
        fam = self.initial_data.get("family")
        if fam not in self._FAMILIES:
            raise ConfigurationError(
                f"initial_data.family: must be one of {self._FAMILIES}, "
                f"got {fam!r}")
        mode = self.solver.get("symmetry_mode", "full")
        if mode not in ("full", "half"):
            raise ConfigurationError(
                f"solver.symmetry_mode: must be full or half, got {mode!r}")
        # constructing these validates ranges and raises with context
        self.make_grid()
        self.make_solver_config()

    def make_grid(self) -> Grid2D:
        try:
            return Grid2D(Lx=float(self.domain["Lx"]),
                          Ly=float(self.domain["Ly"]),
                          nx=int(self.grid["nx"]), ny=int(self.grid["ny"]))
        except KeyError as exc:
            raise ConfigurationError(f"missing grid/domain field: {exc}")

    def make_solver_config(self) -> solver.SolverConfig:
        kw = {k: v for k, v in self.solver.items() if v is not None}
        return solver.SolverConfig(p=self.p, **kw)

    def make_initial(self, g: Grid2D):
        d = self.initial_data
        fam = d["family"]
        if fam == "bump":
            bp = initial_data.BumpParams(C_amp=float(d["C_amp"]),
                                         epsilon=float(d["epsilon"]), p=self.p)
            return initial_data.concentrated_bump(bp, g)
        if fam == "cap":
            return initial_data.symmetric_cap(float(d["amplitude"]),
                                              float(d["width"]), g)
        # sine_1d handled by the 1D path
        amp = float(d["amplitude"])
        return amp * np.sin(np.pi * g.y / g.Ly)

    @property
    def is_1d(self) -> bool:
        return self.initial_data.get("family") == "sine_1d"


def _subdict(d, key, allowed):
    sub = d.get(key, {})
    if sub is None:
        sub = {}
    if not isinstance(sub, dict):
        raise ConfigurationError(f"{key}: must be a mapping")
    for k in sub:
        if k not in allowed:
            raise ConfigurationError(f"unknown config field: {key}.{k}")
    return dict(sub)


def load_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}")
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"cannot parse config {path}: {exc}")
    return RunConfig.from_dict(raw)


def preset_path(name: str) -> str:
    """Resolve a preset name (or passthrough an existing file path)."""
    if os.path.exists(name):
        return name
    cand = os.path.join(_PRESET_DIR, name + ".yaml")
    if os.path.exists(cand):
        return cand
    avail = sorted(f[:-5] for f in os.listdir(_PRESET_DIR)
                   if f.endswith(".yaml"))
    raise ConfigurationError(f"no such config or preset {name!r}; "
                             f"presets: {', '.join(avail)}")


# --------------------------------------------------------------------------
# Fits and diagnostics over a run directory
# --------------------------------------------------------------------------


def _load_run(run_dir):
    meta_path = os.path.join(run_dir, "meta.json")
    try:
        with open(meta_path) as fh:
            meta = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigurationError(f"cannot read {meta_path}: {exc}")
    snaps = []
    for ref in meta["outcome"]["snapshots"]:
        f, t = read_snapshot(os.path.join(run_dir, ref["path"]))
        snaps.append((t, f))
    return meta, snaps


def compute_fits(meta, snaps, cfg: RunConfig, series=None) -> dict:
    """All profile fits on the final snapshot (+ time-rate fit on the series).

    Individual fit failures are recorded as error strings, keeping the output
    deterministic for replay comparison.
    """
    pc = profile_constants(cfg.p)
    extent = float(cfg.fits.get("extent", 0.1))
    level_frac = float(cfg.fits.get("level_frac", 0.5))
    _, last = snaps[-1]
    out = {"p": cfg.p, "reason": meta["outcome"]["reason"]}

    def attempt(name, fn):
        try:
            out[name] = fn()
        except (FitError, ConfigurationError) as exc:
            out[name] = {"error": str(exc)}

    attempt("normal", lambda: profile_fit.fit_normal(last, pc))
    attempt("tangential", lambda: profile_fit.fit_tangential(last, pc, hi=extent))
    attempt("aniso", lambda: profile_fit.fit_aniso(last, pc, extent=extent))

    def levelset():
        g = last.grid
        uy = profile_fit.normal_derivative_field(last)
        X, Y = g.meshgrid()
        sel = (np.abs(X) <= extent) & (Y >= 3 * g.hy) & (Y <= extent)
        level = level_frac * float(np.max(uy[sel]))
        fitv = profile_fit.level_set_shape(last, pc, level, extent=extent)
        return {"level": level, "fit": fitv}

    attempt("level_set", levelset)

    if series is not None:
        def timerate():
            fitv, T_hat = profile_fit.fit_time_rate(series, pc)
            _, _, r2, _ = profile_fit.time_rate_linear(series, pc)
            return {"fit": fitv, "T_hat": T_hat, "linear_r_squared": r2}
        attempt("time_rate", timerate)
    return out


def _emit_profile_csvs(snaps, cfg: RunConfig, run_dir):
    pc = profile_constants(cfg.p)
    _, last = snaps[-1]
    g = last.grid
    uy = profile_fit.normal_derivative_field(last)
    with open(os.path.join(run_dir, "profile_normal.csv"), "w") as fh:
        fh.write("y,uy\n")
        for yv, vv in zip(g.y, uy[:, g.ix0]):
            fh.write(f"{float(yv)!r},{float(vv)!r}\n")
    with open(os.path.join(run_dir, "profile_tangential.csv"), "w") as fh:
        fh.write("x,uy\n")
        for xv, vv in zip(g.x[g.ix0:], uy[0, g.ix0:]):
            fh.write(f"{float(xv)!r},{float(vv)!r}\n")
    fits_path = os.path.join(run_dir, "fits.json")
    if os.path.exists(fits_path):
        with open(fits_path) as fh:
            fits = json.load(fh)
        lvl = fits.get("level_set", {})
        if isinstance(lvl, dict) and "level" in lvl:
            try:
                xs, ys = profile_fit.level_set_curve(
                    last, lvl["level"], extent=float(cfg.fits.get("extent", 0.1)))
            except FitError:
                return
            with open(os.path.join(run_dir, "profile_levelset.csv"), "w") as fh:
                fh.write("x,y\n")
                for xv, yv in zip(xs, ys):
                    fh.write(f"{float(xv)!r},{float(yv)!r}\n")


def _run_diagnostics(meta, snaps, cfg: RunConfig, run_dir, fits):
    pc = profile_constants(cfg.p)
    q = cfg.diagnostics.get("q")
    box = cfg.diagnostics.get("probe_box")
    box = tuple(box) if box else None
    T_hat = None
    tr = fits.get("time_rate")
    if isinstance(tr, dict) and "T_hat" in tr:
        T_hat = tr["T_hat"]
    report = diag.build_report(snaps, pc, q=q, box=box, T_hat=T_hat)
    diag.write_report(report, run_dir)
    return report


# --------------------------------------------------------------------------
# Subcommands
# --------------------------------------------------------------------------


def cmd_run(config_path, out_dir) -> int:
    cfg = load_config(preset_path(config_path))  # validates before any mkdir
    if cfg.is_1d:
        return _run_1d(cfg, out_dir)
    g = cfg.make_grid()
    u0 = cfg.make_initial(g)
    scfg = cfg.make_solver_config()
    os.makedirs(out_dir, exist_ok=True)
    try:
        outcome = solver.run(u0, scfg, run_dir=out_dir,
                             config_echo=cfg.to_dict())
    except NumericError as exc:
        dump = os.path.join(out_dir, "crash.json")
        with open(dump, "w") as fh:
            json.dump({"error": str(exc)}, fh, indent=2)
        print(f"numeric failure: {exc}\nstate dump: {dump}", file=sys.stderr)
        return EXIT_NUMERIC
    meta, snaps = _load_run(out_dir)
    fits = compute_fits(meta, snaps, cfg)
    with open(os.path.join(out_dir, "fits.json"), "w") as fh:
        fh.write(profile_fit.fits_to_json(fits))
    _emit_profile_csvs(snaps, cfg, out_dir)
    _run_diagnostics(meta, snaps, cfg, out_dir, fits)
    print(f"{out_dir}: {outcome.reason} at t={outcome.t_stop:.6g} "
          f"({outcome.final.step} steps, grad_max={outcome.final.grad_max:.4g})")
    return EXIT_OK


def _run_1d(cfg: RunConfig, out_dir) -> int:
    g = cfg.make_grid()
    u0 = cfg.make_initial(g)
    scfg = cfg.make_solver_config()
    os.makedirs(out_dir, exist_ok=True)
    try:
        outcome = solver.run_1d(u0, g.Ly, scfg)
    except NumericError as exc:
        dump = os.path.join(out_dir, "crash.json")
        with open(dump, "w") as fh:
            json.dump({"error": str(exc)}, fh, indent=2)
        print(f"numeric failure: {exc}\nstate dump: {dump}", file=sys.stderr)
        return EXIT_NUMERIC
    solver.write_series(outcome.series, os.path.join(out_dir, "series.csv"))
    meta = {"config": cfg.to_dict(),
            "grid": {"Ly": g.Ly, "ny": g.ny},
            "outcome": {"reason": outcome.reason, "t_stop": outcome.t_stop,
                        "snapshots": []}}
    with open(os.path.join(out_dir, "meta.json"), "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    pc = profile_constants(cfg.p)
    fits = {"p": cfg.p, "reason": outcome.reason}
    try:
        fitv, T_hat = profile_fit.fit_time_rate(outcome.series, pc)
        _, _, r2, _ = profile_fit.time_rate_linear(outcome.series, pc)
        fits["time_rate"] = {"fit": fitv, "T_hat": T_hat,
                             "linear_r_squared": r2}
    except FitError as exc:
        fits["time_rate"] = {"error": str(exc)}
    with open(os.path.join(out_dir, "fits.json"), "w") as fh:
        fh.write(profile_fit.fits_to_json(fits))
    print(f"{out_dir}: {outcome.reason} at t={outcome.t_stop:.6g}")
    return EXIT_OK


def cmd_mms(config_path) -> int:
    with open(preset_path(config_path)) as fh:
        raw = yaml.safe_load(fh)
    for key in raw:
        if key not in ("p", "alpha", "T", "t_end", "Lx", "Ly", "grids",
                       "cfl_safety"):
            raise ConfigurationError(f"unknown config field: {key}")
    p = float(raw["p"])
    pc = profile_constants(p)
    mp = manufactured_params(pc, float(raw["alpha"]), float(raw["T"]))
    t_end = float(raw["t_end"])
    if not t_end < mp.T:
        raise ConfigurationError(f"t_end: must precede T={mp.T}, got {t_end}")
    Lx = float(raw.get("Lx", 0.5))
    Ly = float(raw.get("Ly", 0.5))
    grids = [int(n) for n in raw.get("grids", [33, 65, 129])]
    cfl = float(raw.get("cfl_safety", 0.4))

    def exact(x, y, t):
        return manufactured_solution(mp, pc, x, y, t)[0]

    def forcing(X, Y, t):
        return manufactured_solution(mp, pc, X, Y, t)[5]

    errors = []
    for n in grids:
        g = Grid2D(Lx=Lx, Ly=Ly, nx=n, ny=n)
        X, Y = g.meshgrid()
        u0 = ScalarField(g, exact(X, Y, 0.0))
        scfg = solver.SolverConfig(p=p, cfl_safety=cfl, t_max=t_end,
                                   stop_grad_norm=1e30, forcing=forcing,
                                   boundary=exact)
        outcome = solver.run(u0, scfg)
        uex = exact(X, Y, outcome.t_stop)
        err = float(np.max(np.abs(outcome.final.field.values - uex)))
        errors.append(err)
        print(f"n={n:4d}  h={2 * Lx / (n - 1):.5f}  max_err={err:.6e}")
    orders = [float(np.log2(errors[i] / errors[i + 1]))
              for i in range(len(errors) - 1)]
    for (na, nb), o in zip(zip(grids, grids[1:]), orders):
        print(f"order({na}->{nb}) = {o:.3f}")
    if orders and orders[-1] < 1.5:
        print("convergence failure: finest-pair order < 1.5", file=sys.stderr)
        return EXIT_CONVERGENCE
    return EXIT_OK


def cmd_fit(run_dir) -> int:
    meta, snaps = _load_run(run_dir)
    cfg = RunConfig.from_dict(meta["config"])
    series = solver.load_series(os.path.join(run_dir, "series.csv"))
    fits = compute_fits(meta, snaps, cfg, series=None)
    with open(os.path.join(run_dir, "fits.json"), "w") as fh:
        fh.write(profile_fit.fits_to_json(fits))
    _emit_profile_csvs(snaps, cfg, run_dir)
    _run_diagnostics(meta, snaps, cfg, run_dir, fits)
    print(f"{run_dir}: fits and report rewritten "
          f"(series: {len(series['t'])} rows)")
    return EXIT_OK


def cmd_check(run_dir) -> int:
    try:
        meta, snaps = _load_run(run_dir)
    except ConfigurationError as exc:
        print(f"corrupt run directory: {exc}", file=sys.stderr)
        return EXIT_SNAPSHOT
    cfg = RunConfig.from_dict(meta["config"])
    fits = compute_fits(meta, snaps, cfg)
    blob = profile_fit.fits_to_json(fits).encode()
    fits_path = os.path.join(run_dir, "fits.json")
    if os.path.exists(fits_path):
        with open(fits_path, "rb") as fh:
            stored = fh.read()
        if stored != blob:
            print("check failed: recomputed fits.json differs from stored",
                  file=sys.stderr)
            return 1
        print(f"{run_dir}: fits.json replayed byte-identically "
              f"({len(snaps)} snapshots intact)")
    else:
        with open(fits_path, "wb") as fh:
            fh.write(blob)
        print(f"{run_dir}: fits.json regenerated ({len(snaps)} snapshots)")
    return EXIT_OK


def cmd_barrier(args) -> int:
    pc = profile_constants(args.p)
    report = {"p": args.p, "etas": []}
    first_fail = None
    for eta in args.eta:
        try:
            C0, bp, rmin = calibrate_barrier_c0(
                pc, args.x0, args.r, args.d, args.t0, args.T, eta,
                lattice=tuple(args.lattice))
            report["etas"].append({"eta": eta, "C0": C0, "kappa": bp.kappa,
                                   "min_residual": rmin})
            print(f"eta={eta:g}: C0={C0:g} kappa={bp.kappa:.6g} "
                  f"min_residual={rmin:.6e}")
        except GbulabError as exc:
            report["etas"].append({"eta": eta, "error": str(exc)})
            if first_fail is None:
                first_fail = eta
            print(f"eta={eta:g}: FAILED ({exc})")
    if first_fail is not None:
        print(f"first failing eta: {first_fail:g}")
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return EXIT_OK


def cmd_sweep(configs, out_root) -> int:
    os.makedirs(out_root, exist_ok=True)
    worst = EXIT_OK
    for cfg_path in configs:
        stem = os.path.splitext(os.path.basename(preset_path(cfg_path)))[0]
        rc = cmd_run(cfg_path, os.path.join(out_root, stem))
        worst = max(worst, rc)
    return worst


# --------------------------------------------------------------------------
# Entry point
# --------------------------------------------------------------------------


def _build_parser():
    ap = argparse.ArgumentParser(
        prog="gbulab",
        description="boundary gradient blow-up laboratory for "
                    "u_t - Lap u = |grad u|^p")
    sub = ap.add_subparsers(dest="cmd", required=True)

    sp = sub.add_parser("run", help="execute a run config or preset")
    sp.add_argument("config")
    sp.add_argument("-o", "--out", required=True, help="run directory")

    sp = sub.add_parser("mms", help="manufactured-solution convergence study")
    sp.add_argument("config")

    sp = sub.add_parser("check", help="replay diagnostics on a run directory")
    sp.add_argument("run_dir")

    sp = sub.add_parser("fit", help="re-fit an existing run directory")
    sp.add_argument("run_dir")

    sp = sub.add_parser("barrier", help="sample the closed-form barrier residual")
    sp.add_argument("--p", type=float, default=3.0)
    sp.add_argument("--x0", type=float, default=0.1)
    sp.add_argument("--r", type=float, default=0.05)
    sp.add_argument("--d", type=float, default=0.02)
    sp.add_argument("--t0", type=float, default=0.0)
    sp.add_argument("--T", type=float, default=0.5)
    sp.add_argument("--eta", type=float, action="append", default=None,
                    help="repeatable; forms a ladder")
    sp.add_argument("--lattice", type=int, nargs=3, default=[20, 20, 10],
                    metavar=("NX", "NY", "NT"))
    sp.add_argument("--out", default=None, help="write JSON report here")

    sp = sub.add_parser("sweep", help="run several configs into one root")
    sp.add_argument("configs", nargs="+")
    sp.add_argument("-o", "--out", required=True, help="sweep root directory")
    return ap


def main(argv=None) -> int:
    threads = os.environ.get("GBULAB_THREADS")
    if threads:
        os.environ.setdefault("NUMBA_NUM_THREADS", threads)
    args = _build_parser().parse_args(argv)
    try:
        if args.cmd == "run":
            return cmd_run(args.config, args.out)
        if args.cmd == "mms":
            return cmd_mms(args.config)
        if args.cmd == "check":
            return cmd_check(args.run_dir)
        if args.cmd == "fit":
            return cmd_fit(args.run_dir)
        if args.cmd == "barrier":
            if args.eta is None:
                args.eta = [0.01]
            return cmd_barrier(args)
        if args.cmd == "sweep":
            return cmd_sweep(args.configs, args.out)
        raise AssertionError(args.cmd)
    except ConfigurationError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericError, DtUnderflow) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
