"""Explicit adaptive Heun integration of u_t = Lap(u) + |grad u|^p (+ forcing)
with Dirichlet boundary, blow-up-aware stopping and snapshot persistence.

The step size blends the diffusive limit min(h)^2/4 with an advective limit
h / (p |grad u|^(p-1)) so the gradient-stiff endgame stays stable:

    dt = cfl * min(h)^2/4 / (1 + p * grad_max^(p-1) * min(h)/4)

A run is a single logical writer advancing the state; independent runs share
nothing and may execute concurrently.
"""

from __future__ import annotations

import json
import os
from array import array
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import _kernels
from .errors import ConfigurationError, DtUnderflow, NumericError
from .grid import Grid2D, ScalarField, read_snapshot, write_snapshot

__all__ = [
    "SolverConfig",
    "SimulationState",
    "SnapshotRef",
    "RunOutcome",
    "make_state",
    "default_stop_grad_norm",
    "step",
    "run",
    "run_1d",
    "resume",
    "load_series",
    "write_series",
]

BLOW_UP = "blow_up_detected"
HORIZON = "horizon_reached"
UNDERFLOW = "dt_underflow"


@dataclass
class SolverConfig:
    p: float
    cfl_safety: float = 0.4
    dt_floor: float = 1e-13
    stop_grad_norm: Optional[float] = None  # None -> 50 / min(h)^beta
    t_max: float = 1.0
    snapshot_stride: int = 0  # steps between periodic snapshots; 0 disables
    forcing: Optional[Callable] = None  # forcing(X, Y, t) -> (ny, nx) array
    boundary: Optional[Callable] = None  # boundary(x, y, t) -> values (MMS)
    symmetry_mode: str = "full"

    def __post_init__(self):
        if not 0 < self.cfl_safety < 1:
            raise ConfigurationError("cfl_safety must be in (0, 1)")
        if not self.dt_floor > 0:
            raise ConfigurationError("dt_floor must be positive")
        if self.symmetry_mode not in ("full", "half"):
            raise ConfigurationError(f"unknown symmetry_mode {self.symmetry_mode!r}")
        if self.symmetry_mode == "half" and (self.forcing or self.boundary):
            raise ConfigurationError("half mode supports homogeneous Dirichlet only")


@dataclass
class SimulationState:
    field: ScalarField
    t: float
    step: int
    grad_max: float
    uy_origin: float
    dt_last: float


@dataclass
class SnapshotRef:
    step: int
    t: float
    path: Optional[str] = None
    field: Optional[ScalarField] = None

    def load(self) -> ScalarField:
        if self.field is not None:
            return self.field
        f, _ = read_snapshot(self.path)
        return f


@dataclass
class RunOutcome:
    reason: str
    t_stop: float
    series: dict  # arrays: t, grad_max, uy_origin, dt
    snapshots: list
    final: SimulationState


def default_stop_grad_norm(g: Grid2D, p: float) -> float:
    """Resolution-bound stop: beyond this the grid cannot represent the layer."""
    beta = 1.0 / (p - 1.0)
    return 50.0 / min(g.hx, g.hy) ** beta


def _uy_origin(u: np.ndarray, g: Grid2D) -> float:
    i = g.ix0
    return (-3.0 * u[0, i] + 4.0 * u[1, i] - u[2, i]) / (2.0 * g.hy)


def make_state(u0: ScalarField) -> SimulationState:
    g = u0.grid
    u = u0.values
    gmax = _kernels.grad_norm_max(u, g.hx, g.hy)
    return SimulationState(field=u0, t=0.0, step=0, grad_max=gmax,
                           uy_origin=_uy_origin(u, g), dt_last=0.0)


def _dt_for(state: SimulationState, cfg: SolverConfig, g: Grid2D) -> float:
    h = min(g.hx, g.hy)
    diff = cfg.cfl_safety * h * h / 4.0
    return diff / (1.0 + cfg.p * state.grad_max ** (cfg.p - 1.0) * h / 4.0)


def _apply_bc(u: np.ndarray, g: Grid2D, cfg: SolverConfig, t: float):
    if cfg.boundary is None:
        u[0, :] = 0.0
        u[-1, :] = 0.0
        u[:, 0] = 0.0
        u[:, -1] = 0.0
    else:
        x, y = g.x, g.y
        u[0, :] = cfg.boundary(x, 0.0 * x, t)
        u[-1, :] = cfg.boundary(x, 0.0 * x + g.Ly, t)
        u[:, 0] = cfg.boundary(0.0 * y - g.Lx, y, t)
        u[:, -1] = cfg.boundary(0.0 * y + g.Lx, y, t)


_SCRATCH: dict = {}  # per-process stage buffers, keyed by array shape


def _scratch(shape, n=3):
    bufs = _SCRATCH.get(shape)
    if bufs is None or len(bufs) < n:
        bufs = tuple(np.zeros(shape) for _ in range(n))
        _SCRATCH[shape] = bufs
    return bufs[:n]


def _heun_full(u, g, cfg, t, dt, XY, k1, k2, u1):
    ph = cfg.p / 2.0
    _kernels.rhs_interior(u, g.hx, g.hy, ph, k1)
    if cfg.forcing is not None:
        k1[1:-1, 1:-1] += cfg.forcing(XY[0], XY[1], t)[1:-1, 1:-1]
    np.multiply(k1, dt, out=u1)
    u1 += u
    _apply_bc(u1, g, cfg, t + dt)
    _kernels.rhs_interior(u1, g.hx, g.hy, ph, k2)
    if cfg.forcing is not None:
        k2[1:-1, 1:-1] += cfg.forcing(XY[0], XY[1], t + dt)[1:-1, 1:-1]
    np.add(k1, k2, out=k1)
    un = np.empty_like(u)
    np.multiply(k1, 0.5 * dt, out=un)
    un += u
    _apply_bc(un, g, cfg, t + dt)
    return un


def _heun_half(w, g, cfg, t, dt, k1, k2, w1):
    # w holds columns [ghost | x=0 .. x=Lx]; the ghost mirrors column x=hx.
    ph = cfg.p / 2.0
    w[:, 0] = w[:, 2]
    _kernels.rhs_interior(w, g.hx, g.hy, ph, k1)
    np.multiply(k1, dt, out=w1)
    w1 += w
    w1[0, :] = 0.0
    w1[-1, :] = 0.0
    w1[:, -1] = 0.0
    w1[:, 0] = w1[:, 2]
    _kernels.rhs_interior(w1, g.hx, g.hy, ph, k2)
    np.add(k1, k2, out=k1)
    wn = np.empty_like(w)
    np.multiply(k1, 0.5 * dt, out=wn)
    wn += w
    wn[0, :] = 0.0
    wn[-1, :] = 0.0
    wn[:, -1] = 0.0
    wn[:, 0] = wn[:, 2]
    return wn


def step(state: SimulationState, cfg: SolverConfig) -> SimulationState:
    """Advance one adaptive Heun step; raises DtUnderflow below the dt floor."""
    g = state.field.grid
    dt = _dt_for(state, cfg, g)
    if dt < cfg.dt_floor:
        raise DtUnderflow(f"dt={dt:.3e} under floor {cfg.dt_floor:.3e} "
                          f"at t={state.t:.6g}, step {state.step}")
    u = state.field.values
    if cfg.symmetry_mode == "half":
        i0 = g.ix0
        w = np.empty((g.ny, g.nx - i0 + 1))
        w[:, 1:] = u[:, i0:]
        wn = _heun_half(w, g, cfg, state.t, dt, *_scratch(w.shape))
        un = np.empty_like(u)
        un[:, i0:] = wn[:, 1:]
        un[:, :i0] = wn[:, 2:i0 + 2][:, ::-1]
    else:
        XY = g.meshgrid() if cfg.forcing is not None else None
        un = _heun_full(u, g, cfg, state.t, dt, XY, *_scratch(u.shape))
    gmax = _kernels.grad_norm_max(un, g.hx, g.hy)
    if not np.isfinite(gmax):
        bad = np.argwhere(~np.isfinite(un))
        where = f"node (i={bad[0][1]}, j={bad[0][0]})" if len(bad) else "gradient"
        raise NumericError(f"non-finite update at step {state.step + 1}: {where}")
    return SimulationState(field=ScalarField(g, un), t=state.t + dt,
                           step=state.step + 1, grad_max=gmax,
                           uy_origin=_uy_origin(un, g), dt_last=dt)


class _Series:
    cols = ("t", "grad_max", "uy_origin", "dt")

    def __init__(self):
        self.data = {c: array("d") for c in self.cols}

    def append(self, t, gmax, uy0, dt):
        self.data["t"].append(t)
        self.data["grad_max"].append(gmax)
        self.data["uy_origin"].append(uy0)
        self.data["dt"].append(dt)

    def as_dict(self):
        return {c: np.asarray(self.data[c]) for c in self.cols}


def write_series(series: dict, path):
    with open(path, "w") as fh:
        fh.write("t,grad_max,uy_origin,dt\n")
        for row in zip(series["t"], series["grad_max"],
                       series["uy_origin"], series["dt"]):
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def load_series(path) -> dict:
    raw = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return {c: raw[:, i] for i, c in enumerate(_Series.cols)}


class _SnapshotWriter:
    """Periodic snapshots plus a geometric cascade as grad_max doubles."""

    def __init__(self, run_dir, stride, grad0):
        self.run_dir = run_dir
        self.stride = stride
        self.next_thresh = 2.0 * max(grad0, 1e-30)
        self.refs = []
        if run_dir is not None:
            os.makedirs(os.path.join(run_dir, "snapshots"), exist_ok=True)

    def maybe(self, state: SimulationState, force=False):
        due = force
        if self.stride and state.step % self.stride == 0:
            due = True
        while state.grad_max >= self.next_thresh:
            self.next_thresh *= 2.0
            due = True
        if not due:
            return
        if self.refs and self.refs[-1].step == state.step:
            return
        if self.run_dir is None:
            ref = SnapshotRef(state.step, state.t, field=state.field.copy())
        else:
            path = os.path.join(self.run_dir, "snapshots",
                                f"{len(self.refs):04d}.bin")
            write_snapshot(state.field, path, state.t)
            ref = SnapshotRef(state.step, state.t, path=path)
        self.refs.append(ref)


def run(u0: ScalarField, cfg: SolverConfig, run_dir=None, config_echo=None,
        _initial=None, _series=None, _snapwriter=None) -> RunOutcome:
    """Iterate step() until blow-up, horizon, or dt underflow.

    With run_dir set, persists series.csv, snapshots/NNNN.bin and meta.json.
    """
    g = u0.grid
    if cfg.stop_grad_norm is None:
        cfg = SolverConfig(**{**cfg.__dict__,
                              "stop_grad_norm": default_stop_grad_norm(g, cfg.p)})
    state = _initial if _initial is not None else make_state(u0.copy())
    series = _series if _series is not None else _Series()
    snaps = _snapwriter if _snapwriter is not None else \
        _SnapshotWriter(run_dir, cfg.snapshot_stride, state.grad_max)
    if _initial is None:
        series.append(state.t, state.grad_max, state.uy_origin, 0.0)
        snaps.maybe(state, force=True)

    reason = HORIZON
    while True:
        if state.grad_max >= cfg.stop_grad_norm:
            reason = BLOW_UP
            break
        if state.t >= cfg.t_max:
            reason = HORIZON
            break
        try:
            state = step(state, cfg)
        except DtUnderflow:
            reason = UNDERFLOW
            break
        series.append(state.t, state.grad_max, state.uy_origin, state.dt_last)
        snaps.maybe(state)

    snaps.maybe(state, force=True)
    outcome = RunOutcome(reason=reason, t_stop=state.t,
                         series=series.as_dict(), snapshots=snaps.refs,
                         final=state)
    if run_dir is not None:
        _persist(outcome, cfg, g, run_dir, config_echo)
    return outcome


def _persist(outcome: RunOutcome, cfg: SolverConfig, g: Grid2D, run_dir,
             config_echo):
    os.makedirs(run_dir, exist_ok=True)
    write_series(outcome.series, os.path.join(run_dir, "series.csv"))
    meta = {
        "config": config_echo,
        "grid": {"Lx": g.Lx, "Ly": g.Ly, "nx": g.nx, "ny": g.ny},
        "solver": {k: v for k, v in cfg.__dict__.items()
                   if k not in ("forcing", "boundary")},
        "outcome": {
            "reason": outcome.reason,
            "t_stop": outcome.t_stop,
            "steps": outcome.final.step,
            "grad_max_final": outcome.final.grad_max,
            "uy_origin_final": outcome.final.uy_origin,
            "snapshots": [{"step": r.step, "t": r.t,
                           "path": os.path.relpath(r.path, run_dir)}
                          for r in outcome.snapshots],
        },
    }
    with open(os.path.join(run_dir, "meta.json"), "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def resume(run_dir, cfg: SolverConfig) -> RunOutcome:
    """Restart a persisted run from its last snapshot, deterministically."""
    with open(os.path.join(run_dir, "meta.json")) as fh:
        meta = json.load(fh)
    snaps_meta = meta["outcome"]["snapshots"]
    if not snaps_meta:
        raise ConfigurationError(f"{run_dir}: no snapshots to resume from")
    refs = [SnapshotRef(s["step"], s["t"],
                        path=os.path.join(run_dir, s["path"]))
            for s in snaps_meta]
    last = refs[-1]
    fld, t_snap = read_snapshot(last.path)
    g = fld.grid
    st = make_state(fld)
    st.t, st.step = t_snap, last.step

    old = load_series(os.path.join(run_dir, "series.csv"))
    # series rows are one per step starting at step 0
    keep = np.arange(len(old["t"])) <= last.step
    series = _Series()
    for i in np.nonzero(keep)[0]:
        series.append(old["t"][i], old["grad_max"][i],
                      old["uy_origin"][i], old["dt"][i])

    if cfg.stop_grad_norm is None:
        cfg = SolverConfig(**{**cfg.__dict__,
                              "stop_grad_norm": default_stop_grad_norm(g, cfg.p)})
    snaps = _SnapshotWriter(run_dir, cfg.snapshot_stride, st.grad_max)
    snaps.refs = refs[:]
    snaps.next_thresh = 2.0 * st.grad_max
    return run(fld, cfg, run_dir=run_dir, config_echo=meta.get("config"),
               _initial=st, _series=series, _snapwriter=snaps)


# --------------------------------------------------------------------------
# 1D reduction: u_t = u_yy + |u_y|^p on (0, Ly)
# --------------------------------------------------------------------------


@dataclass
class RunOutcome1D:
    reason: str
    t_stop: float
    series: dict
    snapshots: list  # (t, values) pairs
    final: np.ndarray


def run_1d(u0: np.ndarray, Ly: float, cfg: SolverConfig,
           forcing: Optional[Callable] = None) -> RunOutcome1D:
    """Same scheme on the 1D reduction; endpoints held at their initial values.

    Used for the time-rate study on monotone 1D blow-up and for steady-state
    residual tests (the top boundary keeps its initial Dirichlet value).
    """
    u = np.asarray(u0, dtype=float).copy()
    n = u.shape[0]
    hy = Ly / (n - 1)
    ph = cfg.p / 2.0
    lo, hi = u[0], u[-1]
    stop = cfg.stop_grad_norm
    if stop is None:
        stop = 50.0 / hy ** (1.0 / (cfg.p - 1.0))
    y = np.linspace(0.0, Ly, n)

    series = _Series()
    gmax = _kernels.grad_max_1d(u, hy)
    uy0 = (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * hy)
    series.append(0.0, gmax, uy0, 0.0)
    snapshots = [(0.0, u.copy())]
    next_thresh = 2.0 * max(gmax, 1e-30)

    t = 0.0
    nstep = 0
    k1 = np.zeros_like(u)
    k2 = np.zeros_like(u)
    reason = HORIZON
    while True:
        if gmax >= stop:
            reason = BLOW_UP
            break
        if t >= cfg.t_max:
            reason = HORIZON
            break
        dt = cfg.cfl_safety * hy * hy / 4.0 \
            / (1.0 + cfg.p * gmax ** (cfg.p - 1.0) * hy / 4.0)
        if dt < cfg.dt_floor:
            reason = UNDERFLOW
            break
        _kernels.rhs_interior_1d(u, hy, ph, k1)
        if forcing is not None:
            k1[1:-1] += forcing(y, t)[1:-1]
        u1 = u + dt * k1
        u1[0], u1[-1] = lo, hi
        _kernels.rhs_interior_1d(u1, hy, ph, k2)
        if forcing is not None:
            k2[1:-1] += forcing(y, t + dt)[1:-1]
        u = u + (0.5 * dt) * (k1 + k2)
        u[0], u[-1] = lo, hi
        t += dt
        nstep += 1
        gmax = _kernels.grad_max_1d(u, hy)
        if not np.isfinite(gmax):
            raise NumericError(f"non-finite 1D update at step {nstep}")
        uy0 = (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * hy)
        series.append(t, gmax, uy0, dt)
        if gmax >= next_thresh:
            while gmax >= next_thresh:
                next_thresh *= 2.0
            snapshots.append((t, u.copy()))

    snapshots.append((t, u.copy()))
    return RunOutcome1D(reason=reason, t_stop=t, series=series.as_dict(),
                        snapshots=snapshots, final=u)
