"""Runtime monitors for the maximum-principle bounds, the Bernstein gradient
bound, the J-function sign, the xi/Theta normalized profiles and the
quasi-stationary modulation height h(t, x).

All monitors are pure functions of persisted snapshots, so re-running them
offline is bit-reproducible.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, FitError
from .grid import ScalarField, gradient
from .profile_fit import PowerLawFit, powerlaw_fit
from .profile_math import JParams, ProfileConstants, j_model

__all__ = [
    "MonitorEnvelope",
    "DiagnosticReport",
    "monitor_bounds",
    "bernstein_monitor",
    "j_monitor",
    "j_k_ladder",
    "xi_theta_fields",
    "xi_theta_ranges",
    "boundary_normal_series",
    "modulation_h",
    "default_probe_box",
    "build_report",
    "write_report",
]


@dataclass(frozen=True)
class MonitorEnvelope:
    name: str
    worst_value: float
    worst_location: tuple  # (x, y, t)
    envelope_constant: float


@dataclass
class DiagnosticReport:
    envelopes: list
    j_max: list  # (t, max J) per snapshot
    j_k: float  # largest passing ladder k (0 if none)
    xi_range: tuple
    theta_range: tuple
    h_boundary: dict  # t, x, h table


def default_probe_box(g) -> tuple:
    """(x1, y1) of the probe box (0, x1] x (0, y1]."""
    return (min(0.1, g.Lx / 4.0), min(0.1, g.Ly / 4.0))


def _omega_prime(g):
    """Node mask of the half-size rectangle |x| <= Lx/2, y <= Ly/2."""
    X, Y = g.meshgrid()
    return (np.abs(X) <= g.Lx / 2.0) & (Y <= g.Ly / 2.0), X, Y


def _env(name, values, X, Y, t, lower=0.0):
    i = int(np.argmax(values))
    worst = float(values.flat[i] if hasattr(values, "flat") else values[i])
    loc = (float(X.flat[i]), float(Y.flat[i]), float(t))
    return MonitorEnvelope(name=name, worst_value=worst, worst_location=loc,
                           envelope_constant=max(worst, lower))


def monitor_bounds(snapshot: ScalarField, t: float, prev: ScalarField = None,
                   prev_t: float = None):
    """Envelope constants over the half-size box for the one-sided bounds
    |u_t| <= C, u_y >= -C, u_xx >= -C, |u_x| <= C|x|, and sup u.

    u_t uses a backward difference between consecutive snapshots; with a
    single snapshot that monitor is skipped.
    """
    g = snapshot.grid
    u = snapshot.values
    mask, X, Y = _omega_prime(g)
    fx, fy = gradient(snapshot)
    out = []

    if prev is not None:
        dt = t - prev_t
        if not dt > 0:
            raise DomainError("monitor_bounds: snapshots must advance in time")
        ut = np.abs(u - prev.values) / dt
        out.append(_env("ut_bound", ut[mask], X[mask], Y[mask], t))

    out.append(_env("uy_lower", -fy.values[mask], X[mask], Y[mask], t))

    uxx = np.zeros_like(u)
    uxx[:, 1:-1] = (u[:, 2:] - 2.0 * u[:, 1:-1] + u[:, :-2]) / g.hx**2
    inner = mask.copy()
    inner[:, 0] = inner[:, -1] = False
    out.append(_env("uxx_lower", -uxx[inner], X[inner], Y[inner], t))

    offaxis = mask & (np.abs(X) > g.hx / 2.0)
    ratio = np.abs(fx.values[offaxis]) / np.abs(X[offaxis])
    out.append(_env("ux_linear", ratio, X[offaxis], Y[offaxis], t))

    out.append(_env("max_principle_sup", u[mask], X[mask], Y[mask], t))
    return out


def bernstein_monitor(snapshot: ScalarField, t: float,
                      pc: ProfileConstants) -> MonitorEnvelope:
    """sup over interior nodes of |grad u| * dist^beta with dist the distance
    to the boundary of the rectangle."""
    g = snapshot.grid
    fx, fy = gradient(snapshot)
    X, Y = g.meshgrid()
    dist = np.minimum(np.minimum(g.Lx - np.abs(X), Y), g.Ly - Y)
    interior = dist > 0
    vals = np.sqrt(fx.values**2 + fy.values**2)[interior] \
        * dist[interior] ** pc.beta
    return _env("bernstein", vals, X[interior], Y[interior], t)


def j_monitor(snapshot: ScalarField, jp: JParams, pc: ProfileConstants,
              box=None) -> float:
    """Maximum of J = u_x + k x y^-gamma (1+y) u^q over probe-box nodes.

    Nodes at y = 0 are excluded (the weight is singular there).
    """
    g = snapshot.grid
    if box is None:
        box = default_probe_box(g)
    x1, y1 = box
    X, Y = g.meshgrid()
    mask = (X > 0) & (X <= x1) & (Y > 0) & (Y <= y1)
    if not np.any(mask):
        raise DomainError(f"probe box (0, {x1}] x (0, {y1}] contains no nodes")
    fx, _ = gradient(snapshot)
    u = np.clip(snapshot.values[mask], 0.0, None)
    return float(np.max(j_model(jp, pc, u, fx.values[mask], X[mask], Y[mask])))


def j_k_ladder(snapshots, pc: ProfileConstants, q: float = None, box=None,
               ladder=None):
    """Largest power-of-two k in (0, 1) with max J <= 0 on every snapshot.

    Returns (k, table) with k = 0.0 if no rung passes; table maps each tried
    k to its worst max-J over the window.
    """
    from .profile_math import j_params

    if ladder is None:
        ladder = [2.0**-n for n in range(1, 21)]
    table = {}
    best = 0.0
    for k in sorted(ladder, reverse=True):
        jp = j_params(pc, k, q)
        worst = max(j_monitor(s, jp, pc, box) for s in snapshots)
        table[k] = worst
        if worst <= 0.0:
            best = k
            break
    return best, table


def xi_theta_fields(snapshot: ScalarField, pc: ProfileConstants,
                    threshold: float = 1e-8):
    """Node-wise xi = y u_y / u and Theta = y (u_y)^(p-1).

    Defined on {y > 0, u > threshold}; NaN marks absent nodes.
    """
    g = snapshot.grid
    _, fy = gradient(snapshot)
    _, Y = g.meshgrid()
    u = snapshot.values
    ok = (Y > 0) & (u > threshold)
    xi = np.full_like(u, np.nan)
    theta = np.full_like(u, np.nan)
    xi[ok] = Y[ok] * fy.values[ok] / u[ok]
    uy = fy.values[ok]
    theta[ok] = Y[ok] * np.sign(uy) * np.abs(uy) ** (pc.p - 1.0)
    return ScalarField(g, xi), ScalarField(g, theta)


def xi_theta_ranges(snapshot: ScalarField, pc: ProfileConstants, box=None,
                    threshold: float = 1e-8):
    """(min, max) of xi and Theta over the probe box."""
    g = snapshot.grid
    if box is None:
        box = default_probe_box(g)
    x1, y1 = box
    xi, theta = xi_theta_fields(snapshot, pc, threshold)
    X, Y = g.meshgrid()
    mask = (np.abs(X) <= x1) & (Y > 0) & (Y <= y1) & np.isfinite(xi.values)
    if not np.any(mask):
        raise DomainError("xi/theta probe box contains no usable nodes")
    return ((float(np.min(xi.values[mask])), float(np.max(xi.values[mask]))),
            (float(np.min(theta.values[mask])), float(np.max(theta.values[mask]))))


def boundary_normal_series(snapshots):
    """(t, x, u_y(x, 0, t)) from a list of (t, ScalarField) pairs."""
    ts = []
    rows = []
    xs = None
    for t, f in snapshots:
        if xs is None:
            xs = f.grid.x
        _, fy = gradient(f)
        ts.append(t)
        rows.append(fy.values[0, :])
    return np.asarray(ts), xs, np.asarray(rows)


def modulation_h(ts, xs, uy_rows, pc: ProfileConstants, T_hat=None):
    """Quasi-stationary height h = (u_y(x, 0, t) / d_p)^(-1/beta).

    Returns a dict with the h table, the count of excluded (nonpositive u_y)
    samples, a log-log fit of h(t_last, x) vs x (expected slope 2/(1-beta))
    and, when T_hat is given, of h(t, 0) vs T_hat - t (expected slope
    1/(1-beta)).
    """
    uy_rows = np.asarray(uy_rows, dtype=float)
    pos = uy_rows > 0
    h = np.full_like(uy_rows, np.nan)
    h[pos] = (uy_rows[pos] / pc.d_p) ** (-1.0 / pc.beta)
    out = {
        "t": np.asarray(ts, dtype=float),
        "x": np.asarray(xs, dtype=float),
        "h": h,
        "n_excluded": int(uy_rows.size - np.count_nonzero(pos)),
        "fit_space": None,
        "fit_time": None,
    }
    xs = np.asarray(xs)
    right = xs > 0
    last = h[-1, :]
    ok = right & np.isfinite(last)
    if np.count_nonzero(ok) >= 5:
        try:
            out["fit_space"] = powerlaw_fit(
                xs[ok], last[ok], (float(np.min(xs[ok])), float(np.max(xs[ok]))))
        except FitError:
            pass
    if T_hat is not None:
        i0 = int(np.argmin(np.abs(xs)))
        col = h[:, i0]
        dt = T_hat - np.asarray(ts, dtype=float)
        ok = (dt > 0) & np.isfinite(col) & (col > 0)
        if np.count_nonzero(ok) >= 5:
            try:
                out["fit_time"] = powerlaw_fit(
                    dt[ok], col[ok], (float(np.min(dt[ok])), float(np.max(dt[ok]))))
            except FitError:
                pass
    return out


def build_report(snapshots, pc: ProfileConstants, q: float = None, box=None,
                 T_hat=None) -> DiagnosticReport:
    """Full diagnostic pass over a list of (t, ScalarField) snapshot pairs."""
    envelopes = []
    prev = prev_t = None
    for t, f in snapshots:
        envelopes.extend(monitor_bounds(f, t, prev, prev_t))
        envelopes.append(bernstein_monitor(f, t, pc))
        prev, prev_t = f, t

    from .profile_math import j_params

    t_last, f_last = snapshots[-1]
    k, _table = j_k_ladder([f for _, f in snapshots[len(snapshots) * 3 // 4:]],
                           pc, q, box)
    jp = j_params(pc, k if k > 0 else 0.5, q)
    j_max = [(t, j_monitor(f, jp, pc, box)) for t, f in snapshots]
    xi_range, theta_range = xi_theta_ranges(f_last, pc, box)
    ts, xs, rows = boundary_normal_series(snapshots)
    h = modulation_h(ts, xs, rows, pc, T_hat)
    return DiagnosticReport(envelopes=envelopes, j_max=j_max, j_k=k,
                            xi_range=xi_range, theta_range=theta_range,
                            h_boundary=h)


def write_report(report: DiagnosticReport, run_dir):
    """Emit report.json and h_table.csv into the run directory."""
    def fit_dict(f: PowerLawFit):
        return None if f is None else {
            "exponent": f.exponent, "amplitude": f.amplitude,
            "r_squared": f.r_squared, "window": list(f.window),
            "n_points": f.n_points}

    doc = {
        "envelopes": [
            {"name": e.name, "worst_value": e.worst_value,
             "worst_location": list(e.worst_location),
             "envelope_constant": e.envelope_constant}
            for e in report.envelopes
        ],
        "j_max": [[t, v] for t, v in report.j_max],
        "j_k": report.j_k,
        "xi_range": list(report.xi_range),
        "theta_range": list(report.theta_range),
        "h_excluded": report.h_boundary["n_excluded"],
        "h_fit_space": fit_dict(report.h_boundary["fit_space"]),
        "h_fit_time": fit_dict(report.h_boundary["fit_time"]),
    }
    with open(os.path.join(run_dir, "report.json"), "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    hb = report.h_boundary
    with open(os.path.join(run_dir, "h_table.csv"), "w") as fh:
        fh.write("t," + ",".join(repr(float(x)) for x in hb["x"]) + "\n")
        for i, t in enumerate(hb["t"]):
            fh.write(repr(float(t)) + ","
                     + ",".join(repr(float(v)) for v in hb["h"][i]) + "\n")
