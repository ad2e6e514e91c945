"""Log-log power-law regression and the headline exponent extractions:
normal decay of u_y(0, y), tangential decay of u_y(x, 0), the 1D time rate,
the two-parameter anisotropic profile fit, and level-set curve shapes.

Fit windows exclude the innermost grid cells and the resolution crossover —
the scale below which the grid saturates and measured slopes bias toward 0.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .errors import FitError
from .grid import ScalarField, gradient
from .profile_math import ProfileConstants, final_profile_model

__all__ = [
    "PowerLawFit",
    "AnisoFit",
    "powerlaw_fit",
    "normal_derivative_field",
    "fit_normal",
    "fit_tangential",
    "resolution_crossover",
    "time_rate_linear",
    "fit_time_rate",
    "fit_aniso",
    "level_set_curve",
    "level_set_shape",
    "fits_to_json",
]


@dataclass(frozen=True)
class PowerLawFit:
    exponent: float
    amplitude: float
    r_squared: float
    window: tuple
    n_points: int


@dataclass(frozen=True)
class AnisoFit:
    C1_hat: float
    residual_rel: float


def powerlaw_fit(s, v, window) -> PowerLawFit:
    """OLS fit of log v against log s over s in [window[0], window[1]].

    Nonpositive samples inside the window are excluded; fewer than 5 usable
    samples is an error.
    """
    s = np.asarray(s, dtype=float)
    v = np.asarray(v, dtype=float)
    lo, hi = window
    mask = (s >= lo) & (s <= hi) & (s > 0) & (v > 0)
    n = int(np.count_nonzero(mask))
    if n < 5:
        raise FitError(f"powerlaw_fit: {n} usable samples in window "
                       f"[{lo:.4g}, {hi:.4g}], need >= 5")
    ls = np.log(s[mask])
    lv = np.log(v[mask])
    A = np.vstack([ls, np.ones_like(ls)]).T
    (slope, intercept), *_ = np.linalg.lstsq(A, lv, rcond=None)
    resid = lv - (slope * ls + intercept)
    ss_tot = float(np.sum((lv - lv.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - float(np.sum(resid**2)) / ss_tot
    return PowerLawFit(exponent=float(slope), amplitude=float(np.exp(intercept)),
                       r_squared=min(max(r2, 0.0), 1.0),
                       window=(float(lo), float(hi)), n_points=n)


def normal_derivative_field(snapshot: ScalarField) -> np.ndarray:
    """u_y as a (ny, nx) array (second-order, one-sided on the boundary)."""
    _, fy = gradient(snapshot)
    return fy.values


def fit_normal(final_snapshot: ScalarField, pc: ProfileConstants,
               window=None) -> PowerLawFit:
    """Fit u_y(0, y) vs y; the expected slope is -beta with amplitude d_p."""
    g = final_snapshot.grid
    uy = normal_derivative_field(final_snapshot)[:, g.ix0]
    if window is None:
        window = (3.0 * g.hy, min(0.1, g.Ly))
    return powerlaw_fit(g.y, uy, window)


def resolution_crossover(s, v, target_exponent, hi):
    """Smallest scale above which the measured local log-slope keeps at least
    half the target steepness; returns hi/4 as a fallback floor.

    The local slope is a centered difference of log v over log s.
    """
    s = np.asarray(s, dtype=float)
    v = np.asarray(v, dtype=float)
    mask = (s > 0) & (v > 0) & (s <= hi)
    s, v = s[mask], v[mask]
    order = np.argsort(s)
    s, v = s[order], v[order]
    if s.size < 5:
        raise FitError("resolution_crossover: not enough positive samples")
    ls, lv = np.log(s), np.log(v)
    slope = np.gradient(lv, ls)
    steep = np.abs(slope) >= 0.5 * abs(target_exponent)
    # walk outward: crossover is past the last inner node that is too flat
    flat = np.nonzero(~steep)[0]
    if flat.size == 0:
        return float(s[0])
    if flat[-1] == s.size - 1:
        raise FitError("insufficient resolution: no steep outer window")
    return float(s[flat[-1] + 1])


def fit_tangential(final_snapshot: ScalarField, pc: ProfileConstants,
                   hi=None) -> PowerLawFit:
    """Fit one-sided u_y(x, 0) vs x > 0; the expected slope is -2/(p-2).

    The window's lower edge is the resolution crossover (the discrete profile
    plateaus below it); an outer decade that never steepens is an error.
    """
    g = final_snapshot.grid
    uy = normal_derivative_field(final_snapshot)[0, g.ix0 + 1:]
    xs = g.x[g.ix0 + 1:]
    if hi is None:
        hi = min(0.1, g.Lx)
    lo = resolution_crossover(xs, uy, -pc.tangential_exp, hi)
    lo = max(lo, 3.0 * g.hx)
    if hi / lo < 2.0:
        raise FitError(f"insufficient resolution: tangential window "
                       f"[{lo:.4g}, {hi:.4g}] narrower than a factor 2")
    return powerlaw_fit(xs, uy, (lo, hi))


def _last_growth_decade(t, gmax):
    """Indices of the monotone tail where gmax >= max/10."""
    g_end = gmax[-1]
    idx = np.nonzero(gmax >= g_end / 10.0)[0]
    i0 = idx[0]
    # trim any non-monotone stretch at the front of the decade
    tail = gmax[i0:]
    drops = np.nonzero(np.diff(tail) < 0)[0]
    if drops.size:
        i0 += drops[-1] + 1
    sel = np.arange(i0, len(t))
    if sel.size < 5:
        raise FitError("time-rate fit: fewer than 5 samples in the last "
                       "growth decade")
    return sel


def time_rate_linear(series: dict, pc: ProfileConstants):
    """Linear fit of grad_max^-(p-2) against t on the last growth decade.

    Returns (slope, intercept, r_squared, T_hat) with T_hat the zero crossing.
    """
    t = np.asarray(series["t"], dtype=float)
    g = np.asarray(series["grad_max"], dtype=float)
    sel = _last_growth_decade(t, g)
    ts, ws = t[sel], g[sel] ** (-(pc.p - 2.0))
    A = np.vstack([ts, np.ones_like(ts)]).T
    (slope, intercept), *_ = np.linalg.lstsq(A, ws, rcond=None)
    if not slope < 0:
        raise FitError("time-rate fit: grad_max^-(p-2) is not decreasing")
    resid = ws - (slope * ts + intercept)
    ss_tot = float(np.sum((ws - ws.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - float(np.sum(resid**2)) / ss_tot
    T_hat = -intercept / slope
    return float(slope), float(intercept), float(r2), float(T_hat)


def fit_time_rate(series: dict, pc: ProfileConstants):
    """(power-law fit of grad_max vs T_hat - t, T_hat); expected slope
    -1/(p-2).  T_hat comes from the linear extrapolation of grad_max^-(p-2)."""
    _, _, _, T_hat = time_rate_linear(series, pc)
    t = np.asarray(series["t"], dtype=float)
    g = np.asarray(series["grad_max"], dtype=float)
    sel = _last_growth_decade(t, g)
    dt = T_hat - t[sel]
    keep = dt > 0
    fit = powerlaw_fit(dt[keep], g[sel][keep],
                       (float(np.min(dt[keep])), float(np.max(dt[keep]))))
    return fit, T_hat


def _aniso_region(final_snapshot: ScalarField, pc: ProfileConstants,
                  extent=0.1):
    """(x, y, measured u_y) over [0, extent]^2 above the stencil-accuracy
    floor."""
    g = final_snapshot.grid
    uy = normal_derivative_field(final_snapshot)
    X, Y = g.meshgrid()
    # y >= 3 hy: the centered stencil on the layer profile is ~40% off at
    # the first interior row and second-order accurate from the third on
    mask = (X >= 0) & (X <= extent) & (Y >= 3.0 * g.hy) & (Y <= extent) \
        & (uy > 0)
    if np.count_nonzero(mask) < 5:
        raise FitError("fit_aniso: fewer than 5 usable nodes in the region")
    return X[mask], Y[mask], uy[mask]


def fit_aniso(final_snapshot: ScalarField, pc: ProfileConstants,
              extent=0.1) -> AnisoFit:
    """Golden-section search on C1 minimizing the max relative deviation of
    measured u_y from d_p [y + C1 |x|^(2(p-1)/(p-2))]^(-beta)."""
    xs, ys, uy = _aniso_region(final_snapshot, pc, extent)

    def cost(logc):
        model = final_profile_model(pc, float(np.exp(logc)), xs, ys)
        return float(np.max(np.abs(uy - model) / model))

    lo, hi = np.log(1e-3), np.log(1e3)
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = cost(c), cost(d)
    for _ in range(80):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = cost(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = cost(d)
    logc = (a + b) / 2.0
    return AnisoFit(C1_hat=float(np.exp(logc)), residual_rel=cost(logc))


def _column_crossing(col, ys, level):
    """First downward crossing of a column through the level, linearly
    interpolated; None if the column never crosses."""
    above = np.nonzero(col[:-1] >= level)[0]
    for j in above:
        if col[j + 1] < level:
            frac = (col[j] - level) / (col[j] - col[j + 1])
            return ys[j] + frac * (ys[j + 1] - ys[j])
    return None


def level_set_curve(final_snapshot: ScalarField, level: float, extent=0.1):
    """Per-column crossing heights of u_y = level for x > 0.

    Each column is scanned upward; the first downward crossing is located by
    linear interpolation.  Returns (x, y) arrays of the crossings found.
    """
    g = final_snapshot.grid
    uy = normal_derivative_field(final_snapshot)
    xs_out, ys_out = [], []
    for i in range(g.ix0 + 1, g.nx):
        if g.x[i] > extent:
            break
        hit = _column_crossing(uy[:, i], g.y, level)
        if hit is None:
            continue
        ys_out.append(hit)
        xs_out.append(g.x[i])
    if len(xs_out) < 5:
        raise FitError(f"level {level:.4g} crossed in only {len(xs_out)} "
                       "columns, need >= 5")
    return np.asarray(xs_out), np.asarray(ys_out)


def level_set_shape(final_snapshot: ScalarField, pc: ProfileConstants,
                    level: float, extent=0.1) -> PowerLawFit:
    """Fit the sag of the level-set curve of u_y below its apex at x = 0.

    On the layer-profile model u_y = d_p [y + C1 |x|^a]^(-beta) the crossing
    height is y(x) = y(0) - C1 |x|^a, so y(0) - y(x) is a pure power law with
    the anisotropy exponent a = 2(p-1)/(p-2).  Columns whose sag is below a
    tenth of the largest one are dropped: there the sag is sub-resolution and
    the interpolated heights are noise-dominated.
    """
    g = final_snapshot.grid
    uy = normal_derivative_field(final_snapshot)
    y0 = _column_crossing(uy[:, g.ix0], g.y, level)
    if y0 is None:
        raise FitError(f"level {level:.4g} not crossed on the x = 0 column")
    xs, ys = level_set_curve(final_snapshot, level, extent)
    sag = y0 - ys
    keep = sag >= max(float(np.max(sag)), 0.0) / 10.0
    if np.count_nonzero(keep) < 5:
        raise FitError("level-set sag resolved in fewer than 5 columns")
    xs, sag = xs[keep], sag[keep]
    return powerlaw_fit(xs, sag, (float(np.min(xs)), float(np.max(xs))))


def fits_to_json(fits: dict) -> str:
    """Deterministic serialization: sorted keys, dataclasses expanded."""

    def enc(obj):
        if isinstance(obj, (PowerLawFit, AnisoFit)):
            return asdict(obj)
        if isinstance(obj, np.floating):
            return float(obj)
        if isinstance(obj, np.integer):
            return int(obj)
        if isinstance(obj, np.ndarray):
            return obj.tolist()
        raise TypeError(f"not serializable: {type(obj)}")

    return json.dumps(fits, default=enc, indent=2, sort_keys=True) + "\n"
