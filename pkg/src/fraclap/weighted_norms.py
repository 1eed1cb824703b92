"""Weighted Lebesgue, Sobolev, Besov and Hoelder norms on graded grids, and
fits of boundary-decay exponents.

Weights are powers of the boundary distance rho; the extra factor psi^delta
(``psi_power``) uses the regularized distance psi.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import trapezoid

from .domain_geom import Grid, _rho_max, build_partition, psi_values
from .fraclap_op import GridFunction

__all__ = [
    "WeightSpec", "HolderSpec", "NormResult", "weighted_lp_norm", "spacetime_lp_norm", "weighted_sobolev_norm",
    "besov_seminorm", "weighted_holder_norm", "fit_boundary_decay", "derivative",
    "refinement_study", "write_norm_table", "DIVERGENCE_GROWTH",
]

DIVERGENCE_GROWTH = 1.10


@dataclass(frozen=True)
class WeightSpec:
    """L_{p,theta} with weight rho^{theta-d}, applied to psi^{psi_power} u."""

    p: float
    theta: float
    psi_power: float = 0.0

    def __post_init__(self):
        if not self.p > 1:
            raise ValueError("p must exceed 1")


@dataclass(frozen=True)
class HolderSpec:
    delta: float
    weight_power: float = 0.0

    def __post_init__(self):
        if not (0 < self.delta <= 1):
            raise ValueError("delta must lie in (0, 1]")


@dataclass(frozen=True)
class NormResult:
    """Values over a refinement ladder; ``divergent`` if the last step grew > 10%."""

    values: tuple
    ratios: tuple
    divergent: bool

    @property
    def value(self) -> float:
        return self.values[-1]

    @property
    def ratio(self) -> float:
        return self.ratios[-1] if self.ratios else 1.0


def _values(u) -> np.ndarray:
    return u.values if isinstance(u, GridFunction) else np.asarray(u, dtype=float)


_PERIOD_NODES, _PERIOD_WEIGHTS = np.polynomial.legendre.leggauss(32)
_PERIOD_NODES = 0.5 * (_PERIOD_NODES + 1.0)
_PERIOD_WEIGHTS = 0.5 * _PERIOD_WEIGHTS
_EXPLICIT_PERIODS = 40
_FIT_NODES = 8
KAPPA_TOL = 0.02


@lru_cache(maxsize=64)
def _psi_ratio(domain, length: float, rho_max) -> np.ndarray:
    """psi/rho over one log-period below ``length``."""
    rv = length * np.exp(-_PERIOD_NODES)
    part = build_partition(domain, rho_min=0.5 * rv.min(), rho_max=rho_max)
    return part.psi(rv) / rv


def _fit_exponent(g: np.ndarray, rho: np.ndarray, k: int, step: int) -> float:
    """Power-law exponent of g near a boundary, fitted over up to
    ``_FIT_NODES`` nodes walking inward from node k.

    Exponents within ``KAPPA_TOL`` of zero are set to zero: the fit cannot
    resolve them from the discretisation error of the boundary-nearest
    values, and an integrand tending to a nonzero constant is the common case.
    """
    idx = np.arange(k, k + step * _FIT_NODES, step)
    idx = idx[(idx >= 0) & (idx < g.size)]
    idx = idx[g[idx] > 0]
    if idx.size < 2 or idx[0] != k:
        return 0.0
    kappa = float(np.polyfit(np.log(rho[idx]), np.log(g[idx]), 1)[0])
    return 0.0 if abs(kappa) < KAPPA_TOL else kappa


def _boundary_closure(grid: Grid, g: np.ndarray, beta: float, q: float = 0.0,
                      kappa: float | None = None) -> float:
    """int over the boundary cells of I[g] psi^q rho^beta (times the Jacobian).

    On a boundary cell (0, L) in the distance variable, g is modelled as
    g_b (rho/L)^kappa with kappa fitted from the nodes nearest the
    boundary, unless a known ``kappa`` is passed. The ratio psi/rho is periodic in log(rho) with period one, so
    the cell integral is summed period by period in the variable
    rho = L e^{-u}, with a geometric tail. A total exponent
    kappa + q + beta <= -1 makes the integral infinite.
    """
    rho = grid.rho
    cells = grid.boundary_cells()
    if not cells:
        return 0.0
    total = 0.0
    known = kappa
    for k, nxt, length in cells:
        gb = g[k]
        if gb == 0.0:
            continue
        kappa = _fit_exponent(g, rho, k, nxt - k) if known is None else known
        e1 = kappa + q + beta + 1.0
        if e1 <= 0.0:
            return math.inf
        rv = length * np.exp(-_PERIOD_NODES)
        c = _psi_ratio(grid.domain, length, _rho_max(grid)) ** q if q else np.ones_like(rv)
        base = _PERIOD_WEIGHTS * np.exp(-e1 * _PERIOD_NODES) * c
        if grid.radial:
            d = grid.dimension
            R = grid.domain.radius
            area = 2 * math.pi ** (d / 2) / math.gamma(d / 2)
            acc = 0.0
            for j in range(_EXPLICIT_PERIODS):
                r = R - rv * math.exp(-j)
                acc += math.exp(-e1 * j) * float(np.dot(base, area * r ** (d - 1)))
            tail = math.exp(-e1 * _EXPLICIT_PERIODS) / -math.expm1(-e1)
            acc += tail * area * R ** (d - 1) * float(base.sum())
        else:
            acc = float(base.sum()) / -math.expm1(-e1)
        # the cell length equals the distance of the boundary-nearest node
        total += gb * length ** (e1 - kappa) * acc
    return total


def _weighted_integral(grid: Grid, g: np.ndarray, beta: float, q: float = 0.0,
                       kappa: float | None = None) -> float:
    """int_D I[g] psi^q rho^beta dx, with the power-law closure on boundary cells."""
    fac = psi_values(grid) ** q if q else 1.0
    inner = float(np.dot(grid.moment_weights(beta, include_boundary=False), g * fac))
    return inner + _boundary_closure(grid, g, beta, q, kappa)


def weighted_lp_norm(u, spec: WeightSpec, grid: Grid | None = None,
                     boundary_exponent: float | None = None) -> float:
    """(int_D |psi^delta u|^p rho^{theta-d} dx)^{1/p}.

    The part of the integral between the boundary and the nearest node is
    closed with a power law |u| ~ rho^kappa. kappa is fitted from the
    boundary-nearest nodes unless ``boundary_exponent`` supplies it. Pass
    it for solutions whose boundary behaviour is known but lies below the
    grid scale, e.g. rho^{a/2} for parabolic solutions at times t with
    t^{1/a} smaller than the first cell.
    """
    grid = grid or u.grid
    g = np.abs(_values(u)) ** spec.p
    kappa = None if boundary_exponent is None else boundary_exponent * spec.p
    val = _weighted_integral(grid, g, spec.theta - grid.dimension, spec.psi_power * spec.p, kappa)
    return val ** (1.0 / spec.p)


def spacetime_lp_norm(times, rows, spec: WeightSpec, grid: Grid,
                      skip_initial: bool = False, boundary_exponent: float | None = None) -> float:
    """(int_0^T ||u(t)||_{L_{p,theta}}^p dt)^{1/p}, trapezoid rule in time.

    With ``skip_initial`` the first interval uses its right endpoint, so
    the row at t = 0 is never evaluated. Initial data may lie outside the
    weighted space even though the solution lies in it for every t > 0.
    """
    times = np.asarray(times, dtype=float)
    rows = np.asarray(rows)
    start = 1 if skip_initial else 0
    vals = np.array([weighted_lp_norm(r, spec, grid, boundary_exponent) ** spec.p
                     for r in rows[start:]])
    total = float(trapezoid(vals, times[start:])) if vals.size > 1 else 0.0
    if skip_initial:
        total += (times[1] - times[0]) * vals[0]
    return total ** (1.0 / spec.p)


def derivative(grid: Grid, u, order: int) -> np.ndarray:
    """First or second derivative at the nodes by three-point stencils.

    Interior nodes use the centred non-uniform formulas; the two end nodes
    use one-sided three-point stencils on interior values.
    """
    if grid.radial or grid.dimension != 1:
        raise ValueError("derivatives are implemented on one-dimensional grids")
    x = grid.nodes
    v = _values(u)
    if order == 0:
        return v.copy()
    if order == 1:
        return np.gradient(v, x, edge_order=2)
    if order == 2:
        hl = np.diff(x)[:-1]
        hr = np.diff(x)[1:]
        out = np.empty_like(v)
        out[1:-1] = 2.0 * ((v[2:] - v[1:-1]) / hr - (v[1:-1] - v[:-2]) / hl) / (hl + hr)
        for i, (a, b, c) in ((0, (0, 1, 2)), (-1, (-1, -2, -3))):
            xa, xb, xc = x[a], x[b], x[c]
            out[i] = 2.0 * (v[a] / ((xa - xb) * (xa - xc)) + v[b] / ((xb - xa) * (xb - xc))
                            + v[c] / ((xc - xa) * (xc - xb)))
        return out
    raise ValueError("order must be 0, 1 or 2")


def weighted_sobolev_norm(u, n: int, spec: WeightSpec, grid: Grid | None = None) -> float:
    """sum_{k<=n} || rho^k D^k u ||_{L_{p,theta}} (with the psi^delta factor)."""
    if n not in (0, 1, 2):
        raise ValueError("n must be 0, 1 or 2")
    grid = grid or u.grid
    total = 0.0
    for k in range(n + 1):
        dk = derivative(grid, u, k) * grid.rho ** k
        total += weighted_lp_norm(dk, spec, grid)
    return total


def besov_seminorm(u, gamma: float, spec: WeightSpec, grid: Grid | None = None,
                   block: int = 1024) -> float:
    """(sum_{i != j} w_i w_j rho_ij^{theta-d+gamma p} |u_i-u_j|^p / |x_i-x_j|^{d+gamma p})^{1/p}.

    rho_ij = min(rho_i, rho_j); the diagonal cells are excluded. The psi^delta
    factor is applied to u first.
    """
    if not (0 < gamma < 1):
        raise ValueError("gamma must lie in (0, 1)")
    grid = grid or u.grid
    if grid.radial:
        raise ValueError("the Besov seminorm is implemented on one-dimensional grids")
    d = grid.dimension
    p = spec.p
    expo = spec.theta - d + gamma * p
    if expo <= -1:
        raise ValueError("need theta - d + gamma p > -1")
    v = _values(u)
    if spec.psi_power:
        v = v * psi_values(grid) ** spec.psi_power
    x, w, rho = grid.nodes, grid.weights, grid.rho
    total = 0.0
    for i0 in range(0, x.size, block):
        sl = slice(i0, min(x.size, i0 + block))
        dx = np.abs(x[sl, None] - x[None, :])
        np.fill_diagonal(dx[:, i0:], np.inf)
        r = np.minimum(rho[sl, None], rho[None, :])
        term = (w[sl, None] * w[None, :] * r ** expo * np.abs(v[sl, None] - v[None, :]) ** p
                / dx ** (d + gamma * p))
        total += float(term.sum())
    return total ** (1.0 / p)


def weighted_holder_norm(u, spec: HolderSpec, grid: Grid | None = None, form: str = "product",
                         block: int = 1024) -> float:
    """Weighted Hoelder norm with weight psi^a, a = ``spec.weight_power``.

    ``form="product"`` (default) is the Hoelder norm of v = psi^a u,
    sup|v| + sup |v(x)-v(y)|/|x-y|^delta. ``form="pairwise"`` is
    sup|psi^a u| + sup psi_xy^{a+delta} |u(x)-u(y)|/|x-y|^delta with
    psi_xy = min(psi(x), psi(y)); it is infinite in the limit whenever
    a + delta < 0 and u does not vanish identically near the boundary.
    Pairs are restricted to |x-y| <= diameter/2.
    """
    if form not in ("product", "pairwise"):
        raise ValueError("form must be 'product' or 'pairwise'")
    grid = grid or u.grid
    v = _values(u)
    psi = psi_values(grid)
    a, dl = spec.weight_power, spec.delta
    pv = psi ** a * v
    sup = float(np.max(np.abs(pv)))
    x = grid.nodes
    half = 0.5 * (x.max() - x.min()) if not grid.radial else grid.domain.radius
    semi = 0.0
    for i0 in range(0, x.size, block):
        sl = slice(i0, min(x.size, i0 + block))
        dx = np.abs(x[sl, None] - x[None, :])
        ok = (dx > 0) & (dx <= half)
        if form == "product":
            num = np.abs(pv[sl, None] - pv[None, :])
        else:
            ps = np.minimum(psi[sl, None], psi[None, :])
            num = ps ** (a + dl) * np.abs(v[sl, None] - v[None, :])
        with np.errstate(divide="ignore", invalid="ignore"):
            q = np.where(ok, num / dx ** dl, 0.0)
        semi = max(semi, float(q.max()))
    return sup + semi


def fit_boundary_decay(u, window: tuple[float, float], grid: Grid | None = None) -> float:
    """Least-squares slope of log|u| against log rho near each boundary
    component; returns the smallest slope."""
    grid = grid or u.grid
    lo, hi = window
    inr = grid.domain.inradius if math.isfinite(grid.domain.inradius) else (grid.truncation or math.inf)
    if not (0 < lo < hi <= 0.5 * inr):
        raise ValueError("window must lie inside (0, inradius/2)")
    v = np.abs(_values(u))
    rho = grid.rho
    x = grid.nodes
    in_win = (rho >= lo) & (rho <= hi) & (v > 0)
    if grid.radial or not math.isfinite(grid.domain.inradius):
        comps = [in_win]
    else:
        mid = 0.5 * (x.min() + x.max())
        comps = [in_win & (x < mid), in_win & (x > mid)]
    slopes = []
    for m in comps:
        if m.sum() < 8:
            raise ValueError("fewer than 8 nodes in the fitting window")
        slopes.append(float(np.polyfit(np.log(rho[m]), np.log(v[m]), 1)[0]))
    return min(slopes)


def refinement_study(compute: Callable[[int], float], sizes: Sequence[int],
                     growth: float = DIVERGENCE_GROWTH) -> NormResult:
    """Evaluate ``compute(n)`` on a refinement ladder and flag divergence.

    A non-finite value, or growth beyond ``growth`` between the last two
    levels, marks the quantity as divergent.
    """
    vals = tuple(float(compute(n)) for n in sizes)
    ratios = tuple(b / a if a > 0 else math.inf for a, b in zip(vals[:-1], vals[1:]))
    divergent = (not math.isfinite(vals[-1])) or (bool(ratios) and ratios[-1] > growth)
    return NormResult(vals, ratios, bool(divergent))


def write_norm_table(path, rows) -> None:
    """rows: iterables (norm_kind, p, theta, psi_power, value, refinement_ratio, divergence_flag)."""
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["norm_kind", "p", "theta", "psi_power", "value", "refinement_ratio",
                     "divergence_flag"])
        for r in rows:
            wr.writerow([r[0]] + [repr(float(v)) for v in r[1:6]] + [int(bool(r[6]))])
