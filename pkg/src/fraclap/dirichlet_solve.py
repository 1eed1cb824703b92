"""Elliptic and parabolic Dirichlet problems for the discrete operator.

With ``K = -op.matrix`` (symmetric positive definite) and lumped weights W,
the discrete operator is A_h = -W^{-1} K, so

* the elliptic problem (A_h - lam) u = f is (K + lam W) u = -W f, and
* the Green matrix G^lam = (K + lam W)^{-1} satisfies u_i = -sum_j G_ij w_j f_j,
  i.e. G_ij samples the continuous Green function G^lam(x_i, y_j) and the
  solution is u = -int G f dy.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import linalg

from .domain_geom import Grid, HalfLine, HalfSpace
from .fraclap_op import DirichletOperator, GridFunction, apply_pv, build_dirichlet_operator
from .stable_kernel import check_alpha

__all__ = [
    "EllipticProblem", "ParabolicProblem", "GreenFunction", "Trajectory",
    "operator_for", "solve_elliptic", "green_function", "solve_parabolic",
    "heat_kernel", "bin_averages", "weak_residual", "write_trajectory_csv", "write_green_csv",
]

_OP_CACHE: dict = {}
_OP_CACHE_SIZE = 8


def operator_for(grid: Grid, alpha: float) -> DirichletOperator:
    """Assembled operator for ``grid``, memoised on the mesh and alpha."""
    key = (type(grid.domain).__name__, grid.mesh.tobytes(), float(alpha))
    op = _OP_CACHE.get(key)
    if op is None:
        op = build_dirichlet_operator(grid.domain, grid, alpha)
        if len(_OP_CACHE) >= _OP_CACHE_SIZE:
            _OP_CACHE.pop(next(iter(_OP_CACHE)))
        _OP_CACHE[key] = op
    return op


@dataclass(frozen=True)
class EllipticProblem:
    """(A - lam) u = f in D, u = 0 outside D."""

    alpha: float
    lam: float
    f: GridFunction

    def __post_init__(self):
        check_alpha(self.alpha)
        if not self.lam >= 0:
            raise ValueError("lambda must be nonnegative")
        dom = self.f.grid.domain
        if self.lam == 0 and isinstance(dom, (HalfLine, HalfSpace)) and self.f.grid.truncation is None:
            raise ValueError("lambda = 0 needs a bounded (or truncated) domain")

    @property
    def grid(self) -> Grid:
        return self.f.grid

    @property
    def domain(self):
        return self.f.grid.domain


@dataclass(frozen=True)
class ParabolicProblem:
    """du/dt = A u + f on (0, T] x D, u(0) = u0, u = 0 outside D.

    ``f`` is None, a callable t -> array of nodal values, or an array of
    shape (steps + 1, n) sampled on the uniform time grid.
    """

    alpha: float
    T: float
    u0: GridFunction
    f: Callable | np.ndarray | None = None

    def __post_init__(self):
        check_alpha(self.alpha)
        if not self.T > 0:
            raise ValueError("T must be positive")

    @property
    def grid(self) -> Grid:
        return self.u0.grid

    def forcing(self, t: float, k: int) -> np.ndarray:
        n = self.grid.size
        if self.f is None:
            return np.zeros(n)
        if callable(self.f):
            return np.asarray(self.f(t), dtype=float).reshape(n)
        return np.asarray(self.f[k], dtype=float)


@dataclass(frozen=True)
class GreenFunction:
    """Samples G^lam(x_i, y_j); integrate against y with ``grid.weights``."""

    grid: Grid
    lam: float
    values: np.ndarray

    def apply(self, f) -> np.ndarray:
        """int G(x, y) f(y) dy at the nodes."""
        v = f.values if isinstance(f, GridFunction) else np.asarray(f, dtype=float)
        return self.values @ (self.grid.weights * v)

    def asymmetry(self) -> float:
        return float(np.max(np.abs(self.values - self.values.T)))


@dataclass
class Trajectory:
    """Nodal values at the recorded times (rows of ``values``)."""

    grid: Grid
    times: np.ndarray
    values: np.ndarray
    scheme: str = "euler"
    meta: dict = field(default_factory=dict)

    def at(self, k: int) -> GridFunction:
        return GridFunction(self.grid, self.values[k])

    @property
    def final(self) -> GridFunction:
        return self.at(-1)


def _system(op: DirichletOperator, lam: float):
    K = -op.matrix
    A = K + lam * np.diag(op.weights)
    try:
        return linalg.cho_factor(A, lower=True, check_finite=True)
    except linalg.LinAlgError as exc:
        raise linalg.LinAlgError(f"elliptic system is not positive definite: {exc}") from exc


def solve_elliptic(p: EllipticProblem, op: DirichletOperator | None = None) -> GridFunction:
    """Solve (A_h - lam) u = f at the interior nodes."""
    op = op or operator_for(p.grid, p.alpha)
    fac = _system(op, p.lam)
    u = linalg.cho_solve(fac, -op.weights * p.f.values)
    return GridFunction(p.grid, u)


def green_function(grid: Grid, alpha: float, lam: float,
                   op: DirichletOperator | None = None) -> GreenFunction:
    """The Green matrix (K + lam W)^{-1}, symmetric and entrywise nonnegative."""
    if not lam >= 0:
        raise ValueError("lambda must be nonnegative")
    op = op or operator_for(grid, alpha)
    fac = _system(op, lam)
    G = linalg.cho_solve(fac, np.eye(grid.size))
    return GreenFunction(grid, float(lam), 0.5 * (G + G.T))


def solve_parabolic(p: ParabolicProblem, steps: int, scheme: str = "euler",
                    record_every: int = 1, op: DirichletOperator | None = None) -> Trajectory:
    """Time-step du/dt = A_h u + f from u0 up to T.

    Implicit Euler: (W + dt K) u^{k+1} = W u^k + dt W f^{k+1}.
    Crank-Nicolson: (W + dt/2 K) u^{k+1} = (W - dt/2 K) u^k + dt/2 W (f^k + f^{k+1}).
    One Cholesky factorisation serves all steps.
    """
    if steps < 1:
        raise ValueError("steps must be positive")
    if scheme not in ("euler", "cn"):
        raise ValueError("scheme must be 'euler' or 'cn'")
    op = op or operator_for(p.grid, p.alpha)
    dt = p.T / steps
    W = op.weights
    K = -op.matrix
    theta = 1.0 if scheme == "euler" else 0.5
    fac = linalg.cho_factor(np.diag(W) + theta * dt * K, lower=True)
    u = p.u0.values.copy()
    times, rows = [0.0], [u.copy()]
    f_prev = p.forcing(0.0, 0)
    for k in range(1, steps + 1):
        t = k * dt
        f_next = p.forcing(t, k)
        if theta == 1.0:
            rhs = W * u + dt * W * f_next
        else:
            rhs = W * u - 0.5 * dt * (K @ u) + 0.5 * dt * W * (f_prev + f_next)
        u = linalg.cho_solve(fac, rhs)
        if not np.all(np.isfinite(u)):
            raise FloatingPointError(f"non-finite state at step {k}")
        f_prev = f_next
        if k % record_every == 0 or k == steps:
            times.append(t)
            rows.append(u.copy())
    return Trajectory(p.grid, np.array(times), np.array(rows), scheme, {"steps": steps, "dt": dt})


def heat_kernel(op: DirichletOperator, t: float | np.ndarray) -> np.ndarray:
    """Discrete killed transition density p_h(t, x_i, y_j) = [e^{t A_h}]_ij / w_j.

    Computed from the eigen-decomposition of the symmetric form
    W^{-1/2} M W^{-1/2}; the result is symmetric in (i, j). For an array of
    times the leading axis indexes t.
    """
    lam, V = np.linalg.eigh(op.symmetric_form())
    s = 1.0 / np.sqrt(op.weights)
    B = s[:, None] * V
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.stack([(B * np.exp(tt * lam)) @ B.T for tt in ts])
    return out[0] if np.ndim(t) == 0 else out


def bin_averages(grid: Grid, values, edges) -> np.ndarray:
    """Exact bin averages of the piecewise-linear interpolant of nodal values.

    Boundary vertices of the mesh carry the value zero (exterior condition).
    """
    v = values.values if isinstance(values, GridFunction) else np.asarray(values, dtype=float)
    edges = np.asarray(edges, dtype=float)
    full = np.zeros(grid.mesh.size)
    full[grid.node_slice] = v
    pts = np.union1d(grid.mesh, edges)
    f = np.interp(pts, grid.mesh, full, left=0.0, right=0.0)
    cum = np.concatenate([[0.0], np.cumsum(0.5 * np.diff(pts) * (f[1:] + f[:-1]))])
    F = np.interp(edges, pts, cum)
    return np.diff(F) / np.diff(edges)


def _boundary_layer(grid: Grid) -> float:
    return 0.05 * (grid.domain.inradius if math.isfinite(grid.domain.inradius)
                   else (grid.truncation or 1.0))


def weak_residual(traj: Trajectory, u0: GridFunction, f, test: Callable, alpha: float,
                  test_kinks=(), test_laplacian: np.ndarray | None = None) -> float:
    """max_t |<u(t),phi> - <u0,phi> - int_0^t (<u(s), A phi> + <f(s), phi>) ds|.

    ``A phi`` is evaluated at the nodes by :func:`apply_pv` (or passed in as
    ``test_laplacian``); the time integral uses the trapezoid rule on the
    recorded times. ``f`` follows the :class:`ParabolicProblem` conventions,
    indexed by recorded time.
    """
    grid = traj.grid
    x, w = grid.nodes, grid.weights
    phi = np.array([float(test(xi)) for xi in x])
    if np.any((phi != 0) & (grid.rho < _boundary_layer(grid))):
        warnings.warn("test function support reaches the boundary layer", RuntimeWarning,
                      stacklevel=2)
    if test_laplacian is None:
        test_laplacian = np.array([apply_pv(test, alpha, xi, kinks=test_kinks) for xi in x])
    pair_u = traj.values @ (w * test_laplacian)
    if f is None:
        pair_f = np.zeros(traj.times.size)
    elif callable(f):
        pair_f = np.array([np.dot(w * phi, f(t)) for t in traj.times])
    else:
        pair_f = np.asarray(f) @ (w * phi)
    integrand = pair_u + pair_f
    cum = np.concatenate([[0.0], np.cumsum(0.5 * np.diff(traj.times) * (integrand[1:] + integrand[:-1]))])
    lhs = traj.values @ (w * phi) - np.dot(w * phi, u0.values)
    return float(np.max(np.abs(lhs - cum)))


def write_trajectory_csv(traj: Trajectory, path) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["t", "x", "u"])
        for t, row in zip(traj.times, traj.values):
            for xi, ui in zip(traj.grid.nodes, row):
                wr.writerow([repr(float(t)), repr(float(xi)), repr(float(ui))])


def write_green_csv(green: GreenFunction, path, max_nodes: int = 256) -> None:
    if green.grid.size > max_nodes:
        raise ValueError(f"Green dump is limited to {max_nodes} nodes")
    x = green.grid.nodes
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["x", "y", "G"])
        for i, xi in enumerate(x):
            for j, yj in enumerate(x):
                wr.writerow([repr(float(xi)), repr(float(yj)), repr(float(green.values[i, j]))])
