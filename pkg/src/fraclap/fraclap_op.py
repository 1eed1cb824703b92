"""The fractional Laplacian: pointwise principal-value quadrature, a Fourier
oracle, and the dense Dirichlet discretization used by the solvers.

Sign convention: the operator is -(-Delta)^{alpha/2}, with Fourier symbol
-|xi|^alpha.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, special

from .domain_geom import Ball, Grid, HalfLine, HalfSpace, Interval
from .stable_kernel import check_alpha

__all__ = [
    "c_d_constant", "apply_pv", "spectral_reference", "GridFunction",
    "DirichletOperator", "build_dirichlet_operator", "uniform_grid",
    "getoor_constant", "getoor_profile", "exterior_killing", "operator_dump_rows",
    "PVError", "MAX_NODES",
]

MAX_NODES = 4096


class PVError(RuntimeError):
    """The principal-value integral could not be evaluated to a finite value."""


def c_d_constant(alpha: float, dim: int) -> float:
    """Normalising constant of the singular-integral form of the operator."""
    check_alpha(alpha)
    return (2.0 ** alpha * math.gamma(0.5 * (dim + alpha))
            / (math.pi ** (0.5 * dim) * abs(math.gamma(-0.5 * alpha))))


def getoor_constant(alpha: float, dim: int = 1) -> float:
    """The value of the operator on (1-|x|^2)_+^{alpha/2} inside the unit ball."""
    check_alpha(alpha)
    return -(2.0 ** alpha * math.gamma(1 + 0.5 * alpha) * math.gamma(0.5 * (dim + alpha))
             / math.gamma(0.5 * dim))


def getoor_profile(alpha: float, x, center=0.0, radius: float = 1.0):
    """(r^2-|x-c|^2)_+^{alpha/2}, the profile with constant fractional Laplacian."""
    x = np.asarray(x, dtype=float)
    if x.ndim >= 1 and np.ndim(center) >= 1 and len(center) > 1:
        s = radius ** 2 - np.sum((x - np.asarray(center)) ** 2, axis=-1)
    else:
        s = radius ** 2 - (x - center) ** 2
    return np.clip(s, 0.0, None) ** (0.5 * alpha)


# -- pointwise principal value ---------------------------------------------------

def _radial_integral(D: Callable[[float], float], alpha: float, breaks: Sequence[float],
                     inner: float) -> float:
    """int_0^inf D(r) r^{-1-alpha} dr with D(r) = O(r^2) at the origin.

    On [0, eps] the second difference is replaced by the model
    A r^2 + B r^4 fitted from D(eps) and D(eps/2) (exact up to O(eps^6));
    the remainder is smooth and handed to adaptive quadrature.
    """
    pos = [b for b in breaks if b > 0]
    eps = 1e-2 * min([inner] + pos)
    d1, d2 = D(eps), D(0.5 * eps)
    B = (d1 - 4.0 * d2) / (0.75 * eps ** 4)
    A = (d1 - B * eps ** 4) / eps ** 2
    val = A * eps ** (2 - alpha) / (2 - alpha) + B * eps ** (4 - alpha) / (4 - alpha)

    def f(y):
        return D(y) / y ** (1.0 + alpha)

    opts = dict(limit=200, epsabs=1e-11, epsrel=1e-10)
    edges = [eps] + sorted(b for b in pos if eps < b < inner) + [inner]
    edges += sorted(b for b in pos if b > inner)
    for lo, hi in zip(edges[:-1], edges[1:]):
        val += integrate.quad(f, lo, hi, **opts)[0]
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val += integrate.quad(f, edges[-1], np.inf, **opts)[0]
        except integrate.IntegrationWarning as exc:
            raise PVError(f"tail integral failed: {exc}") from exc
    return val


def apply_pv(u: Callable, alpha: float, x, *, kinks: Sequence[float] = (),
             radial_kinks: Callable | None = None, n_angles: int = 32,
             inner: float = 1.0) -> float:
    """Evaluate the operator on ``u`` at the point ``x`` by quadrature.

    The integral is written in the symmetrised second-difference form
    (u(x+y)+u(x-y)-2u(x))/2, which removes the principal value. Near the
    origin a power substitution keeps the integrand bounded; the region
    beyond ``inner`` uses the same formula on a half-infinite interval.

    Parameters
    ----------
    u : callable
        Vectorised or scalar function of a point (scalar for d=1, array of
        shape (d,) otherwise).
    kinks : points of non-smoothness of ``u`` (d=1), used as breakpoints.
    radial_kinks : callable(x, theta) -> list of radii where ``u`` is not
        smooth along the ray x + r*theta (d >= 2).
    """
    check_alpha(alpha)
    x = np.asarray(x, dtype=float)
    d = 1 if x.ndim == 0 or x.size == 1 else x.size
    cd = c_d_constant(alpha, d)
    if d == 1:
        x0 = float(x)
        u0 = float(u(x0))

        def D(y):
            return float(u(x0 + y)) + float(u(x0 - y)) - 2.0 * u0

        breaks = [abs(k - x0) for k in kinks if k != x0]
        val = cd * _radial_integral(D, alpha, breaks, inner)
    else:
        u0 = float(u(x))
        dirs, wts = _sphere_rule(d, n_angles)
        acc = 0.0
        for th, w in zip(dirs, wts):
            def D(r, th=th):
                return 0.5 * (float(u(x + r * th)) + float(u(x - r * th)) - 2.0 * u0)
            br = []
            if radial_kinks is not None:
                br = list(radial_kinks(x, th)) + list(radial_kinks(x, -th))
            acc += w * _radial_integral(D, alpha, br, inner)
        val = cd * acc
    if not math.isfinite(val):
        raise PVError("non-finite principal value")
    return val


def _sphere_rule(d: int, n: int):
    """Directions and weights integrating over the unit sphere S^{d-1}."""
    if d == 2:
        th = 2 * np.pi * (np.arange(n) + 0.5) / n
        return np.stack([np.cos(th), np.sin(th)], axis=1), np.full(n, 2 * np.pi / n)
    if d == 3:
        ct, wc = np.polynomial.legendre.leggauss(n // 2)
        ph = 2 * np.pi * (np.arange(n) + 0.5) / n
        st = np.sqrt(1 - ct ** 2)
        dirs = np.array([[s * math.cos(p), s * math.sin(p), c] for c, s in zip(ct, st) for p in ph])
        wts = np.array([w * 2 * np.pi / n for w in wc for _ in ph])
        return dirs, wts
    raise ValueError("dimension must be 1, 2 or 3")


# -- grid functions and the Fourier oracle ------------------------------------------

@dataclass(frozen=True)
class GridFunction:
    """Values at the nodes of a grid; the function vanishes outside the domain."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.size,):
            raise ValueError(f"expected {self.grid.size} values, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("grid function values must be finite")
        object.__setattr__(self, "values", v)

    @property
    def domain(self):
        return self.grid.domain

    @property
    def nodes(self) -> np.ndarray:
        return self.grid.nodes

    def __add__(self, other):
        return GridFunction(self.grid, self.values + _vals(other))

    def __sub__(self, other):
        return GridFunction(self.grid, self.values - _vals(other))

    def __mul__(self, a):
        return GridFunction(self.grid, self.values * _vals(a))

    __rmul__ = __mul__

    def __neg__(self):
        return GridFunction(self.grid, -self.values)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))


def _vals(o):
    return o.values if isinstance(o, GridFunction) else o


def uniform_grid(half_width: float, n_modes: int) -> Grid:
    """Periodic uniform grid on [-L, L) with ``n_modes`` points."""
    mesh = np.linspace(-half_width, half_width, n_modes + 1)
    return Grid(Interval(-half_width, half_width), mesh, 1.0, node_slice=slice(0, -1))


def _image_correction(x, values, h, alpha, period, n_moments=5):
    """Sum of the operator's far field over the periodic images k != 0.

    For a point z outside the support the operator equals
    c int u(y)|z-y|^{-1-alpha} dy; expanding in y/z and summing over the
    images with the Hurwitz zeta function gives the periodic excess.
    """
    cd = c_d_constant(alpha, 1)
    corr = np.zeros_like(x)
    for m in range(n_moments):
        Mm = h * np.sum(values * x ** m)
        if Mm == 0.0:
            continue
        s = 1.0 + alpha + m
        coef = special.poch(1.0 + alpha, m) / math.factorial(m) * Mm * period ** (-s)
        corr += coef * (special.zeta(s, 1.0 + x / period)
                        + (-1) ** m * special.zeta(s, 1.0 - x / period))
    return cd * corr


def spectral_reference(u: GridFunction, alpha: float, correct_images: bool = True) -> GridFunction:
    """Apply the Fourier multiplier -|xi|^alpha to ``u`` by FFT.

    ``u`` lives on a :func:`uniform_grid`; the box is treated as periodic and
    the contribution of the periodic images is removed by a multipole
    expansion, so the result approximates the operator on R.
    """
    check_alpha(alpha)
    g = u.grid
    x = g.nodes
    n = x.size
    h = x[1] - x[0]
    if not np.allclose(np.diff(x), h, rtol=1e-9, atol=0):
        raise ValueError("spectral_reference needs a uniform grid")
    period = n * h
    nz = np.nonzero(np.abs(u.values) > 1e-14 * max(u.max_abs(), 1e-300))[0]
    if nz.size and (x[nz[-1]] - x[nz[0]]) / period > 0.25:
        warnings.warn("support exceeds a quarter of the periodic box; aliasing likely",
                      RuntimeWarning, stacklevel=2)
    xi = 2 * np.pi * np.fft.rfftfreq(n, d=h)
    out = np.fft.irfft(-(xi ** alpha) * np.fft.rfft(u.values), n=n)
    if correct_images and nz.size:
        out = out - _image_correction(x, u.values, h, alpha, period)
    return GridFunction(g, out)


# -- Dirichlet discretisation ---------------------------------------------------------

def _galerkin_kernel(r, alpha: float):
    """A kernel g with (d/dx)^2 (d/dy)^2 of g(x-y) equal to the operator kernel.

    Integrating the form c |x-y|^{-1-alpha} four times gives
    g(r) = |r|^{3-alpha} / (2 Gamma(4-alpha) cos(pi alpha/2)), and
    r^2 log|r| / (2 pi) in the limit alpha = 1 (up to a quadratic).
    """
    r = np.abs(r)
    if abs(alpha - 1.0) < 1e-12:
        safe = np.where(r > 0, r, 1)
        return np.where(r > 0, r * r * np.log(safe), 0) / (2 * np.longdouble(np.pi))
    c = np.longdouble(1.0) / (2 * math.gamma(4 - alpha) * math.cos(math.pi * alpha / 2))
    return c * r ** np.longdouble(3 - alpha)


def _stiffness(mesh: np.ndarray, alpha: float, block: int = 256) -> np.ndarray:
    """P1 Galerkin matrix of (-Delta)^{alpha/2} with zero exterior values.

    K_ij = sum over vertices k, m of J_ki J_mj g(x_k - x_m) where column J_.i
    holds the second-difference weights (1/h_l, -1/h_l-1/h_r, 1/h_r) of the
    hat function at node i. Accumulated in extended precision because the
    two second differences cancel most of the digits of g.
    """
    x = mesh.astype(np.longdouble)
    h = np.diff(x)
    n = x.size - 2
    a, c = 1 / h[:-1], 1 / h[1:]
    b = -(a + c)
    K = np.empty((n, n))
    for i0 in range(0, n, block):
        i1 = min(n, i0 + block)
        rows = np.arange(i0, i1 + 2)
        G = _galerkin_kernel(x[rows, None] - x[None, :], alpha)
        GJ = G[:, :-2] * a + G[:, 1:-1] * b + G[:, 2:] * c
        sl = slice(i0, i1)
        Kb = (a[sl, None] * GJ[:-2] + b[sl, None] * GJ[1:-1] + c[sl, None] * GJ[2:])
        K[i0:i1] = np.asarray(Kb, dtype=float)
    _separated_entries(K, mesh, alpha)
    return 0.5 * (K + K.T)


def _separated_entries(K: np.ndarray, mesh: np.ndarray, alpha: float,
                       rel_noise: float = 1e-2, block: int = 512) -> None:
    """Recompute entries whose kernel differences are dominated by rounding.

    For hats with well-separated supports the entry is
    -c int int phi_i(x) phi_j(y) |x-y|^{-1-alpha} dx dy, a smooth integral
    evaluated by tensor Gauss rules (5 points per cell for nearby pairs,
    3 for distant ones). Only pairs whose rounding bound exceeds
    ``rel_noise`` times the entry size are touched; this keeps the sign
    pattern of the far field exact on strongly graded grids.
    """
    h = np.diff(mesh)
    x = mesh[1:-1]
    n = x.size
    lo, hi = mesh[:-2], mesh[2:]
    size = hi - lo
    cd = c_d_constant(alpha, 1)
    diam = mesh[-1] - mesh[0]
    gmax = float(abs(_galerkin_kernel(np.array([diam], dtype=np.longdouble), alpha)[0])) + 1.0
    spread = 2.0 * (1 / h[:-1] + 1 / h[1:])
    scale = float(np.finfo(np.longdouble).eps) * gmax / (cd * 0.25 * rel_noise)
    I, J = [], []
    for i0 in range(0, n, block):
        i1 = min(n, i0 + block)
        gap = np.maximum(lo[None, :] - hi[i0:i1, None], lo[i0:i1, None] - hi[None, :])
        big = np.maximum(size[None, :], size[i0:i1, None])
        dist = np.abs(x[None, :] - x[i0:i1, None])
        sep = (gap >= 2.0 * big) & (np.arange(n)[None, :] > np.arange(i0, i1)[:, None])
        with np.errstate(divide="ignore"):
            ratio = (scale * (spread / size)[i0:i1, None] * (spread / size)[None, :]
                     * dist ** (1.0 + alpha))
        ii, jj = np.nonzero(sep & (ratio > 1.0))
        I.append(ii + i0)
        J.append(jj)
    I, J = np.concatenate(I), np.concatenate(J)
    if I.size == 0:
        return
    gap = np.maximum(lo[J] - hi[I], lo[I] - hi[J])
    near = gap < 8.0 * np.maximum(size[I], size[J])
    for q, mask in ((5, near), (3, ~near)):
        i, j = I[mask], J[mask]
        if i.size == 0:
            continue
        s, w = np.polynomial.legendre.leggauss(q)
        s, w = 0.5 * (s + 1), 0.5 * w
        pts = np.concatenate([mesh[:-2, None] + h[:-1, None] * s,
                              mesh[1:-1, None] + h[1:, None] * s], axis=1)
        wts = np.concatenate([h[:-1, None] * w * s, h[1:, None] * w * (1 - s)], axis=1)
        for k in range(0, i.size, 50000):
            ik, jk = i[k:k + 50000], j[k:k + 50000]
            r = np.abs(pts[ik][:, :, None] - pts[jk][:, None, :])
            val = -cd * np.einsum("kp,kpq,kq->k", wts[ik], r ** (-1.0 - alpha), wts[jk])
            K[ik, jk] = val
            K[jk, ik] = val


def _cell_stiffness(mesh: np.ndarray, alpha: float) -> np.ndarray:
    """P0 Galerkin matrix on the dual cells, valid for alpha < 1.

    Cell indicators lie in the energy space when alpha < 1, and every entry
    has a closed form through F(r) = r^{1-alpha} / (-alpha (1-alpha)), the
    second antiderivative of r^{-1-alpha}. The result is an M-matrix whose
    row sums equal the exact exterior killing integrated over each cell.
    """
    x = mesh[1:-1]
    edges = np.concatenate([[mesh[0]], 0.5 * (x[1:] + x[:-1]), [mesh[-1]]])
    lo, hi = edges[:-1], edges[1:]
    cd = c_d_constant(alpha, 1)

    def F(r):
        return np.where(r > 0, np.abs(r) ** (1 - alpha), 0.0) / (-alpha * (1 - alpha))

    A, B = lo[:, None], hi[:, None]
    C, D = lo[None, :], hi[None, :]
    inter = np.triu(F(C - B) + F(D - A) - F(C - A) - F(D - B), 1)
    K = -cd * (inter + inter.T)
    np.fill_diagonal(K, cd * 2.0 * (hi - lo) ** (1 - alpha) / (alpha * (1 - alpha)))
    return K


def exterior_killing(domain, x, alpha: float) -> np.ndarray:
    """kappa(x) = c int_{D^c} |x-y|^{-1-alpha} dy in closed form (d=1)."""
    x = np.asarray(x, dtype=float)
    a, b = _endpoints(domain)
    cd = c_d_constant(alpha, 1)
    with np.errstate(divide="ignore"):
        out = (x - a) ** (-alpha)
        if math.isfinite(b):
            out = out + (b - x) ** (-alpha)
    return cd / alpha * out


def _endpoints(domain, truncation=None):
    if isinstance(domain, Interval):
        return domain.a, domain.b
    if isinstance(domain, Ball) and domain.dimension == 1:
        return domain.center[0] - domain.radius, domain.center[0] + domain.radius
    if isinstance(domain, (HalfLine, HalfSpace)):
        return 0.0, math.inf if truncation is None else truncation
    raise TypeError(f"unsupported domain {domain!r}")


@dataclass(frozen=True)
class DirichletOperator:
    """Discrete operator on functions vanishing outside the domain.

    ``matrix`` is the symmetric Galerkin form (the negative stiffness matrix);
    the operator acting on nodal values is ``A_h = diag(1/weights) @ matrix``,
    and ``killing`` holds kappa_i = -(A_h 1)_i. ``basis`` is "p1" (hat
    functions) or "p0" (dual-cell indicators).
    """

    grid: Grid
    matrix: np.ndarray
    killing: np.ndarray
    alpha: float
    basis: str = "p1"

    @property
    def weights(self) -> np.ndarray:
        return self.grid.weights

    @property
    def size(self) -> int:
        return self.grid.size

    def apply(self, u) -> np.ndarray:
        v = u.values if isinstance(u, GridFunction) else np.asarray(u, dtype=float)
        return (self.matrix @ v) / self.weights

    def __matmul__(self, u):
        out = self.apply(u)
        return GridFunction(self.grid, out) if isinstance(u, GridFunction) else out

    def dense(self) -> np.ndarray:
        """A_h as an explicit (non-symmetric) matrix."""
        return self.matrix / self.weights[:, None]

    def symmetric_form(self) -> np.ndarray:
        """W^{-1/2} matrix W^{-1/2}, similar to A_h and symmetric."""
        s = 1.0 / np.sqrt(self.weights)
        return s[:, None] * self.matrix * s[None, :]


def build_dirichlet_operator(domain, grid: Grid, alpha: float,
                             basis: str = "auto") -> DirichletOperator:
    """Assemble the discrete operator on a one-dimensional graded grid.

    Truncated half-lines are treated as the interval (0, R) with a zero
    exterior beyond R.

    ``basis="auto"`` uses hat functions, except for alpha < 1 when their
    matrix has a negative off-diagonal entry (the Galerkin form then
    carries a mass-like positive part between neighbours and the discrete
    maximum principle fails); the dual-cell basis is used instead.
    """
    if basis not in ("auto", "p1", "p0"):
        raise ValueError("basis must be 'auto', 'p1' or 'p0'")
    check_alpha(alpha)
    if domain.dimension != 1 or grid.radial:
        raise ValueError("the matrix discretisation is one-dimensional only")
    if grid.size > MAX_NODES:
        raise ValueError(f"at most {MAX_NODES} nodes are supported, got {grid.size}")
    if grid.node_slice != slice(1, -1):
        raise ValueError("grid must have boundary vertices at both ends of its mesh")
    if basis == "p0" and alpha >= 1:
        raise ValueError("the cell basis needs alpha < 1")
    if basis == "p0":
        matrix = -_cell_stiffness(grid.mesh, alpha)
    else:
        matrix = -_stiffness(grid.mesh, alpha)
        if basis == "auto" and alpha < 1:
            off = matrix - np.diag(np.diag(matrix))
            if off.min() < 0:
                matrix, basis = -_cell_stiffness(grid.mesh, alpha), "p0"
    basis = "p1" if basis == "auto" else basis
    killing = -(matrix.sum(axis=1)) / grid.weights
    return DirichletOperator(grid, matrix, killing, float(alpha), basis)


def operator_dump_rows(op: DirichletOperator, max_nodes: int = 256):
    """(i, j, entry) rows of A_h for small grids."""
    if op.size > max_nodes:
        raise ValueError(f"operator dump is limited to {max_nodes} nodes")
    A = op.dense()
    return [(i, j, float(A[i, j])) for i in range(op.size) for j in range(op.size)]
