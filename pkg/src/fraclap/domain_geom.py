"""Canonical domains, boundary distance, the dyadic partition and graded grids."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import numpy as np
from scipy import integrate, special
from scipy.interpolate import CubicSpline

__all__ = [
    "Interval", "HalfLine", "Ball", "HalfSpace",
    "distance", "ZetaPartition", "build_partition", "default_partition",
    "Grid", "graded_grid", "regularized_distance", "interior_boundary_integral",
    "grid_dump_rows", "psi_values",
]

DEFAULT_TRUNCATION = 64.0


@dataclass(frozen=True)
class Interval:
    a: float = -1.0
    b: float = 1.0

    def __post_init__(self):
        if not self.a < self.b:
            raise ValueError("Interval needs a < b")

    dimension = 1
    bounded = True

    @property
    def inradius(self) -> float:
        return 0.5 * (self.b - self.a)

    @property
    def measure(self) -> float:
        return self.b - self.a

    def rho(self, x):
        x = np.asarray(x, dtype=float)
        return np.clip(np.minimum(x - self.a, self.b - x), 0.0, None)

    def kinks(self):
        return [0.5 * (self.a + self.b)]


@dataclass(frozen=True)
class HalfLine:
    """The set (0, inf)."""

    dimension = 1
    bounded = False
    inradius = math.inf

    def rho(self, x):
        return np.clip(np.asarray(x, dtype=float), 0.0, None)

    def kinks(self):
        return []


@dataclass(frozen=True)
class Ball:
    center: tuple = (0.0,)
    radius: float = 1.0

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("Ball needs radius > 0")
        if len(self.center) not in (1, 2, 3):
            raise ValueError("Ball dimension must be 1, 2 or 3")

    bounded = True

    @property
    def dimension(self) -> int:
        return len(self.center)

    @property
    def inradius(self) -> float:
        return self.radius

    @property
    def measure(self) -> float:
        d = self.dimension
        return math.pi ** (d / 2) / math.gamma(d / 2 + 1) * self.radius ** d

    def rho(self, x):
        x = np.asarray(x, dtype=float)
        c = np.asarray(self.center, dtype=float)
        if self.dimension == 1 and (x.ndim == 0 or x.shape[-1] != 1):
            r = np.abs(x - c[0])
        else:
            r = np.linalg.norm(x - c, axis=-1)
        return np.clip(self.radius - r, 0.0, None)


@dataclass(frozen=True)
class HalfSpace:
    """{x : x^1 > 0} in R^d."""

    dim: int = 2

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ValueError("HalfSpace dimension must be 1, 2 or 3")

    bounded = False
    inradius = math.inf

    @property
    def dimension(self) -> int:
        return self.dim

    def rho(self, x):
        x = np.asarray(x, dtype=float)
        first = x if (self.dim == 1 and (x.ndim == 0 or x.shape[-1] != 1)) else x[..., 0]
        return np.clip(first, 0.0, None)


def distance(domain, x):
    """rho(x) inside the domain, 0 outside."""
    out = domain.rho(x)
    return float(out) if np.ndim(out) == 0 else out


# -- mollified dyadic partition ---------------------------------------------------

def _bump(u):
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    m = np.abs(u) < 1
    out[m] = np.exp(-1.0 / (1.0 - u[m] ** 2))
    return out


@lru_cache(maxsize=1)
def _bump_cdf():
    z = integrate.quad(lambda v: float(_bump(v)), -1, 1, epsabs=1e-15)[0]
    u = np.linspace(-1, 1, 4001)
    vals = np.zeros_like(u)
    for i in range(1, u.size):
        vals[i] = vals[i - 1] + integrate.quad(lambda v: float(_bump(v)), u[i - 1], u[i],
                                               epsabs=1e-16)[0]
    return CubicSpline(u, vals / z), z


def _cdf(u, m=0):
    """Unit-mass bump CDF on [-1, 1] and its first two derivatives."""
    u = np.asarray(u, dtype=float)
    spline, z = _bump_cdf()
    inside = np.abs(u) < 1
    if m == 0:
        out = np.where(u >= 1, 1.0, 0.0)
        out[inside] = spline(u[inside])
        return out
    out = np.zeros_like(u)
    ui = u[inside]
    b = np.exp(-1.0 / (1.0 - ui ** 2)) / z
    if m == 1:
        out[inside] = b
    else:
        out[inside] = b * (-2.0 * ui / (1.0 - ui ** 2) ** 2)
    return out


@dataclass(frozen=True)
class ZetaPartition:
    """zeta_n(x) = eta(e^n rho(x)), eta a mollified indicator of (k3, k4).

    With mollifier half-width w = k1/4 and k3 = k1 + w, k4 = k2 - w the
    support of eta is exactly (k1, k2).
    """

    domain: object
    k1: float
    k2: float
    n_min: int
    n_max: int

    @property
    def width(self) -> float:
        return 0.25 * self.k1

    def eta(self, s, m=0):
        w = self.width
        k3, k4 = self.k1 + w, self.k2 - w
        return (_cdf((s - k3) / w, m) - _cdf((s - k4) / w, m)) / w ** m

    def indices(self):
        return range(self.n_min, self.n_max + 1)

    def zeta(self, n, rho, m=0):
        """m-th derivative of zeta_n along the normal direction (rho' = 1)."""
        rho = np.asarray(rho, dtype=float)
        s = math.exp(n) * rho
        out = math.exp(m * n) * self.eta(s, m)
        return np.where(rho > 0, out, 0.0)

    def zeta_sum(self, rho):
        rho = np.asarray(rho, dtype=float)
        return sum(self.zeta(n, rho) for n in self.indices())

    def psi(self, rho, m=0):
        rho = np.asarray(rho, dtype=float)
        return sum(math.exp(-n) * self.zeta(n, rho, m) for n in self.indices())

    def covers(self, rho) -> bool:
        rho = np.asarray(rho, dtype=float)
        rho = rho[rho > 0]
        if rho.size == 0:
            return True
        lo = self.k1 * math.exp(-self.n_max)
        hi = self.k2 * math.exp(-self.n_min)
        return bool(rho.min() > lo * math.e and rho.max() < hi)


def build_partition(domain, k1: float = 1.0, k2: float = math.e ** 2,
                    rho_min: float = 1e-14, rho_max: float | None = None) -> ZetaPartition:
    """Partition whose active indices cover rho in [rho_min, rho_max]."""
    if not (k1 > 0 and k2 / k1 > math.e):
        raise ValueError("need k2/k1 > e for the supports to overlap")
    if rho_max is None:
        rho_max = domain.inradius if math.isfinite(domain.inradius) else DEFAULT_TRUNCATION
    # zeta_n active iff k1 e^{-n} < rho < k2 e^{-n} for some rho in range
    n_min = math.floor(math.log(k1 / rho_max)) + 1
    n_max = math.ceil(math.log(k2 / rho_min)) + 1
    return ZetaPartition(domain, float(k1), float(k2), int(n_min), int(n_max))


def default_partition(domain) -> ZetaPartition:
    return build_partition(domain)


# -- graded grids ----------------------------------------------------------------

_GJ_CACHE: dict = {}


def _gauss_jacobi(n: int, beta: float):
    key = (n, round(beta, 14))
    if key not in _GJ_CACHE:
        # weight s^beta on [0, 1]
        x, w = special.roots_jacobi(n, 0.0, beta)
        _GJ_CACHE[key] = (0.5 * (x + 1.0), w / 2.0 ** (beta + 1.0))
    return _GJ_CACHE[key]


_GL = np.polynomial.legendre.leggauss(10)


@dataclass(frozen=True)
class Grid:
    """Nodes of a 1-d (or radial) mesh with lumped hat-function weights.

    ``mesh`` includes the boundary vertices; ``nodes`` are the unknowns
    (interior vertices). For balls the coordinate is the radius and all
    integrals carry the |S^{d-1}| r^{d-1} Jacobian, so grid functions on
    balls are radial profiles.
    """

    domain: object
    mesh: np.ndarray
    grading: float
    radial: bool = False
    truncation: float | None = None
    node_slice: slice = field(default=slice(1, -1))

    @property
    def nodes(self) -> np.ndarray:
        return self.mesh[self.node_slice]

    @property
    def dimension(self) -> int:
        return self.domain.dimension

    @property
    def size(self) -> int:
        return self.nodes.size

    @cached_property
    def rho(self) -> np.ndarray:
        if self.radial:
            return np.clip(self.domain.radius - self.nodes, 0.0, None)
        return self.domain.rho(self.nodes)

    @cached_property
    def psi(self) -> np.ndarray:
        """Regularized distance at the nodes (default partition)."""
        return regularized_distance(self).values

    @property
    def measure(self) -> float:
        if self.radial:
            return self.domain.measure
        return float(self.mesh[-1] - self.mesh[0])

    def _rho_of(self, x):
        if self.radial:
            return np.clip(self.domain.radius - x, 0.0, None)
        if isinstance(self.domain, HalfLine):
            return np.clip(x, 0.0, None)
        return self.domain.rho(x)

    def _jac(self, x):
        if not self.radial:
            return np.ones_like(x)
        d = self.dimension
        return 2 * math.pi ** (d / 2) / math.gamma(d / 2) * x ** (d - 1)

    def _cells(self):
        """Cells split at kinks of rho, with the index of their left vertex."""
        m = self.mesh
        lo, hi, idx = list(m[:-1]), list(m[1:]), list(range(m.size - 1))
        kinks = [] if self.radial else self.domain.kinks() if hasattr(self.domain, "kinks") else []
        for k in kinks:
            j = np.searchsorted(m, k) - 1
            if 0 <= j < m.size - 1 and m[j] < k < m[j + 1]:
                lo[j], hi[j] = m[j], k
                lo.append(k), hi.append(m[j + 1]), idx.append(j)
        return np.array(lo), np.array(hi), np.array(idx)

    def moment_weights(self, beta: float = 0.0, include_boundary: bool = True) -> np.ndarray:
        """Weights w with sum_i w_i g(x_i) = int_D I[g] rho^beta dx.

        I[g] is the hat interpolant over interior nodes, extended by the
        nearest node value on the boundary cells. Exact for g = 1 and all
        beta > -1 (Gauss-Jacobi on boundary cells). For beta <= -1 the
        integral diverges and the plain nodal rule w_i rho_i^beta is returned.
        With ``include_boundary=False`` the cells touching the boundary are
        left out (any beta is then allowed); see :meth:`boundary_cells`.
        """
        if beta <= -1.0 and include_boundary:
            return self.weights * self.rho ** beta
        lo, hi, idx = self._cells()
        m = self.mesh
        n_nodes = m.size
        acc = np.zeros(n_nodes)
        rlo, rhi = self._rho_of(lo), self._rho_of(hi)
        at_bdry = (np.minimum(rlo, rhi) <= 0.0)
        h = hi - lo
        # smooth cells: Gauss-Legendre
        xg, wg = _GL
        sm = ~at_bdry
        if np.any(sm):
            pts = 0.5 * (lo[sm] + hi[sm])[:, None] + 0.5 * h[sm][:, None] * xg[None, :]
            f = self._rho_of(pts) ** beta * self._jac(pts) * (0.5 * h[sm])[:, None] * wg[None, :]
            j = idx[sm]
            left = m[j][:, None]
            right = m[j + 1][:, None]
            phi_r = (pts - left) / (right - left)
            np.add.at(acc, j, (f * (1 - phi_r)).sum(axis=1))
            np.add.at(acc, j + 1, (f * phi_r).sum(axis=1))
        # boundary cells: Gauss-Jacobi in the distance variable
        if include_boundary and np.any(at_bdry):
            sg, wj = _gauss_jacobi(12, beta)
            for a, b, j in zip(lo[at_bdry], hi[at_bdry], idx[at_bdry]):
                if self._rho_of(np.array([a]))[0] <= 0.0:
                    x0, sgn = a, 1.0
                else:
                    x0, sgn = b, -1.0
                pts = x0 + sgn * sg * (b - a)
                # rho = s (b - a) in local coordinate s
                f = (b - a) ** (beta + 1.0) * wj * self._jac(pts)
                phi_r = (pts - m[j]) / (m[j + 1] - m[j])
                np.add.at(acc, j, (f * (1 - phi_r)).sum())
                np.add.at(acc, j + 1, (f * phi_r).sum())
        return self._fold(acc)

    def boundary_cells(self):
        """Cells with a vertex on the boundary, as tuples
        (node index next to the boundary, the following node index, cell length)."""
        return list(self._boundary_cells)

    @cached_property
    def _boundary_cells(self):
        lo, hi, _ = self._cells()
        lo, hi = np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)
        ra, rb = self._rho_of(lo), self._rho_of(hi)
        out = []
        start = self.node_slice.start or 0
        n = self.size
        for i in np.flatnonzero(np.minimum(ra, rb) <= 0):
            # mesh index of the interior vertex of this cell
            x_in = hi[i] if ra[i] <= 0 else lo[i]
            k = int(np.searchsorted(self.mesh, x_in)) - start
            nxt = k + 1 if ra[i] <= 0 else k - 1
            if 0 <= k < n and 0 <= nxt < n:
                out.append((k, nxt, float(hi[i] - lo[i])))
        return tuple(out)

    def _fold(self, acc: np.ndarray) -> np.ndarray:
        """Move vertex masses of boundary vertices onto their neighbours."""
        acc = acc.copy()
        s = self.node_slice
        start = s.start or 0
        stop = self.mesh.size + s.stop if (s.stop is not None and s.stop < 0) else self.mesh.size
        if start > 0:
            acc[start] += acc[:start].sum()
        if stop < self.mesh.size:
            acc[stop - 1] += acc[stop:].sum()
        return acc[s]

    @cached_property
    def weights(self) -> np.ndarray:
        return self.moment_weights(0.0)

    def integrate(self, values, beta: float = 0.0) -> float:
        return float(np.dot(self.moment_weights(beta), values))


def _grade(n_cells: int, q: float) -> np.ndarray:
    """n_cells+1 points in [0, 1] clustered like s^q at 0."""
    s = np.linspace(0.0, 1.0, n_cells + 1)
    return s ** q


def graded_grid(domain, n_nodes: int, grading: float = 2.0,
                truncation: float | None = None) -> Grid:
    """Boundary-graded grid with ``n_nodes`` interior nodes."""
    if n_nodes < 16:
        raise ValueError("n_nodes must be at least 16")
    if grading < 1:
        raise ValueError("grading must be >= 1")
    if isinstance(domain, Interval):
        cells = n_nodes + 1
        s = np.linspace(0.0, 2.0, cells + 1)
        half = 0.5 * (domain.b - domain.a)
        x = np.where(s <= 1, domain.a + half * s ** grading,
                     domain.b - half * np.abs(2 - s) ** grading)
        x[0], x[-1] = domain.a, domain.b
        return Grid(domain, x, grading)
    if isinstance(domain, (HalfLine,)) or (isinstance(domain, HalfSpace) and domain.dim == 1):
        if truncation is None:
            raise ValueError("unbounded domain: pass an explicit truncation radius")
        x = truncation * _grade(n_nodes + 1, grading)
        return Grid(HalfLine(), x, grading, truncation=float(truncation))
    if isinstance(domain, Ball):
        if domain.dimension == 1:
            iv = Interval(domain.center[0] - domain.radius, domain.center[0] + domain.radius)
            return graded_grid(iv, n_nodes, grading)
        # radial mesh: uniform near the center, graded towards r = R
        rho = domain.radius * _grade(n_nodes, grading)
        r = np.sort(domain.radius - rho)
        r[0] = 0.0
        return Grid(domain, r, grading, radial=True, node_slice=slice(0, -1))
    if isinstance(domain, HalfSpace):
        raise ValueError("grids on half-spaces of dimension > 1 are not supported")
    raise TypeError(f"unsupported domain {domain!r}")


def regularized_distance(grid: Grid, partition: ZetaPartition | None = None):
    """psi sampled on the grid nodes, as a GridFunction."""
    from .fraclap_op import GridFunction

    if partition is None:
        partition = build_partition(grid.domain, rho_min=max(grid.rho.min(), 1e-300) * 0.5,
                                    rho_max=_rho_max(grid))
    rho = grid.rho
    if not partition.covers(rho):
        raise ValueError("partition index range does not cover the grid's distance range")
    return GridFunction(grid, partition.psi(rho))


def _rho_max(grid: Grid) -> float | None:
    if math.isfinite(grid.domain.inradius):
        return None
    return float(grid.rho.max()) * 1.01


def psi_values(grid: Grid) -> np.ndarray:
    return grid.psi


def interior_boundary_integral(domain, lam: float, x0, r: float, n: int = 4000) -> float:
    """Average of d_x^lam over the ball B_r(x0).

    Exterior points have d_x = 0 and contribute 0**lam with 0**0 = 1; for
    lam < 0 they are dropped (the power would be infinite).
    """
    if lam <= -1:
        raise ValueError("lambda must exceed -1")
    ext = 1.0 if lam == 0 else 0.0
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    d = x0.size
    if d == 1:
        def f(y):
            rho = float(domain.rho(np.array(y)))
            return rho ** lam if rho > 0 else ext
        # breakpoints where rho is singular or kinked
        pts = [p for p in _breaks_1d(domain) if x0[0] - r < p < x0[0] + r]
        val = integrate.quad(f, x0[0] - r, x0[0] + r, points=pts or None, limit=400,
                             epsabs=1e-13, epsrel=1e-10)[0]
        return val / (2 * r)
    if isinstance(domain, Ball):
        # polar coordinates around x0, in the plane/space spanned by x0 - c
        c = np.asarray(domain.center, dtype=float)
        u = (x0 - c)
        nu = np.linalg.norm(u)
        e = u / nu if nu > 0 else np.eye(d)[0]
        R = domain.radius
        # distance from x0 + s*e_theta; integrate in s with weight of rho^lam
        if d == 2:
            th, wt = np.polynomial.legendre.leggauss(256)
            th = np.pi * (th + 1)
            wt = wt * np.pi
            tot = 0.0
            for a, wa in zip(th, wt):
                dirv = np.cos(a) * e + np.sin(a) * np.array([-e[1], e[0]])
                tot += wa * _radial_line(domain, x0, dirv, r, lam, d, ext)
            return tot / (np.pi * r ** 2)
        th, wt = np.polynomial.legendre.leggauss(128)
        cth = th
        tot = 0.0
        e2 = np.linalg.svd(e[None, :])[2][1]
        for ct, wa in zip(cth, wt):
            dirv = ct * e + math.sqrt(1 - ct ** 2) * e2
            tot += 2 * np.pi * wa * _radial_line(domain, x0, dirv, r, lam, d, ext)
        return tot / (4.0 / 3.0 * np.pi * r ** 3)
    if isinstance(domain, HalfSpace):
        # reduce to the distribution of the first coordinate over the ball
        k = d - 1
        cn = math.pi ** (k / 2) / math.gamma(k / 2 + 1)

        def f(y):
            y1 = x0[0] + y
            return (y1 ** lam if y1 > 0 else ext) * cn * (r * r - y * y) ** (k / 2)
        pts = [-x0[0]] if -r < -x0[0] < r else None
        val = integrate.quad(f, -r, r, points=pts, limit=400, epsabs=1e-13)[0]
        vol = math.pi ** (d / 2) / math.gamma(d / 2 + 1) * r ** d
        return val / vol
    raise TypeError("unsupported domain")


def _radial_line(domain, x0, dirv, r, lam, d, ext):
    def f(s):
        rho = float(domain.rho(x0 + s * dirv))
        return (rho ** lam if rho > 0 else ext) * s ** (d - 1)
    # locate the boundary crossing to help the integrator
    c = np.asarray(domain.center, dtype=float)
    w = x0 - c
    b = np.dot(w, dirv)
    disc = b * b - (np.dot(w, w) - domain.radius ** 2)
    pts = []
    if disc > 0:
        for s in (-b - math.sqrt(disc), -b + math.sqrt(disc)):
            if 0 < s < r:
                pts.append(s)
    return integrate.quad(f, 0, r, points=pts or None, limit=200, epsabs=1e-12)[0]


def _breaks_1d(domain):
    if isinstance(domain, Interval):
        return [domain.a, domain.b, 0.5 * (domain.a + domain.b)]
    if isinstance(domain, Ball):
        c = domain.center[0]
        return [c - domain.radius, c + domain.radius, c]
    return [0.0]


def grid_dump_rows(grid: Grid, partition: ZetaPartition | None = None):
    """Rows (node, weight, rho, psi, zeta_sum) for the debugging CSV."""
    if partition is None:
        partition = build_partition(grid.domain, rho_min=max(grid.rho.min(), 1e-300) * 0.5,
                                    rho_max=_rho_max(grid))
    psi = partition.psi(grid.rho)
    zs = partition.zeta_sum(grid.rho)
    return [(float(a), float(b), float(c), float(d), float(e))
            for a, b, c, d, e in zip(grid.nodes, grid.weights, grid.rho, psi, zs)]
