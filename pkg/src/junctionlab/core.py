"""Geometry of the segregation target, the triple-junction profile, grids and traces.

Conventions
-----------
Polar coordinates always refer to the last two Cartesian axes,
``x_{d-1} = rho cos(theta)`` and ``x_d = rho sin(theta)``, with
``theta`` in ``(-pi, pi]``.  Fields store their components along axis 0,
so a field on a ``d``-dimensional grid has shape ``(N, n, ..., n)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional

import numpy as np
from scipy.spatial import cKDTree

from ._validation import InvalidTargetError, as_points, check_choice, check_dim, check_positive

THIRD = np.pi / 3.0


# --------------------------------------------------------------------------- target tree

def _check_sigma_point(x, name):
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError(f"{name} must be a 1-D vector")
    if np.any(x < 0) or np.count_nonzero(x) > 1:
        raise InvalidTargetError(f"{name}={x.tolist()} is not a point of Sigma_N")
    return x


def sigma_distance(X, Z) -> float:
    """Geodesic distance on the tree Sigma_N.

    Parameters
    ----------
    X, Z : array_like, shape (N,)
        Points of Sigma_N (nonnegative, at most one positive entry).

    Returns
    -------
    float
        ``|X_i - Z_i|`` on a common branch and ``|X_i| + |Z_j|`` across
        branches; both cases equal ``sum_j |X_j - Z_j|``.
    """
    X = _check_sigma_point(X, "X")
    Z = _check_sigma_point(Z, "Z")
    if X.shape != Z.shape:
        raise ValueError("X and Z must have the same length")
    return float(np.abs(X - Z).sum())


def sigma_distance_field(u, v):
    """Pointwise tree distance between two segregated component stacks (axis 0)."""
    return np.abs(np.asarray(u, float) - np.asarray(v, float)).sum(axis=0)


def project_sigma(v, axis=-1):
    """Nearest point of Sigma_N among nonnegative candidates.

    Negative entries are clamped to zero and only the largest remaining
    entry is kept; ties go to the lowest index.  Works on a single vector or
    vectorized along ``axis``.
    """
    v = np.moveaxis(np.clip(np.asarray(v, dtype=float), 0.0, None), axis, 0)
    k = np.argmax(v, axis=0)
    keep = np.arange(v.shape[0]).reshape((-1,) + (1,) * (v.ndim - 1)) == k[None]
    return np.moveaxis(np.where(keep, v, 0.0), 0, axis)


def project_field(comps):
    """Apply :func:`project_sigma` at every node of a ``(N, ...)`` stack."""
    return project_sigma(comps, axis=0)


# --------------------------------------------------------------------------- polar helpers

def wrap_angle(t):
    """Map angles to ``[-pi, pi)``."""
    return (np.asarray(t, float) + np.pi) % (2 * np.pi) - np.pi


def planar_polar(points):
    """Polar radius and angle in the ``(x_{d-1}, x_d)`` plane."""
    p = np.asarray(points, float)
    a, b = p[..., -2], p[..., -1]
    return np.hypot(a, b), np.arctan2(b, a)


def y_angular(theta, rotation=0.0):
    """Angular part of the three Y components, shape ``(3, ...)``.

    Sector ``i`` (1-based) is ``[pi - 2pi i/3, pi - 2pi (i-1)/3]``, i.e.
    ``[pi/3, pi]``, ``[-pi/3, pi/3]`` and ``[-pi, -pi/3]``.  Shared sector
    edges are assigned to one sector only so that the output is exactly
    segregated.
    """
    t = wrap_angle(np.asarray(theta, float) - rotation)
    val = np.abs(np.cos(1.5 * t))
    s1 = t >= THIRD
    s3 = t < -THIRD
    s2 = ~(s1 | s3)
    return np.stack([val * s1, val * s2, val * s3])


@dataclass(frozen=True)
class YProfile:
    """The 3/2-homogeneous triple-junction profile ``c * Y`` rotated by ``rotation``.

    Components 1..3 carry the planar profile extended cylindrically in
    ``x_1 .. x_{d-2}``; components 4..N vanish identically.
    """

    N: int = 3
    c: float = 1.0
    rotation: float = 0.0
    d: int = 2

    def __post_init__(self):
        if int(self.N) < 3:
            raise InvalidTargetError(f"the Y profile needs N >= 3 components, got N={self.N}")
        check_positive("c", self.c, strict=False)
        check_dim(self.d)

    def angular(self, theta):
        out = np.zeros((self.N,) + np.shape(theta))
        out[:3] = self.c * y_angular(theta, self.rotation)
        return out

    def __call__(self, points):
        p = as_points(points, self.d)
        rho, theta = planar_polar(p)
        return self.angular(theta) * rho ** 1.5

    def grad_norm(self, points):
        """``|grad Y_i|`` on the support of component i (``1.5 c rho^{1/2}``)."""
        rho, _ = planar_polar(as_points(points, self.d))
        return 1.5 * self.c * np.sqrt(rho)

    def signed(self, points):
        """Signed scalar picture ``-Y_1 + Y_2 - Y_3``."""
        v = self(points)
        return -v[0] + v[1] - v[2]

    def interface_angles(self):
        """Angles of the three interface rays (1|2, 2|3, 3|1)."""
        return wrap_angle(np.array([THIRD, -THIRD, np.pi]) + self.rotation)


def make_Y(N: int = 3, c: float = 1.0, rotation: float = 0.0, d: int = 2) -> YProfile:
    """Build the evaluator of ``c * Y`` rotated by ``rotation`` radians.

    Raises
    ------
    InvalidTargetError
        If ``N < 3``.
    """
    return YProfile(int(N), float(c), float(rotation), check_dim(d))


MODE_KINDS = ("Yhat", "U0_times_xj", "Z", "V0_times_xj")


def make_linearized_mode(kind: str, j: Optional[int] = None, d: int = 2) -> Callable:
    """Evaluator of a linearized mode of the slit problem.

    Parameters
    ----------
    kind : {"Yhat", "U0_times_xj", "Z", "V0_times_xj"}
        ``Yhat = rho^{3/2} cos(3 theta/2)``, ``Z = -rho^{3/2} sin(3 theta/2)``,
        ``U0 = rho^{1/2} cos(theta/2)`` and ``V0 = rho^{1/2} sin(theta/2)``.
    j : int, optional
        1-based cylindrical axis ``x_j`` with ``j <= d-2`` multiplying U0/V0.
        ``None`` evaluates the bare 1/2-homogeneous factor.
    d : int
        Ambient dimension.
    """
    check_choice("kind", kind, MODE_KINDS)
    d = check_dim(d)
    if j is not None and not (1 <= int(j) <= d - 2):
        raise ValueError(f"axis index j={j} out of range 1..{d - 2}")

    def mode(points):
        p = as_points(points, d)
        rho, th = planar_polar(p)
        if kind == "Yhat":
            return rho ** 1.5 * np.cos(1.5 * th)
        if kind == "Z":
            return -(rho ** 1.5) * np.sin(1.5 * th)
        base = np.sqrt(rho) * (np.cos(0.5 * th) if kind == "U0_times_xj" else np.sin(0.5 * th))
        return base if j is None else base * p[..., int(j) - 1]

    mode.kind, mode.j, mode.d = kind, j, d
    return mode


# --------------------------------------------------------------------------- grids

@dataclass(frozen=True)
class GridSpec:
    """Uniform node grid on ``[-1, 1]^d`` with the closed unit ball as domain.

    Nodes outside the ball are inert.  Boundary values live on the
    one-node-thick shell of ball nodes that have a neighbour outside the ball.
    With ``ball=False`` the whole box is the domain and the shell is its
    outer face layer.
    """

    d: int
    h: float
    ball: bool = True

    def __post_init__(self):
        check_dim(self.d)
        check_positive("h", self.h)
        m = 2.0 / self.h
        if abs(m - round(m)) > 1e-9 * max(1.0, m) or round(m) < 2:
            raise ValueError(f"h={self.h} must divide 2 into an integer number (>= 2) of cells")

    @property
    def n(self) -> int:
        return int(round(2.0 / self.h)) + 1

    @property
    def shape(self):
        return (self.n,) * self.d

    @cached_property
    def axis(self):
        return np.linspace(-1.0, 1.0, self.n)

    @cached_property
    def points(self):
        return np.stack(np.meshgrid(*([self.axis] * self.d), indexing="ij"), axis=-1)

    @cached_property
    def radius(self):
        return np.sqrt((self.points ** 2).sum(-1))

    @cached_property
    def mask(self):
        if not self.ball:
            return np.ones(self.shape, dtype=bool)
        return self.radius <= 1.0 + 1e-12

    @cached_property
    def shell(self):
        m = self.mask
        pad = np.pad(m, 1, constant_values=False)
        inner = np.ones_like(m)
        for ax in range(self.d):
            for s in (-1, 1):
                inner &= np.roll(pad, s, axis=ax)[tuple([slice(1, -1)] * self.d)]
        return m & ~inner

    @cached_property
    def free(self):
        return self.mask & ~self.shell

    def index_of(self, x):
        """Nearest node multi-index of a point."""
        x = np.asarray(x, float)
        return tuple(np.clip(np.rint((x + 1.0) / self.h).astype(int), 0, self.n - 1))


@dataclass
class SegregatedField:
    """``N`` nonnegative grid functions with pointwise disjoint supports.

    Attributes
    ----------
    grid : GridSpec
    comps : ndarray, shape (N, *grid.shape)
        Component values; entries outside the ball mask are zero.
    segregation_tol : float
        Tolerance for pairwise products and the free-interface threshold.
    """

    grid: GridSpec
    comps: np.ndarray
    segregation_tol: float = 1e-3

    def __post_init__(self):
        self.comps = np.asarray(self.comps, dtype=float)
        if self.comps.shape[1:] != self.grid.shape:
            raise ValueError(f"comps shape {self.comps.shape} does not match grid {self.grid.shape}")
        if np.any(self.comps < 0):
            raise InvalidTargetError("segregated components must be nonnegative")

    @property
    def N(self) -> int:
        return self.comps.shape[0]

    @classmethod
    def from_function(cls, grid: GridSpec, func, segregation_tol=1e-3, mask=True):
        vals = np.asarray(func(grid.points), float)
        if mask:
            vals = vals * grid.mask
        return cls(grid, np.clip(vals, 0.0, None), segregation_tol)

    def segregation_residual(self) -> float:
        """Largest pairwise product ``u_i u_j`` over all nodes."""
        c = self.comps
        srt = np.sort(c, axis=0)
        return float((srt[-1] * srt[-2]).max()) if self.N > 1 else 0.0

    def labels(self, threshold: float = 0.0):
        """Phase label per node: 0 where every component is ``<= threshold``, else argmax+1."""
        lab = np.argmax(self.comps, axis=0) + 1
        lab[self.comps.max(axis=0) <= threshold] = 0
        return lab

    def scaled(self, c):
        return SegregatedField(self.grid, self.comps * float(c), self.segregation_tol)


def free_interface(u: SegregatedField, threshold: Optional[float] = None):
    """Boolean mask of free-interface nodes.

    A ball node belongs to the interface when every component there is at
    most ``threshold`` (default ``10 * segregation_tol`` relative to the peak
    value) and at least two distinct phases appear among its ``2d``
    neighbours.
    """
    g = u.grid
    if threshold is None:
        threshold = 10.0 * u.segregation_tol * max(u.comps.max(), 1e-300)
    lab = u.labels(0.0)
    small = u.comps.max(axis=0) <= threshold
    pad = np.pad(lab, 1, constant_values=0)
    core = tuple([slice(1, -1)] * g.d)
    seen = np.zeros((u.N,) + g.shape, dtype=bool)
    for ax in range(g.d):
        for s in (-1, 1):
            nb = np.roll(pad, s, axis=ax)[core]
            for k in range(u.N):
                seen[k] |= nb == k + 1
    return g.mask & small & (seen.sum(axis=0) >= 2)


# --------------------------------------------------------------------------- traces

def sigma_lerp(a, b, t):
    """Point at fraction ``t`` on the Sigma_N geodesic from ``a`` to ``b`` (axis 0 = components).

    On a common branch this is the linear interpolant; across branches the
    path runs through the vertex, so the value ``(1-t)|a| - t|b|`` is placed on
    the branch of ``a`` when positive and on that of ``b`` otherwise.
    """
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    t = np.asarray(t, float)
    ia, ib = np.argmax(a, axis=0), np.argmax(b, axis=0)
    na, nb = a.sum(axis=0), b.sum(axis=0)
    lin = (1 - t) * a + t * b
    cross = (ia != ib) & (na > 0) & (nb > 0)
    if not np.any(cross):
        return lin
    s = (1 - t) * na - t * nb
    ea = a / np.where(na > 0, na, 1.0)
    eb = b / np.where(nb > 0, nb, 1.0)
    geo = ea * np.clip(s, 0, None) + eb * np.clip(-s, 0, None)
    return np.where(cross, geo, lin)


def _trace_grid(d, shape):
    if d == 2:
        (M,) = shape
        theta = -np.pi + 2 * np.pi * np.arange(M) / M
        pts = np.stack([np.cos(theta), np.sin(theta)], -1)
        w = np.full(M, 2 * np.pi / M)
        return pts, w
    npsi, nphi = shape
    psi = np.linspace(0.0, np.pi, npsi)
    phi = -np.pi + 2 * np.pi * np.arange(nphi) / nphi
    P, F = np.meshgrid(psi, phi, indexing="ij")
    pts = np.stack([np.cos(P), np.sin(P) * np.cos(F), np.sin(P) * np.sin(F)], -1)
    dpsi, dphi = psi[1] - psi[0], 2 * np.pi / nphi
    w = np.sin(P) * dpsi * dphi
    return pts, w


DEFAULT_TRACE_RES = {2: (3072,), 3: (257, 768)}


@dataclass
class HomogeneousTrace:
    """Segregated function on the unit sphere sampled on a structured grid.

    ``d = 2``: ``M`` uniform angles ``theta_k = -pi + 2 pi k / M``.
    ``d = 3``: polar angle ``psi`` (from the ``x_1`` axis, poles included) by
    azimuth ``phi`` in the ``(x_2, x_3)`` plane, so that the junction axis of a
    cylindrical Y passes through the poles.

    Attributes
    ----------
    d : int
    comps : ndarray, shape (N, M) or (N, npsi, nphi)
    """

    d: int
    comps: np.ndarray

    def __post_init__(self):
        check_dim(self.d)
        self.comps = np.asarray(self.comps, float)
        if self.comps.ndim != self.d:
            raise ValueError("trace comps must have shape (N, M) for d=2 or (N, npsi, nphi) for d=3")
        if np.any(self.comps < 0):
            raise InvalidTargetError("trace components must be nonnegative")

    @property
    def N(self) -> int:
        return self.comps.shape[0]

    @property
    def shape(self):
        return self.comps.shape[1:]

    @cached_property
    def _grid(self):
        return _trace_grid(self.d, self.shape)

    @property
    def points(self):
        return self._grid[0]

    @property
    def weights(self):
        return self._grid[1]

    @classmethod
    def from_function(cls, func, d=2, resolution=None):
        """Sample ``func(points) -> (N, ...)`` on the standard trace grid."""
        d = check_dim(d)
        shape = tuple(resolution) if resolution is not None else DEFAULT_TRACE_RES[d]
        pts, _ = _trace_grid(d, shape)
        vals = np.clip(np.asarray(func(pts), float), 0.0, None)
        return cls(d, vals)

    def norm_sq(self) -> float:
        """``sum_i ||c_i||^2_{L^2(S)}`` by the grid quadrature."""
        return float((self.comps ** 2 * self.weights).sum())

    def segregation_residual(self) -> float:
        srt = np.sort(self.comps, axis=0)
        return float((srt[-1] * srt[-2]).max()) if self.N > 1 else 0.0

    def coarsen(self) -> "HomogeneousTrace":
        """Every other sample in each angular direction (used for extrapolation)."""
        if self.d == 2:
            return HomogeneousTrace(2, self.comps[:, ::2])
        return HomogeneousTrace(3, self.comps[:, ::2, ::2])

    def evaluate(self, dirs):
        """Interpolate the trace at unit directions ``dirs`` (last axis ``d``).

        Linear (``d = 2``) or bilinear (``d = 3``) along geodesics of Sigma_N,
        see :func:`sigma_lerp`; the result stays segregated.
        """
        dirs = as_points(dirs, self.d)
        if self.d == 2:
            M = self.shape[0]
            s = (np.arctan2(dirs[..., 1], dirs[..., 0]) + np.pi) * (M / (2 * np.pi))
            i0 = np.floor(s).astype(int)
            f = s - i0
            i0 %= M
            i1 = (i0 + 1) % M
            return sigma_lerp(self.comps[:, i0], self.comps[:, i1], f)
        npsi, nphi = self.shape
        nrm = np.linalg.norm(dirs, axis=-1)
        psi = np.arccos(np.clip(dirs[..., 0] / np.where(nrm > 0, nrm, 1.0), -1, 1))
        phi = np.arctan2(dirs[..., 2], dirs[..., 1])
        sp = psi * ((npsi - 1) / np.pi)
        j0 = np.clip(np.floor(sp).astype(int), 0, npsi - 2)
        fp = sp - j0
        sf = (phi + np.pi) * (nphi / (2 * np.pi))
        k0 = np.floor(sf).astype(int)
        ff = sf - k0
        k0 %= nphi
        k1 = (k0 + 1) % nphi
        c = self.comps
        return sigma_lerp(sigma_lerp(c[:, j0, k0], c[:, j0, k1], ff),
                          sigma_lerp(c[:, j0 + 1, k0], c[:, j0 + 1, k1], ff), fp)

    def extend(self, points, gamma):
        """Homogeneous extension ``|x|^gamma c(x/|x|)``."""
        p = as_points(points, self.d)
        r = np.linalg.norm(p, axis=-1)
        safe = np.where(r > 0, r, 1.0)
        return self.evaluate(p / safe[..., None]) * r ** gamma


def trace_of_Y(d=2, N=3, c=1.0, rotation=0.0, resolution=None) -> HomogeneousTrace:
    """Trace of ``c * Y`` on the standard sphere grid."""
    return HomogeneousTrace.from_function(make_Y(N, c, rotation, d), d, resolution)


def sphere_quadrature(d: int, n: Optional[int] = None):
    """Fixed quadrature on the unit sphere.

    ``d = 2``: ``n`` uniform midpoint angles (default 1024).
    ``d = 3``: ``n`` Gauss-Legendre nodes in ``x_1`` times ``2n`` uniform
    azimuths (default ``n = 48``); exact for spherical polynomials of degree
    ``< 2n``.

    Returns
    -------
    points : ndarray, shape (Q, d)
    weights : ndarray, shape (Q,)
    """
    d = check_dim(d)
    if d == 2:
        n = 1024 if n is None else int(n)
        th = -np.pi + 2 * np.pi * (np.arange(n) + 0.5) / n
        return np.stack([np.cos(th), np.sin(th)], -1), np.full(n, 2 * np.pi / n)
    n = 48 if n is None else int(n)
    z, wz = np.polynomial.legendre.leggauss(n)
    phi = -np.pi + 2 * np.pi * (np.arange(2 * n) + 0.5) / (2 * n)
    Z, F = np.meshgrid(z, phi, indexing="ij")
    s = np.sqrt(1 - Z ** 2)
    pts = np.stack([Z, s * np.cos(F), s * np.sin(F)], -1).reshape(-1, 3)
    w = (wz[:, None] * np.full(2 * n, np.pi / n)[None, :]).reshape(-1)
    return pts, w


# --------------------------------------------------------------------------- node sets

def node_coords(grid: GridSpec, mask):
    """Coordinates of the nodes selected by a boolean mask (a NodeSet)."""
    return grid.points[np.asarray(mask, bool)]


def hausdorff_distance(A, B) -> float:
    """Symmetric Hausdorff distance between two finite point sets.

    Both empty gives 0; exactly one empty gives ``inf``.
    """
    A = np.asarray(A, float)
    B = np.asarray(B, float)
    A = A.reshape(len(A), -1) if A.size else np.empty((0, 1))
    B = B.reshape(len(B), -1) if B.size else np.empty((0, 1))
    if len(A) == 0 and len(B) == 0:
        return 0.0
    if len(A) == 0 or len(B) == 0:
        return float("inf")
    dab = cKDTree(B).query(A)[0].max()
    dba = cKDTree(A).query(B)[0].max()
    return float(max(dab, dba))
