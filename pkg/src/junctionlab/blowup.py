"""Rescalings, Y-fitting, junction angles, convergence-rate fits, crossing parity, singular curves."""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from ._validation import DegenerateHeightError
from .core import (DEFAULT_TRACE_RES, GridSpec, HomogeneousTrace, SegregatedField, _trace_grid,
                   hausdorff_distance, make_Y)
from .diagnostics import SING32, _check_radius, sample_field, stratify


class NotATripleJunctionError(ValueError):
    """The sampling circle does not cross exactly three interfaces."""

    def __init__(self, count):
        super().__init__(f"expected 3 interface crossings, found {count}")
        self.count = int(count)


class RepositionRequiredError(ValueError):
    """A parity loop touches the free interface."""


def _dim(u, x0):
    return u.grid.d if isinstance(u, SegregatedField) else len(np.atleast_1d(x0))


# --------------------------------------------------------------------------- rescaling

def rescale(u, x0, r, mode: str = "homogeneous", resolution=None, gamma: float = 1.5) -> HomogeneousTrace:
    """Trace of a rescaling of ``u`` about ``x0`` on the standard sphere grid.

    ``homogeneous``: ``r^{-gamma} u(x0 + r x)``; ``almgren``:
    ``u(x0 + r x) / sqrt(H)`` with ``H`` the discrete height of the sampled
    trace, so the result has unit height on the trace grid.

    Raises
    ------
    DegenerateHeightError
        Almgren mode with vanishing height.
    """
    x0 = np.asarray(x0, float)
    d = _dim(u, x0)
    if isinstance(u, SegregatedField):
        _check_radius(u.grid, x0, r)
    shape = tuple(resolution) if resolution is not None else DEFAULT_TRACE_RES[d]
    pts, w = _trace_grid(d, shape)
    vals = np.clip(sample_field(u, x0 + r * pts), 0.0, None)
    if mode == "homogeneous":
        return HomogeneousTrace(d, vals / r ** gamma)
    if mode != "almgren":
        raise ValueError(f"mode must be 'homogeneous' or 'almgren', got {mode!r}")
    H = float((vals ** 2 * w).sum())
    if H <= 1e-12 * max(float(vals.max()) ** 2, 1e-300) or H == 0.0:
        raise DegenerateHeightError(f"height {H:.3e} vanishes at x0={x0.tolist()}, r={r}")
    return HomogeneousTrace(d, vals / np.sqrt(H))


@dataclass
class BlowupSequence:
    center: np.ndarray
    radii: np.ndarray
    almgren: list
    homogeneous: list


def blowup_sequence(u, x0, radii, resolution=None) -> BlowupSequence:
    """Both rescalings at every radius."""
    radii = np.asarray(sorted(radii, reverse=True), float)
    return BlowupSequence(np.asarray(x0, float), radii,
                          [rescale(u, x0, r, "almgren", resolution) for r in radii],
                          [rescale(u, x0, r, "homogeneous", resolution) for r in radii])


# --------------------------------------------------------------------------- Y fitting

@dataclass
class YFit:
    c: float
    rotation: float
    residual: float
    rel_residual: float
    threshold: float
    is_junction: bool

    def profile(self, N=3, d=2):
        return make_Y(max(N, 3), self.c, self.rotation, d)


def _fit_objective(trace: HomogeneousTrace):
    N = max(trace.N, 3)
    d = trace.d
    pts, w = trace.points, trace.weights
    cc = trace.comps
    norm2 = float((cc ** 2 * w).sum())

    def parts(rot):
        Yr = make_Y(N, 1.0, rot, d)(pts)[: trace.N]
        inner = float((cc * Yr * w).sum())
        ny = float((make_Y(N, 1.0, rot, d)(pts) ** 2 * w).sum())
        a = max(inner / ny, 0.0)
        return a, norm2 - 2 * a * inner + a * a * ny

    return parts, norm2


def quadrature_noise_floor(d: int = 2, resolution=None) -> float:
    """Relative fit residual of Y passed through trace interpolation at half-sample offsets."""
    shape = tuple(resolution) if resolution is not None else DEFAULT_TRACE_RES[d]
    base = HomogeneousTrace.from_function(make_Y(3, d=d), d, shape)
    pts, _ = _trace_grid(d, shape)
    if d == 2:
        half = np.pi / shape[0]
        rot = np.array([[np.cos(half), -np.sin(half)], [np.sin(half), np.cos(half)]])
    else:
        half = np.pi / shape[1]
        rot = np.eye(3)
        rot[1:, 1:] = [[np.cos(half), -np.sin(half)], [np.sin(half), np.cos(half)]]
    moved = HomogeneousTrace(d, base.evaluate(pts @ rot.T))
    parts, norm2 = _fit_objective(moved)
    res = minimize_scalar(lambda t: parts(t)[1], bounds=(-3 * half, 3 * half), method="bounded",
                          options={"xatol": 1e-12})
    return max(float(res.fun) / norm2, 1e-14)


def grid_noise_floor(grid: GridSpec, x0, r, resolution=None) -> float:
    """Relative fit residual of exact Y, centred at ``x0`` and sampled on ``grid``, rescaled at ``r``."""
    x0 = np.asarray(x0, float)
    Y = make_Y(3, d=grid.d)
    Yf = SegregatedField.from_function(grid, lambda p: Y(p - x0))
    return fit_best_Y(rescale(Yf, x0, r, resolution=resolution), threshold=np.inf).rel_residual


def fit_best_Y(trace: HomogeneousTrace, step_deg: float = 0.5, threshold: Optional[float] = None,
               noise_floor: Optional[float] = None) -> YFit:
    """Best ``c * Y(rotation)`` in ``L^2`` of the sphere.

    The scale is closed-form for each rotation; rotations are searched on a
    ``step_deg`` grid over ``[-pi, pi)`` and refined by golden-section search.
    ``rel_residual = residual / ||trace||^2``; the trace is flagged as a
    junction when ``rel_residual <= threshold``, by default 10 times
    ``noise_floor`` (itself defaulting to :func:`quadrature_noise_floor` of
    the trace grid).

    Raises
    ------
    ValueError
        For an all-zero trace.
    """
    parts, norm2 = _fit_objective(trace)
    if norm2 <= 0:
        raise ValueError("cannot fit Y to an all-zero trace")
    coarse = trace
    while np.prod(coarse.shape) > 20000:
        coarse = coarse.coarsen()
    cparts, _ = _fit_objective(coarse)
    step = np.deg2rad(step_deg)
    grid = -np.pi + step * np.arange(int(round(2 * np.pi / step)))
    vals = np.array([cparts(t)[1] for t in grid])
    k = int(np.argmin(vals))
    t0 = grid[k]
    try:
        res = minimize_scalar(lambda t: parts(t)[1], bracket=(t0 - step, t0, t0 + step), method="golden",
                              tol=1e-10)
        rot = float(res.x)
    except ValueError:
        # the fine objective is not bracketed by the coarse grid neighbours
        res = minimize_scalar(lambda t: parts(t)[1], bounds=(t0 - 2 * step, t0 + 2 * step), method="bounded",
                              options={"xatol": 1e-10})
        rot = float(res.x)
    rot = float((rot + np.pi) % (2 * np.pi) - np.pi)
    a, r2 = parts(rot)
    r2 = max(r2, 0.0)
    if threshold is None:
        nf = quadrature_noise_floor(trace.d, trace.shape) if noise_floor is None else noise_floor
        threshold = 10.0 * nf
    rel = r2 / norm2
    return YFit(a, rot, r2, rel, float(threshold), bool(rel <= threshold))


# --------------------------------------------------------------------------- rate fit

@dataclass
class RateFit:
    alpha: float
    r2: float
    radii: np.ndarray
    distances: np.ndarray
    floors: np.ndarray
    converged: bool
    fit: YFit


def _dist2(trace: HomogeneousTrace, prof):
    Yv = prof(trace.points)[: trace.N]
    return float(((np.abs(trace.comps - Yv).sum(axis=0)) ** 2 * trace.weights).sum())


def _distances(u, x0, radii, resolution):
    traces = [rescale(u, x0, r, "homogeneous", resolution) for r in radii]
    fit = fit_best_Y(traces[0], threshold=np.inf)
    prof = fit.profile(traces[0].N, traces[0].d)
    return np.array([_dist2(t, prof) for t in traces]), fit, traces


def rate_fit(u, x0, radii: Sequence[float], resolution=None) -> RateFit:
    """Power-law fit of ``||d_Sigma(u^{x0,r}, Y^{x0})||^2_{L^2(S)}`` against ``r``.

    ``Y^{x0}`` is frozen at the fit for the smallest radius.  The slope of
    ``log dist^2`` against ``log r`` is ``alpha``.  For grid fields the noise
    floor at each radius is the same distance computed for exact Y sampled
    on the grid at ``x0``; if every distance is within 10 times its floor the
    result is flagged ``converged`` and no slope is fitted.

    Raises
    ------
    ValueError
        Fewer than four radii, or radii spanning less than a decade.
    """
    radii = np.asarray(sorted(radii), float)
    if len(radii) < 4 or radii[-1] < 10 * radii[0] * (1 - 1e-9):
        raise ValueError("rate_fit needs at least 4 radii spanning a decade")
    x0 = np.asarray(x0, float)
    D, fit, traces = _distances(u, x0, radii, resolution)
    if isinstance(u, SegregatedField):
        Y = make_Y(max(u.N, 3), d=u.grid.d)
        Yf = SegregatedField.from_function(u.grid, lambda p: Y(p - x0))
        floors, _, _ = _distances(Yf, x0, radii, resolution)
    else:
        floors = np.array([1e-14 * max(t.norm_sq(), 1e-300) for t in traces])
    floors = np.maximum(floors, 1e-300)
    if np.all(D <= 10 * floors):
        return RateFit(float("nan"), float("nan"), radii, D, floors, True, fit)
    ok = D > 0
    x, y = np.log(radii[ok]), np.log(D[ok])
    slope, icpt = np.polyfit(x, y, 1)
    pred = slope * x + icpt
    ss = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - float(((y - pred) ** 2).sum()) / ss if ss > 0 else 1.0
    return RateFit(float(slope), r2, radii, D, floors, False, fit)


def two_homogeneity_field(eps: float = 0.3, d: int = 2):
    """Evaluator of ``Y`` plus a 5/2-homogeneous, segregation-preserving wiggle.

    Signed scalar ``s = Yhat + eps rho^{5/2} cos(5 theta / 2)``; phase 2 is
    ``s^+``, phases 1 and 3 are ``s^-`` on the upper and lower half-planes.
    The wiggle is orthogonal to the scaling and rotation directions of Y, so
    ``||d_Sigma(u^{0,r}, Y)||^2 ~ eps^2 r^2`` (exponent ``2 (5/2 - 3/2)``).
    """
    def ev(points):
        p = np.asarray(points, float)
        x, y = p[..., -2], p[..., -1]
        rho = np.hypot(x, y)
        th = np.arctan2(y, x)
        s = rho ** 1.5 * np.cos(1.5 * th) + eps * rho ** 2.5 * np.cos(2.5 * th)
        neg = np.clip(-s, 0.0, None)
        return np.stack([np.where(y >= 0, neg, 0.0), np.clip(s, 0.0, None), np.where(y < 0, neg, 0.0)])
    return ev


# --------------------------------------------------------------------------- junction angles

def _plane_basis(d, axis=None):
    if d == 2:
        return np.eye(2)[0], np.eye(2)[1]
    a = np.array([1.0, 0.0, 0.0]) if axis is None else np.asarray(axis, float)
    a = a / np.linalg.norm(a)
    t = np.eye(3)[int(np.argmin(np.abs(a)))]
    b1 = t - a * (t @ a)
    b1 /= np.linalg.norm(b1)
    b2 = np.cross(a, b1)
    # keep the default frame aligned with (x_2, x_3)
    if axis is None:
        b1, b2 = np.eye(3)[1], np.eye(3)[2]
    return b1, b2


@dataclass
class JunctionAngles:
    positions: np.ndarray      # crossing angles (radians) in the circle frame
    pairs: list                # (phase_a, phase_b) at each crossing
    angles_deg: np.ndarray     # angular gaps between consecutive crossings
    step_deg: float


def interface_crossings(u, x0, r, axis=None, n_samples: int = 4096):
    """Sub-sample interface crossings of the circle of radius ``r`` about ``x0``.

    Between consecutive nonzero samples of different phases ``i, j`` the
    crossing is the zero of the linear interpolant of ``u_i - u_j``.
    """
    x0 = np.asarray(x0, float)
    d = _dim(u, x0)
    b1, b2 = _plane_basis(d, axis)
    th = -np.pi + 2 * np.pi * np.arange(n_samples) / n_samples
    pts = x0 + r * (np.cos(th)[:, None] * b1 + np.sin(th)[:, None] * b2)
    vals = np.clip(sample_field(u, pts), 0.0, None)
    tot = vals.sum(axis=0)
    lab = np.argmax(vals, axis=0) + 1
    lab[tot <= 1e-14 * max(float(tot.max()), 1e-300)] = 0
    nz = np.flatnonzero(lab)
    pos, pairs = [], []
    if len(nz) < 2:
        return np.array(pos), pairs
    step = 2 * np.pi / n_samples
    for a, b in zip(nz, np.roll(nz, -1)):
        la, lb = lab[a], lab[b]
        if la == lb:
            continue
        fa = vals[la - 1, a] - vals[lb - 1, a]
        fb = vals[la - 1, b] - vals[lb - 1, b]
        span = ((b - a) % n_samples) * step
        t = fa / (fa - fb)
        pos.append(float((th[a] + t * span + np.pi) % (2 * np.pi) - np.pi))
        pairs.append((int(la), int(lb)))
    order = np.argsort(pos)
    return np.asarray(pos)[order], [pairs[k] for k in order]


def measure_junction_angles(u, x0, r, axis=None, n_samples: int = 4096) -> JunctionAngles:
    """Angles between the three interfaces crossing a small circle about ``x0``.

    ``d = 3``: the circle lies in the plane through ``x0`` orthogonal to
    ``axis`` (default ``x_1``).

    Raises
    ------
    NotATripleJunctionError
        When the number of crossings is not three.
    """
    pos, pairs = interface_crossings(u, x0, r, axis, n_samples)
    if len(pos) != 3:
        raise NotATripleJunctionError(len(pos))
    gaps = np.diff(np.concatenate([pos, [pos[0] + 2 * np.pi]]))
    return JunctionAngles(pos, pairs, np.degrees(gaps), 360.0 / n_samples)


def locate_junction(u, guess, r1: float, r2: float, axis=None, iters: int = 3, n_samples: int = 4096):
    """Sub-grid junction position from the three interface lines.

    Each interface is approximated by the line through its crossings of the
    circles of radii ``r1 < r2``; the junction is the least-squares
    intersection of the three lines (within the plane orthogonal to ``axis``
    in 3D).  Repeated ``iters`` times with the updated centre.
    """
    x0 = np.asarray(guess, float)
    d = _dim(u, x0)
    b1, b2 = _plane_basis(d, axis)
    for _ in range(iters):
        lines = {}
        for r in (r1, r2):
            pos, pairs = interface_crossings(u, x0, r, axis, n_samples)
            if len(pos) != 3:
                raise NotATripleJunctionError(len(pos))
            for t, pr in zip(pos, pairs):
                lines.setdefault(tuple(sorted(pr)), []).append(r * np.array([np.cos(t), np.sin(t)]))
        A = np.zeros((2, 2))
        rhs = np.zeros(2)
        for p in lines.values():
            if len(p) != 2:
                continue
            dvec = p[1] - p[0]
            nrm = np.linalg.norm(dvec)
            if nrm == 0:
                continue
            n = np.array([-dvec[1], dvec[0]]) / nrm
            A += np.outer(n, n)
            rhs += n * (n @ p[0])
        if np.linalg.matrix_rank(A) < 2:
            break
        shift = np.linalg.solve(A, rhs)
        x0 = x0 + shift[0] * b1 + shift[1] * b2
        if np.hypot(*shift) < 1e-10:
            break
    return x0


def triple_nodes(u: SegregatedField):
    """Nodes whose ``3^d`` neighbourhood contains at least three positive phases."""
    from scipy.ndimage import maximum_filter
    g = u.grid
    lab = u.labels()
    seen = np.zeros(g.shape, int)
    for k in range(1, u.N + 1):
        seen += maximum_filter((lab == k).astype(np.uint8), size=3, mode="constant").astype(int)
    return (seen >= 3) & g.mask


def detect_junction(u: SegregatedField, refine: bool = True):
    """Junction point nearest the origin (d = 2), refined by :func:`locate_junction`."""
    g = u.grid
    tri = triple_nodes(u)
    if not tri.any():
        raise NotATripleJunctionError(0)
    pts = g.points[tri]
    k = int(np.argmin(np.linalg.norm(pts, axis=-1)))
    near = np.linalg.norm(pts - pts[k], axis=-1) <= 3 * g.h
    x0 = pts[near].mean(axis=0)
    if refine:
        x0 = locate_junction(u, x0, 8 * g.h, 16 * g.h)
    return x0


# --------------------------------------------------------------------------- crossing parity

def square_loop(grid: GridSpec, center, half_width: float, plane=None):
    """Closed node path around a square (counter-clockwise), shape ``(K, d)``.

    ``plane`` names the two axes spanned by the square (default the last two);
    remaining coordinates are fixed at the node nearest ``center``.
    """
    d = grid.d
    a, b = plane if plane is not None else (d - 2, d - 1)
    c = grid.index_of(center)
    m = max(1, int(round(half_width / grid.h)))
    lo_a, hi_a, lo_b, hi_b = c[a] - m, c[a] + m, c[b] - m, c[b] + m
    path = ([(i, lo_b) for i in range(lo_a, hi_a)] + [(hi_a, j) for j in range(lo_b, hi_b)]
            + [(i, hi_b) for i in range(hi_a, lo_a, -1)] + [(lo_a, j) for j in range(hi_b, lo_b, -1)])
    out = np.tile(np.asarray(c), (len(path), 1))
    out[:, a] = [p[0] for p in path]
    out[:, b] = [p[1] for p in path]
    return out


def loop_crossing_parity(u: SegregatedField, loop) -> int:
    """Number of phase-label changes along a closed node path.

    A single phase-free node between two labelled nodes is a transversal pass
    through a one-node-thick interface and is skipped; the labels on either
    side are compared directly.

    Raises
    ------
    RepositionRequiredError
        If the loop runs along the interface (two consecutive phase-free
        nodes) or leaves the ball.
    ValueError
        If consecutive loop nodes are not grid neighbours.
    """
    loop = np.asarray(loop, int)
    g = u.grid
    if np.any(loop < 0) or np.any(loop >= g.n):
        raise ValueError("loop leaves the grid")
    step = np.abs(np.diff(np.vstack([loop, loop[:1]]), axis=0)).sum(axis=1)
    if np.any(step != 1):
        raise ValueError("consecutive loop nodes must be grid neighbours")
    idx = tuple(loop.T)
    lab = u.labels()[idx]
    zero = lab == 0
    if not np.all(g.mask[idx]) or zero.all() or np.any(zero & np.roll(zero, -1)):
        raise RepositionRequiredError("loop runs along the free interface; move it")
    seq = lab[~zero]
    return int(np.count_nonzero(seq != np.roll(seq, -1)))


# --------------------------------------------------------------------------- singular curve (d = 3)

@dataclass
class SingularCurveFit:
    nodes: np.ndarray               # (K, 3) Sing_{3/2} node indices
    axis_coords: np.ndarray         # sampled x_1 values
    eta: np.ndarray                 # (m, 2) junction (x_2, x_3) per slice
    eta_prime: np.ndarray           # (m, 2) local least-squares slopes
    alpha_report: float
    holder: list                    # (a, b, quotient)
    oscillation: list               # (|x0 - z0|, sum_i ||Y^{x0} - Y^{z0}||^2)
    osc_exponent: float
    components: int


def _local_slopes(a, eta, half=2):
    out = np.zeros_like(eta)
    for k in range(len(a)):
        sl = slice(max(0, k - half), min(len(a), k + half + 1))
        if sl.stop - sl.start < 2:
            continue
        for c in range(eta.shape[1]):
            out[k, c] = np.polyfit(a[sl], eta[sl, c], 1)[0]
    return out


def singular_curve_fit(u: SegregatedField, r_est: Optional[float] = None, alpha_fit: Optional[float] = None,
                       osc_radius: Optional[float] = None, osc_points: int = 6,
                       osc_resolution=(65, 192), refine: bool = True) -> SingularCurveFit:
    """Fit the 3/2-curve of a 3D field as a graph over ``x_1``.

    Sing_{3/2} nodes are found by :func:`stratify` among the triple nodes;
    per ``x_1`` slice their mean ``(x_2, x_3)`` gives ``eta``.  With
    ``refine`` each slice point is moved to the sub-node junction of that
    slice (:func:`locate_junction` on circles of radius ``2h`` and ``4h``);
    slices where this fails keep the node mean.  Slopes are
    local least-squares fits over five slices; Hölder quotients use
    ``alpha_report = 2 alpha / (alpha + 3)`` (``alpha = 1`` when no rate is
    supplied).  The oscillation table compares Y fits of the homogeneous
    rescalings at ``osc_points`` chain points.

    Raises
    ------
    ValueError
        For ``d != 3`` or fewer than five Sing_{3/2} nodes.
    """
    g = u.grid
    if g.d != 3:
        raise ValueError("singular_curve_fit needs d = 3")
    r_est = 4 * g.h if r_est is None else r_est
    smap = stratify(u, r_est, nodes=triple_nodes(u))
    sel = np.array([c == SING32 for c in smap.classes], bool)
    nodes = smap.nodes[sel] if len(sel) else np.empty((0, 3), int)
    if len(nodes) < 5:
        raise ValueError(f"only {len(nodes)} Sing_3/2 nodes found (need 5)")
    slices = np.unique(nodes[:, 0])
    gaps = np.diff(slices) > 1
    comps = int(gaps.sum()) + 1
    if comps > 1:
        warnings.warn(f"singular chain splits into {comps} components; fitting each separately")
    a = g.axis[slices]
    eta = np.array([g.points[tuple(nodes[nodes[:, 0] == s].T)][:, 1:].mean(axis=0) for s in slices])
    if refine:
        for k, a0 in enumerate(a):
            x0 = np.array([a0, eta[k, 0], eta[k, 1]])
            if np.linalg.norm(x0) + 5 * g.h > 1.0:
                continue
            try:
                x1 = locate_junction(u, x0, 2 * g.h, 4 * g.h)
            except NotATripleJunctionError:
                continue
            if np.linalg.norm(x1 - x0) <= 2 * g.h:
                eta[k] = x1[1:]
    eta_p = np.zeros_like(eta)
    starts = np.concatenate([[0], np.flatnonzero(gaps) + 1, [len(slices)]])
    for s0, s1 in zip(starts[:-1], starts[1:]):
        eta_p[s0:s1] = _local_slopes(a[s0:s1], eta[s0:s1])
    alpha = 1.0 if alpha_fit is None or not np.isfinite(alpha_fit) else float(alpha_fit)
    abar = 2 * alpha / (alpha + 3)
    holder = []
    for i in range(len(a)):
        for j in range(i + 1, len(a)):
            q = float(np.linalg.norm(eta_p[i] - eta_p[j]) / abs(a[i] - a[j]) ** abar)
            holder.append((float(a[i]), float(a[j]), q))
    # blow-up oscillation along the chain
    rho = 2 * r_est if osc_radius is None else osc_radius
    pick = np.unique(np.linspace(0, len(a) - 1, min(osc_points, len(a))).round().astype(int))
    centers, profs = [], []
    pts, w = _trace_grid(3, osc_resolution)
    for k in pick:
        x0 = np.array([a[k], eta[k, 0], eta[k, 1]])
        if np.linalg.norm(x0) + rho > 1 - g.h:
            continue
        f = fit_best_Y(rescale(u, x0, rho, resolution=osc_resolution), threshold=np.inf)
        centers.append(x0)
        profs.append(f.profile(u.N, 3)(pts))
    osc = []
    for i in range(len(centers)):
        for j in range(i + 1, len(centers)):
            osc.append((float(np.linalg.norm(centers[i] - centers[j])),
                        float((((profs[i] - profs[j]) ** 2).sum(axis=0) * w).sum())))
    expo = float("nan")
    arr = np.array([o for o in osc if o[0] > 0 and o[1] > 1e-14])
    if len(arr) >= 2 and np.ptp(np.log(arr[:, 0])) > 0:
        expo = float(np.polyfit(np.log(arr[:, 0]), np.log(arr[:, 1]), 1)[0])
    return SingularCurveFit(nodes, a, eta, eta_p, abar, holder, osc, expo, comps)


# --------------------------------------------------------------------------- report

@dataclass
class JunctionReport:
    center: np.ndarray
    radius: float
    c: float
    rotation: float
    residual: float
    rel_residual: float
    is_junction: bool
    crossing_angles: np.ndarray
    angles_deg: np.ndarray
    alpha_fit: float
    r2: float
    rate_converged: bool
    parity: int
    hausdorff: list = field(default_factory=list)


def junction_report(u: SegregatedField, x0=None, r: float = 0.25, radii=None, axis=None) -> JunctionReport:
    """Fit, angles, rate and parity at one junction of a 2D (or cylindrical 3D) field.

    Default rate radii span one decade from ``max(4h, sqrt(h))``: below about
    ``sqrt(h)`` the ``(h/r)^2`` discretisation error of a computed minimizer
    outweighs an ``r^2`` physical decay.  When that decade does not fit in
    the ball the rate is reported as NaN.
    """
    g = u.grid
    x0 = detect_junction(u) if x0 is None else np.asarray(x0, float)
    floor = grid_noise_floor(g, x0, r)
    fit = fit_best_Y(rescale(u, x0, r), noise_floor=floor)
    ang = measure_junction_angles(u, x0, r, axis)
    if radii is None:
        rmin = max(4 * g.h, np.sqrt(g.h))
        rmax = min(1 - np.linalg.norm(x0) - 2 * g.h, 10 * rmin)
        radii = np.geomspace(rmin, rmax, 8)
    try:
        rf = rate_fit(u, x0, radii)
        alpha, r2, conv = rf.alpha, rf.r2, rf.converged
    except ValueError:
        alpha, r2, conv = float("nan"), float("nan"), False
    parity = -1
    for k in range(4):
        try:
            parity = loop_crossing_parity(u, square_loop(g, x0, r / np.sqrt(2) + k * g.h))
            break
        except RepositionRequiredError:
            continue
    # supports inside B_r(x0) versus the fitted Y centred there
    inside = g.mask & (np.linalg.norm(g.points - x0, axis=-1) <= r)
    Yv = fit.profile(u.N, g.d)(g.points - x0)
    haus = [hausdorff_distance(g.points[inside & (u.comps[i] > 0)], g.points[inside & (Yv[i] > 0)])
            for i in range(3)]
    return JunctionReport(x0, r, fit.c, fit.rotation, fit.residual, fit.rel_residual, fit.is_junction,
                          ang.positions, ang.angles_deg, alpha, r2, conv, parity, haus)


def write_junction_csv(path, reports: Sequence[JunctionReport]):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        d = len(reports[0].center) if reports else 2
        w.writerow([f"x0_{k + 1}" for k in range(d)] + ["r", "c", "rotation", "rel_residual", "is_junction",
                                                       "angle1", "angle2", "angle3", "alpha_fit", "r2",
                                                       "rate_converged", "parity", "haus1", "haus2", "haus3"])
        for rep in reports:
            w.writerow([repr(float(v)) for v in rep.center] +
                       [repr(float(v)) for v in (rep.radius, rep.c, rep.rotation, rep.rel_residual)] +
                       [int(rep.is_junction)] + [repr(float(v)) for v in rep.angles_deg] +
                       [repr(float(rep.alpha_fit)), repr(float(rep.r2)), int(rep.rate_converged), rep.parity] +
                       [repr(float(v)) for v in rep.hausdorff])


def write_oscillation_csv(path, fit: SingularCurveFit):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["distance", "oscillation"])
        for dist, osc in fit.oscillation:
            w.writerow([repr(dist), repr(osc)])
