"""Discrete Dirichlet-energy minimization over segregated nonnegative fields.

The discrete energy is ``h^(d-2) * sum_edges d_Sigma(u(a), u(b))^2`` over grid
edges whose two endpoints lie in the ball.  On a common branch this is the
forward difference squared times the cell volume ``h^d``; an edge joining two
phases costs ``(u_i(a) + u_j(b))^2``, the squared length of the path through
the vertex of Sigma_N.  Written for arbitrary nonnegative stacks,

    E(u) = h^(d-2) sum_edges [ sum_k (u_k(a) - u_k(b))^2 + 2 sum_{i != j} u_i(a) u_j(b) ],

which is smooth and is what the penalty method minimizes.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.optimize import minimize as _scipy_minimize
from scipy.sparse.linalg import cg, spsolve
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_choice, check_positive
from .core import GridSpec, HomogeneousTrace, SegregatedField, project_field


@dataclass
class SolverConfig:
    """Settings for :func:`minimize`.

    Attributes
    ----------
    method : {"projected_gradient", "penalty"}
    kappa : float
        Penalty weight on ``sum_{i<j} u_i^2 u_j^2`` (penalty method only).
    step_policy : {"redblack", "jacobi"}
        Node set updated by one projected step: alternating checkerboard
        colours (always a descent step) or all improvable nodes at once, halved
        by gain until the energy decreases.
    max_halvings : int
        Halvings of the ``jacobi`` update set before falling back to ``redblack``.
    max_iter : int
    tol : float
        Relative stationarity and energy-plateau tolerance.
    segregation_tol : float
    plateau_window : int
        Window (iterations) for the relative energy decrease test.
    """

    method: str = "projected_gradient"
    kappa: float = 1e3
    step_policy: str = "redblack"
    max_halvings: int = 20
    max_iter: int = 500
    tol: float = 1e-6
    segregation_tol: float = 1e-3
    plateau_window: int = 50

    def __post_init__(self):
        check_choice("method", self.method, {"projected_gradient", "penalty"})
        check_choice("step_policy", self.step_policy, {"redblack", "jacobi"})
        check_positive("kappa", self.kappa)
        check_positive("tol", self.tol)
        check_positive("segregation_tol", self.segregation_tol)
        if int(self.max_iter) < 0:
            raise ValueError("max_iter must be >= 0")


@dataclass
class SolveReport:
    """Outcome of a solve; ``energy_history`` is non-increasing."""

    iterations: int = 0
    energy_history: list = field(default_factory=list)
    stationarity: float = float("nan")
    segregation: float = float("nan")
    wall_time: float = 0.0
    converged: bool = False

    def rows(self):
        """CSV rows ``(iteration, energy, stationarity, segregation)``."""
        out = []
        for k, e in enumerate(self.energy_history):
            last = k == len(self.energy_history) - 1
            out.append((k, e, self.stationarity if last else "", self.segregation if last else ""))
        return out


class SolverError(RuntimeError):
    """Non-convergence; carries the partial field and report."""

    def __init__(self, message, field_, report):
        super().__init__(message)
        self.field = field_
        self.report = report


# --------------------------------------------------------------------------- discrete operators

def _edge_diffs(a, mask):
    """Yield ``(axis, forward difference, edge-valid mask)`` for every axis."""
    d = mask.ndim
    for ax in range(d):
        lo = [slice(None)] * d
        hi = [slice(None)] * d
        lo[ax], hi[ax] = slice(0, -1), slice(1, None)
        lo, hi = tuple(lo), tuple(hi)
        yield ax, a[(Ellipsis,) + hi] - a[(Ellipsis,) + lo], mask[hi] & mask[lo]


def field_energy(comps, grid: GridSpec) -> float:
    """Discrete Dirichlet energy of a component stack (or a single scalar field).

    Cross-phase edges carry the coupling ``2 sum_{i != j} u_i(a) u_j(b)``, so
    for segregated stacks each edge costs ``d_Sigma(u(a), u(b))^2``.
    """
    comps = np.asarray(comps, float)
    if comps.ndim == grid.d:
        comps = comps[None]
    e = 0.0
    lo_hi = _edge_slices(grid.d)
    for lo, hi in lo_hi:
        ok = grid.mask[hi] & grid.mask[lo]
        a, b = comps[(slice(None),) + lo], comps[(slice(None),) + hi]
        cross = a.sum(axis=0) * b.sum(axis=0) - (a * b).sum(axis=0)
        e += float((((b - a) ** 2).sum(axis=0) + 2.0 * cross)[ok].sum())
    return e * grid.h ** (grid.d - 2)


def _edge_slices(d):
    out = []
    for ax in range(d):
        lo = [slice(None)] * d
        hi = [slice(None)] * d
        lo[ax], hi[ax] = slice(0, -1), slice(1, None)
        out.append((tuple(lo), tuple(hi)))
    return out


def component_energy(comps, grid: GridSpec) -> float:
    """``h^(d-2) sum_k sum_edges (u_k(a) - u_k(b))^2``, without cross-phase coupling."""
    comps = np.asarray(comps, float)
    e = 0.0
    for _, df, ok in _edge_diffs(comps, grid.mask):
        e += float((df ** 2 * ok).sum())
    return e * grid.h ** (grid.d - 2)


def dirichlet_energy(u: SegregatedField) -> float:
    """``sum_i int |grad u_i|^2`` by forward differences on in-ball edges (see :func:`field_energy`)."""
    return field_energy(u.comps, u.grid)


def graph_laplacian(comps, mask):
    """``(L u)_n = sum_{m ~ n, m in mask} (u_n - u_m)`` for nodes in ``mask``."""
    comps = np.asarray(comps, float)
    out = np.zeros_like(comps)
    d = mask.ndim
    for ax in range(d):
        lo = [slice(None)] * d
        hi = [slice(None)] * d
        lo[ax], hi[ax] = slice(0, -1), slice(1, None)
        lo, hi = tuple(lo), tuple(hi)
        ok = mask[hi] & mask[lo]
        df = (comps[(Ellipsis,) + hi] - comps[(Ellipsis,) + lo]) * ok
        out[(Ellipsis,) + lo] -= df
        out[(Ellipsis,) + hi] += df
    return out * mask


class _FreeSystem:
    """Index bookkeeping for Dirichlet solves on the free nodes."""

    def __init__(self, grid: GridSpec):
        self.grid = grid
        free = grid.free
        self.idx = -np.ones(grid.shape, dtype=np.int64)
        self.n = int(free.sum())
        self.idx[free] = np.arange(self.n)
        rows, cols, src_b, dst_b = [], [], [], []
        d = grid.d
        flat_shell = np.flatnonzero(grid.shell)
        for ax in range(d):
            lo = [slice(None)] * d
            hi = [slice(None)] * d
            lo[ax], hi[ax] = slice(0, -1), slice(1, None)
            lo, hi = tuple(lo), tuple(hi)
            a, b = self.idx[lo], self.idx[hi]
            both = (a >= 0) & (b >= 0)
            rows.append(a[both]); cols.append(b[both])
            # free-to-shell couplings, in both directions
            lin = np.arange(np.prod(grid.shape)).reshape(grid.shape)
            sa, sb = grid.shell[lo], grid.shell[hi]
            m1 = (a >= 0) & sb
            src_b.append(lin[hi][m1]); dst_b.append(a[m1])
            m2 = (b >= 0) & sa
            src_b.append(lin[lo][m2]); dst_b.append(b[m2])
        self.ei = np.concatenate(rows)
        self.ej = np.concatenate(cols)
        self.bsrc = np.concatenate(src_b)
        self.bdst = np.concatenate(dst_b)
        self.deg = 2 * d
        del flat_shell

    def rhs(self, comp):
        """Shell contribution for a single component (full-grid array)."""
        return np.bincount(self.bdst, weights=comp.reshape(-1)[self.bsrc], minlength=self.n)

    def matrix(self, keep_edge=None, active=None):
        ei, ej = self.ei, self.ej
        if keep_edge is not None:
            ei, ej = ei[keep_edge], ej[keep_edge]
        diag = np.full(self.n, float(self.deg))
        if active is not None:
            diag = np.where(active, diag, 1.0)
        off = -np.ones(len(ei))
        A = sp.coo_matrix((np.concatenate([diag, off, off]),
                           (np.concatenate([np.arange(self.n), ei, ej]),
                            np.concatenate([np.arange(self.n), ej, ei]))),
                          shape=(self.n, self.n)).tocsc()
        return A


def _spd_solve(A, b, d, x0=None):
    """Solve an SPD grid system: sparse LU in 2D, conjugate gradients in 3D."""
    if d == 2 or A.shape[0] < 20000:
        return spsolve(A, b)
    if not np.any(b):
        return np.zeros_like(b)
    x, info = cg(A, b, x0=x0, rtol=1e-12, atol=0.0, maxiter=20 * A.shape[0])
    if info != 0:
        raise RuntimeError(f"conjugate gradients did not converge (info={info})")
    return x


def _shell_values(boundary, grid: GridSpec, gamma: float, N: Optional[int]):
    """Full-grid component stack holding the boundary data on the shell."""
    pts = grid.points[grid.shell]
    if isinstance(boundary, SegregatedField):
        vals = boundary.comps[:, grid.shell]
    elif isinstance(boundary, HomogeneousTrace):
        vals = boundary.extend(pts, gamma)
    elif callable(boundary):
        vals = np.asarray(boundary(pts), float)
    else:
        arr = np.asarray(boundary, float)
        if arr.shape[1:] != grid.shape:
            raise ValueError("array boundary must have shape (N, *grid.shape)")
        vals = arr[:, grid.shell]
    vals = np.asarray(vals, float)
    if N is not None and vals.shape[0] < N:
        vals = np.concatenate([vals, np.zeros((N - vals.shape[0],) + vals.shape[1:])])
    if np.any(vals < 0):
        raise ValueError("boundary data must be nonnegative")
    srt = np.sort(vals, axis=0)
    if vals.shape[0] > 1 and np.any(srt[-1] * srt[-2] > 0):
        raise ValueError("boundary data must be segregated")
    out = np.zeros((vals.shape[0],) + grid.shape)
    out[:, grid.shell] = vals
    return out


def harmonic_extension(shell_comps, grid: GridSpec, system: Optional[_FreeSystem] = None):
    """Independent discrete harmonic extension of every component."""
    system = system or _FreeSystem(grid)
    A = system.matrix()
    out = shell_comps.copy()
    if system.n:
        for k in range(len(shell_comps)):
            out[k][grid.free] = _spd_solve(A, system.rhs(shell_comps[k]), grid.d)
    return out


def _labels(comps):
    """Phase label per node (``0`` where every component vanishes) and total value."""
    lab = np.argmax(comps, axis=0) + 1
    val = comps.sum(axis=0)
    lab[val <= 0] = 0
    return lab, val


def _compose(lab, val, N):
    out = np.zeros((N,) + lab.shape)
    for k in range(N):
        out[k] = np.where(lab == k + 1, val, 0.0)
    return out


def _signed_relax(lab, val, grid, system):
    """Exact energy minimization over node values with frozen labels.

    Free nodes with a phase label are unknowns; free nodes with label ``0``
    stay at zero.  An edge between labels ``i`` and ``j`` contributes
    ``(v_a - s v_b)^2`` with ``s = +1`` for ``i = j`` and ``-1`` otherwise,
    so the normal equations form a signed graph Laplacian, positive definite
    thanks to the shell and the pinned nodes.
    """
    free = grid.free
    lf = lab[free]
    act = lf > 0
    n = int(act.sum())
    out = val.copy()
    out[free] = 0.0
    if n == 0:
        return out
    loc = -np.ones(system.n, dtype=np.int64)
    loc[act] = np.arange(n)
    ei, ej = system.ei, system.ej
    both = act[ei] & act[ej]
    sgn = np.where(lf[ei[both]] == lf[ej[both]], 1.0, -1.0)
    ri, rj = loc[ei[both]], loc[ej[both]]
    diag = np.full(n, float(system.deg))
    A = sp.coo_matrix((np.concatenate([diag, -sgn, -sgn]),
                       (np.concatenate([np.arange(n), ri, rj]), np.concatenate([np.arange(n), rj, ri]))),
                      shape=(n, n)).tocsc()
    slab = lab.reshape(-1)[system.bsrc]
    sval = val.reshape(-1)[system.bsrc]
    dst = system.bdst
    keep = act[dst]
    ssgn = np.where(slab[keep] == lf[dst[keep]], 1.0, -1.0)
    rhs = np.bincount(loc[dst[keep]], weights=ssgn * sval[keep], minlength=n)
    x = _spd_solve(A, rhs, grid.d, val[free][act])
    vf = np.zeros(system.n)
    vf[act] = x
    out[free] = vf
    return out


def _local_best(lab, val, N, grid):
    """Best single-node relabelling against frozen neighbours.

    For each label ``k`` the local optimum is ``max(g_k, 0) / 2d`` with
    ``g_k = sum_{q ~ p} (+v_q if lab_q = k else -v_q)``; the local energy gain
    over the current state is returned alongside.
    """
    d = grid.d
    deg = 2 * d
    nb = np.zeros((N,) + grid.shape)
    tot = np.zeros(grid.shape)
    for ax in range(d):
        for sft in (-1, 1):
            lv = np.roll(val, sft, axis=ax)
            ll = np.roll(lab, sft, axis=ax)
            tot += lv
            for k in range(N):
                nb[k] += np.where(ll == k + 1, lv, 0.0)
    g = 2 * nb - tot[None]
    best = np.argmax(g, axis=0)
    gbest = np.take_along_axis(g, best[None], 0)[0]
    newlab = np.where(gbest > 0, best + 1, 0)
    newval = np.clip(gbest, 0.0, None) / deg
    gcur = np.where(lab > 0, np.take_along_axis(g, np.clip(lab - 1, 0, None)[None], 0)[0], 0.0)
    ecur = deg * val ** 2 - 2 * val * gcur
    enew = -newval ** 2 * deg
    gain = (ecur - enew) * grid.free
    return newlab, newval, gain


# --------------------------------------------------------------------------- minimization

def _l2(a, grid):
    return float(np.sqrt((a ** 2).sum() * grid.h ** grid.d))


def minimize(boundary, cfg: Optional[SolverConfig] = None, init: Optional[SegregatedField] = None,
             grid: Optional[GridSpec] = None, gamma: float = 1.5, N: Optional[int] = None):
    """Minimize the discrete Dirichlet energy with prescribed boundary data.

    Parameters
    ----------
    boundary : SegregatedField, HomogeneousTrace, callable or ndarray
        Source of the shell values.  A trace is extended ``gamma``-homogeneously;
        a callable maps points ``(..., d)`` to ``(N, ...)``.
    cfg : SolverConfig, optional
    init : SegregatedField, optional
        Starting field; its shell values are overwritten by the boundary data.
        Default: independent harmonic extensions, projected onto Sigma_N
        except for the penalty method, which starts from the overlapping
        extensions and lets the penalty separate them.
    grid : GridSpec, optional
        Required unless ``boundary`` is a SegregatedField.
    gamma : float
        Homogeneity used to extend a trace onto shell nodes.
    N : int, optional
        Pad the boundary data with zero components up to ``N``.

    Returns
    -------
    field : SegregatedField
    report : SolveReport

    Raises
    ------
    SolverError
        When the stopping rule is not met within ``cfg.max_iter`` iterations.
    """
    cfg = cfg or SolverConfig()
    t0 = time.perf_counter()
    if grid is None:
        if isinstance(boundary, SegregatedField):
            grid = boundary.grid
        elif init is not None:
            grid = init.grid
        else:
            raise ValueError("a grid is required for this boundary type")
    shell = _shell_values(boundary, grid, gamma, N)
    system = _FreeSystem(grid)
    if init is not None:
        comps = np.where(grid.shell, shell, init.comps * grid.free)
        comps = np.where(grid.free, project_field(comps), comps)
    else:
        comps = harmonic_extension(shell, grid, system)
        if cfg.method != "penalty":
            comps = np.where(grid.free, project_field(comps), comps)

    if cfg.method == "penalty":
        comps, rep = _penalty(comps, grid, cfg)
    else:
        comps, rep = _projected_gradient(comps, grid, system, cfg)
    rep.wall_time = time.perf_counter() - t0
    u = SegregatedField(grid, comps, cfg.segregation_tol)
    rep.segregation = u.segregation_residual()
    if not rep.converged:
        raise SolverError(f"no convergence within {cfg.max_iter} iterations "
                          f"(stationarity {rep.stationarity:.3e})", u, rep)
    return u, rep


def _feasible_relax(lab, val, grid, system, N, E):
    """Frozen-label relaxation, relabelling nodes the solve drives negative.

    If relabelling does not produce a nonnegative minimizer, the values move
    from ``val`` towards the frozen-label minimizer as far as nonnegativity
    allows; the energy is a convex quadratic along that segment, so the step
    is a descent step.  Returns ``(lab, val, E)``.
    """
    lab2 = lab.copy()
    first = None
    for _ in range(4):
        v2 = _signed_relax(lab2, val, grid, system)
        if first is None:
            first = v2
        tiny = 1e-12 * max(float(np.abs(v2).max()), 1e-300)
        neg = grid.free & (v2 < -tiny)
        if not neg.any():
            v2 = np.clip(v2, 0.0, None)
            E2 = field_energy(_compose(lab2, v2, N), grid)
            if E2 <= E:
                return lab2, v2, E2
            break
        nl, _, _ = _local_best(lab2, np.clip(v2, 0.0, None), N, grid)
        lab2 = np.where(neg, nl, lab2)
    neg = grid.free & (first < -1e-12 * max(float(np.abs(first).max()), 1e-300))
    t = float(np.min(val[neg] / (val[neg] - first[neg]))) if neg.any() else 1.0
    v3 = np.clip(val + t * (first - val), 0.0, None)
    E3 = field_energy(_compose(lab, v3, N), grid)
    if E3 <= E:
        return lab, v3, E3
    return lab, val, E


def _projected_gradient(comps, grid, system, cfg):
    """Projected descent on node values with exact relaxation between relabellings.

    A projected gradient step of length ``h^2 / 2d`` on the signed energy
    replaces every node value by its neighbour average in the best phase
    (clipped at zero), i.e. a Jacobi step followed by the nearest-point
    projection onto Sigma_N.  Updating only one checkerboard colour at a time
    makes every step a strict descent; after each step the values are
    relaxed exactly with the labels frozen.
    """
    N = comps.shape[0]
    free = grid.free
    lab, val = _labels(comps)
    E = field_energy(comps, grid)
    rep = SolveReport(energy_history=[E])
    if not np.any(comps):
        rep.converged, rep.stationarity = True, 0.0
        return comps, rep
    colour = (np.indices(grid.shape).sum(axis=0) % 2).astype(bool)
    lab, val, E = _feasible_relax(lab, val, grid, system, N, E)
    rep.energy_history.append(E)
    for it in range(1, int(cfg.max_iter) + 1):
        scale = max(_l2(val, grid), 1e-300)
        nl, nv, gain = _local_best(lab, val, N, grid)
        resid = _l2(np.where(free, val - nv, 0.0), grid) / scale
        rep.iterations, rep.stationarity = it, resid
        thresh = 1e-12 * max(E, 1e-300) / grid.h ** (grid.d - 2)
        if resid <= cfg.tol and not np.any(gain > thresh):
            rep.converged = True
            break
        moved = False
        if cfg.step_policy == "jacobi":
            cand = gain > thresh
            k = int(cand.sum())
            order = np.argsort(-gain, axis=None)
            for _ in range(int(cfg.max_halvings) + 1):
                sel = np.zeros(val.size, bool)
                sel[order[:k]] = True
                sel = sel.reshape(grid.shape) & cand
                lab2, val2 = np.where(sel, nl, lab), np.where(sel, nv, val)
                E2 = field_energy(_compose(lab2, val2, N), grid)
                if E2 < E:
                    lab, val, E, moved = lab2, val2, E2, True
                    break
                k //= 2
                if k == 0:
                    break
        if not moved:
            for c in (colour, ~colour):
                nl, nv, gain = _local_best(lab, val, N, grid)
                sel = c & (gain > thresh)
                if sel.any():
                    lab, val = np.where(sel, nl, lab), np.where(sel, nv, val)
                    moved = True
            E = min(E, field_energy(_compose(lab, val, N), grid))
        lab, val, E = _feasible_relax(lab, val, grid, system, N, E)
        rep.energy_history.append(E)
        hist = rep.energy_history
        w = min(int(cfg.plateau_window), len(hist) - 1)
        plateau = (hist[-1 - w] - hist[-1]) <= cfg.tol * max(abs(hist[-1]), 1e-300)
        if plateau and len(hist) > cfg.plateau_window and resid <= cfg.tol:
            rep.converged = True
            break
    out = _compose(lab, val, N)
    out[:, grid.shell] = comps[:, grid.shell]
    return out, rep


def _penalty(comps, grid, cfg):
    """L-BFGS-B on ``E_c(u) + kappa h^d sum_{i<j} sum u_i^2 u_j^2`` with ``u >= 0``, then projection.

    ``E_c`` is the componentwise energy (:func:`component_energy`); the
    limit ``kappa -> infinity`` is a segregated minimizer of that
    discretization, which agrees with the tree-metric one up to ``O(h)``
    at the interfaces.
    """
    free = grid.free
    N = comps.shape[0]
    hd = grid.h ** grid.d
    w = grid.h ** (grid.d - 2)
    base = comps.copy()
    hist = []

    def fun(x):
        c = base.copy()
        c[:, free] = x.reshape(N, -1)
        # componentwise energy: the cross-phase coupling of field_energy is left to the penalty
        e = component_energy(c, grid)
        g = 2.0 * w * graph_laplacian(c, grid.mask)[:, free]
        q = c[:, free] ** 2
        tot = q.sum(axis=0)
        pen = 0.5 * (tot ** 2 - (q ** 2).sum(axis=0)).sum()
        gp = 2.0 * c[:, free] * (tot[None] - q)
        hist.append(e + cfg.kappa * hd * pen)
        return e + cfg.kappa * hd * pen, (g + cfg.kappa * hd * gp).ravel()

    x0 = comps[:, free].ravel()
    res = _scipy_minimize(fun, x0, jac=True, method="L-BFGS-B", bounds=[(0, None)] * x0.size,
                          options={"maxiter": int(cfg.max_iter) * 10, "ftol": cfg.tol * 1e-3,
                                   "gtol": cfg.tol * 1e-2})
    c = base.copy()
    c[:, free] = project_field(res.x.reshape(N, -1))
    mono = list(np.minimum.accumulate(hist)) if hist else [field_energy(c, grid)]
    rep = SolveReport(iterations=int(res.nit), energy_history=mono,
                      stationarity=float(np.abs(res.jac).max()) if hasattr(res, "jac") else 0.0,
                      converged=bool(res.success))
    return c, rep


# --------------------------------------------------------------------------- criticality

def check_criticality(u: SegregatedField, tol: Optional[float] = None, mollify: bool = True):
    """Sign checks of the distributional inequalities at free nodes.

    Checks ``-Lap u_i <= tol`` (subharmonicity) and
    ``-Lap(u_i - sum_{j != i} u_j) >= -tol``.  With ``mollify`` the discrete
    Laplacian is averaged over the ``3^d`` node box, i.e. tested against a
    mollified discrete test function.  The default tolerance
    ``max(u) / sqrt(h)`` bounds the truncation error of the 5-/7-point
    Laplacian on a 3/2-homogeneous profile at distance ``O(h)`` from its spine.

    Returns
    -------
    dict
        ``count_sub``, ``worst_sub``, ``count_super``, ``worst_super`` and the
        tolerance used.
    """
    g = u.grid
    c = u.comps
    lap = -graph_laplacian(c, g.mask) / g.h ** 2
    tot = c.sum(axis=0)
    lap_tot = lap.sum(axis=0)
    inner = g.free.copy()
    if mollify:
        from scipy.ndimage import uniform_filter
        lap = np.stack([uniform_filter(l, size=3, mode="constant") for l in lap])
        lap_tot = uniform_filter(lap_tot, size=3, mode="constant")
        from scipy.ndimage import binary_erosion
        inner = binary_erosion(g.free, structure=np.ones((3,) * g.d, bool))
    if tol is None:
        # truncation of a 3/2-homogeneous profile within O(h) of its spine
        tol = max(float(c.max()), 1e-300) / np.sqrt(g.h)
    sub = -lap[:, inner]                          # -Lap u_i
    sup = -(2 * lap - lap_tot[None])[:, inner]    # -Lap(u_i - sum_{j!=i} u_j)
    return {
        "count_sub": int((sub > tol).sum()),
        "worst_sub": float(sub.max()) if sub.size else 0.0,
        "count_super": int((sup < -tol).sum()),
        "worst_super": float(sup.min()) if sup.size else 0.0,
        "tol": float(tol),
    }


# --------------------------------------------------------------------------- estimator API

class SegregatedDirichletMinimizer(BaseEstimator):
    """Estimator-style wrapper around :func:`minimize`.

    ``fit(boundary)`` solves on a ball grid of spacing ``h`` and stores
    ``field_``, ``report_`` and ``energy_``.
    """

    def __init__(self, d=2, h=1 / 64, method="projected_gradient", kappa=1e3, max_iter=500,
                 tol=1e-6, segregation_tol=1e-3, gamma=1.5, n_components=None):
        self.d = d
        self.h = h
        self.method = method
        self.kappa = kappa
        self.max_iter = max_iter
        self.tol = tol
        self.segregation_tol = segregation_tol
        self.gamma = gamma
        self.n_components = n_components

    def fit(self, boundary, y=None, init=None):
        cfg = SolverConfig(method=self.method, kappa=self.kappa, max_iter=self.max_iter,
                           tol=self.tol, segregation_tol=self.segregation_tol)
        grid = boundary.grid if isinstance(boundary, SegregatedField) else GridSpec(self.d, self.h)
        self.field_, self.report_ = minimize(boundary, cfg, init=init, grid=grid, gamma=self.gamma,
                                             N=self.n_components)
        self.energy_ = dirichlet_energy(self.field_)
        return self

    def transform(self, X=None):
        """Return the fitted component stack."""
        check_is_fitted(self, "field_")
        return self.field_.comps
