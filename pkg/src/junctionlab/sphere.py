"""Icosphere meshes, spherical Dirichlet eigenvalues, and the min-max 3-partition search."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import splu
from scipy.spatial import cKDTree

from ._validation import check_positive
from .core import hausdorff_distance


class UndefinedEigenvalueError(ValueError):
    """The cell has too few interior vertices for a Dirichlet eigenvalue."""


class PartitionCollapseError(RuntimeError):
    """Cells kept collapsing after the allowed number of restarts."""

    def __init__(self, msg, restarts):
        super().__init__(msg)
        self.restarts = restarts


# --------------------------------------------------------------------------- mesh

@dataclass
class SphereMesh:
    vertices: np.ndarray       # (V, 3), unit norm
    faces: np.ndarray          # (F, 3)
    stiffness: sp.csr_matrix   # cotangent Laplacian (positive semidefinite)
    mass: np.ndarray           # lumped vertex masses
    adjacency: sp.csr_matrix = field(repr=False, default=None)

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def edges(self):
        e = np.sort(self.faces[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1)
        return np.unique(e, axis=0)

    def euler_characteristic(self):
        return len(self.vertices) - len(self.edges) + len(self.faces)

    @property
    def total_mass(self):
        return float(self.mass.sum())

    def mean_edge_angle(self):
        e = self.edges
        return float(np.arccos(np.clip((self.vertices[e[:, 0]] * self.vertices[e[:, 1]]).sum(1), -1, 1)).mean())

    def rotated(self, R):
        """Same connectivity with rotated vertex positions (operators are rotation invariant)."""
        return SphereMesh(self.vertices @ np.asarray(R).T, self.faces, self.stiffness, self.mass, self.adjacency)


def _icosahedron():
    p = (1 + 5 ** 0.5) / 2
    v = np.array([[-1, p, 0], [1, p, 0], [-1, -p, 0], [1, -p, 0], [0, -1, p], [0, 1, p],
                  [0, -1, -p], [0, 1, -p], [p, 0, -1], [p, 0, 1], [-p, 0, -1], [-p, 0, 1]], float)
    f = np.array([[0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11], [1, 5, 9], [5, 11, 4],
                  [11, 10, 2], [10, 7, 6], [7, 1, 8], [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8],
                  [3, 8, 9], [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1]])
    return v / np.linalg.norm(v, axis=1, keepdims=True), f


def _subdivide(v, f):
    e = np.sort(f[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1)
    uniq, inv = np.unique(e, axis=0, return_inverse=True)
    mid = v[uniq[:, 0]] + v[uniq[:, 1]]
    mid /= np.linalg.norm(mid, axis=1, keepdims=True)
    m = (inv.reshape(-1, 3) + len(v))
    a, b, c = f.T
    ab, bc, ca = m.T
    nf = np.concatenate([np.stack([a, ab, ca], 1), np.stack([b, bc, ab], 1),
                         np.stack([c, ca, bc], 1), np.stack([ab, bc, ca], 1)])
    return np.vstack([v, mid]), nf


def _assemble(v, f):
    V = len(v)
    rows, cols, vals = [], [], []
    area = np.zeros(len(f))
    for k in range(3):
        i, j, o = f[:, k], f[:, (k + 1) % 3], f[:, (k + 2) % 3]
        e1, e2 = v[i] - v[o], v[j] - v[o]
        cr = np.linalg.norm(np.cross(e1, e2), axis=1)
        cot = (e1 * e2).sum(1) / cr
        rows += [i, j]
        cols += [j, i]
        vals += [-0.5 * cot, -0.5 * cot]
        if k == 0:
            area = 0.5 * cr
    off = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(V, V)).tocsr()
    K = (off - sp.diags(np.asarray(off.sum(axis=1)).ravel())).tocsr()
    mass = np.bincount(f.ravel(), weights=np.repeat(area / 3.0, 3), minlength=V)
    adj = (off != 0).astype(np.int8).tocsr()
    return K, mass, adj


def build_icosphere(subdiv: int) -> SphereMesh:
    """Refined icosahedron projected to the unit sphere, with cotangent stiffness and lumped masses."""
    if int(subdiv) != subdiv or subdiv < 0:
        raise ValueError(f"subdiv must be a nonnegative integer, got {subdiv!r}")
    v, f = _icosahedron()
    for _ in range(int(subdiv)):
        v, f = _subdivide(v, f)
    K, mass, adj = _assemble(v, f)
    return SphereMesh(v, f, K, mass, adj)


@lru_cache(maxsize=8)
def _cached_icosphere(subdiv: int) -> SphereMesh:
    return build_icosphere(subdiv)


def icosphere_level(mesh: SphereMesh) -> Optional[int]:
    """Subdivision level whose icosphere has this vertex count, or ``None``."""
    V = mesh.n_vertices
    s = int(round(np.log((V - 2) / 10) / np.log(4))) if V > 2 else -1
    return s if s >= 0 and 10 * 4 ** s + 2 == V and len(mesh.faces) == 20 * 4 ** s else None


def transfer_labels(coarse: SphereMesh, labels, fine: SphereMesh):
    """Labels on ``fine`` taken from the nearest ``coarse`` vertex."""
    _, idx = cKDTree(coarse.vertices).query(fine.vertices)
    return np.asarray(labels)[idx]


def write_off(path, mesh: SphereMesh):
    with open(path, "w") as fh:
        fh.write(f"OFF\n{len(mesh.vertices)} {len(mesh.faces)} 0\n")
        for p in mesh.vertices:
            fh.write(f"{float(p[0])!r} {float(p[1])!r} {float(p[2])!r}\n")
        for t in mesh.faces:
            fh.write(f"3 {t[0]} {t[1]} {t[2]}\n")


def read_off(path) -> SphereMesh:
    with open(path) as fh:
        tok = [ln.split("#")[0].strip() for ln in fh]
    tok = [t for t in tok if t]
    if tok[0] != "OFF":
        raise ValueError("not an OFF file")
    nv, nf = (int(x) for x in tok[1].split()[:2])
    v = np.array([[float(x) for x in ln.split()[:3]] for ln in tok[2:2 + nv]])
    f = np.array([[int(x) for x in ln.split()[1:4]] for ln in tok[2 + nv:2 + nv + nf]])
    K, mass, adj = _assemble(v, f)
    return SphereMesh(v, f, K, mass, adj)


# --------------------------------------------------------------------------- eigenvalues

@dataclass
class EigenResult:
    lam: float
    eigenfunction: np.ndarray    # per vertex, zero outside the cell, max-normalized
    iterations: int
    residual: float


def lambda1_dirichlet(mesh: SphereMesh, cell, level=None, rtol: float = 1e-8,
                      max_iter: int = 1000) -> EigenResult:
    """First Dirichlet eigenvalue of the Laplace-Beltrami operator on a vertex cell.

    Shifted inverse-power iteration on the stiffness/mass pencil restricted to
    the cell, stopped at relative residual ``||K x - lam M x|| / ||lam M x||
    <= rtol``.  ``cell`` is a boolean mask or an index array.  With ``level``
    (per-vertex values, positive inside the cell) the Dirichlet boundary is
    placed at the linear zero crossing along each cut edge instead of at the
    outside vertex.

    Raises
    ------
    UndefinedEigenvalueError
        If the cell has fewer than three vertices.
    """
    V = mesh.n_vertices
    mask = np.zeros(V, bool)
    cell = np.asarray(cell)
    if cell.dtype == bool:
        mask[:] = cell
    else:
        mask[cell.astype(int)] = True
    idx = np.flatnonzero(mask)
    if len(idx) < 3:
        raise UndefinedEigenvalueError(f"cell has {len(idx)} vertices (need 3)")
    K = mesh.stiffness[idx][:, idx].tocsc()
    M = mesh.mass[idx]
    if level is not None:
        level = np.asarray(level, float)
        coo = mesh.stiffness.tocoo()
        cut = mask[coo.row] & ~mask[coo.col]
        i, j, w = coo.row[cut], coo.col[cut], -coo.data[cut]
        li, lj = level[i], level[j]
        t = np.where(li - lj > 0, li / np.where(li - lj > 0, li - lj, 1.0), 1.0)
        t = np.clip(t, 0.05, 1.0)
        pos = np.searchsorted(idx, i)
        extra = np.bincount(pos, weights=w * (1.0 / t - 1.0), minlength=len(idx))
        K = (K + sp.diags(extra)).tocsc()
    # shift just below zero keeps the factorization definite
    sigma = -1e-3
    lu = splu((K - sigma * sp.diags(M)).tocsc())
    x = np.ones(len(idx))
    lam, res, it = 0.0, np.inf, 0
    for it in range(1, max_iter + 1):
        x = lu.solve(M * x)
        x /= np.sqrt((M * x * x).sum())
        Kx = K @ x
        lam = float(x @ Kx)
        res = float(np.linalg.norm(Kx - lam * M * x) / max(np.linalg.norm(lam * M * x), 1e-300))
        if res <= rtol:
            break
    if x.sum() < 0:
        x = -x
    phi = np.zeros(V)
    phi[idx] = x / np.abs(x).max()
    return EigenResult(lam, phi, it, res)


def cap_level(mesh: SphereMesh, axis, cos_angle: float = 0.0):
    """Level function of the cap ``{x . axis > cos_angle}``."""
    a = np.asarray(axis, float)
    return mesh.vertices @ (a / np.linalg.norm(a)) - cos_angle


def lune_level(mesh: SphereMesh, angle: float, start: float = 0.0, pole=(0.0, 0.0, 1.0)):
    """Level function (signed angular distance to the boundary) of the lune
    ``start < azimuth < start + angle`` about ``pole``."""
    P = np.asarray(pole, float)
    P /= np.linalg.norm(P)
    e1 = np.eye(3)[int(np.argmin(np.abs(P)))]
    e1 = e1 - P * (e1 @ P)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(P, e1)
    v = mesh.vertices
    az = np.arctan2(v @ e2, v @ e1)
    s = np.hypot(v @ e1, v @ e2)
    rel = (az - start) % (2 * np.pi)
    dist = np.minimum(rel, angle - rel)
    out = np.where(rel < angle, dist, -np.minimum(rel - angle, 2 * np.pi - rel))
    # azimuthal distance scaled to arc length on the sphere
    return np.sin(np.clip(out, -np.pi / 2, np.pi / 2)) * s


def lune_labels(mesh: SphereMesh, N: int = 3, rotation: float = 0.0, pole=(0.0, 0.0, 1.0)):
    """Partition into ``N`` equal lunes about ``pole`` (labels ``1..N``)."""
    lev = np.stack([lune_level(mesh, 2 * np.pi / N, rotation + 2 * np.pi * k / N, pole) for k in range(N)])
    return np.argmax(lev, axis=0) + 1, lev


# --------------------------------------------------------------------------- partitions

@dataclass
class SpherePartition:
    labels: np.ndarray                   # per vertex, 0 = unassigned, 1..N
    N: int
    connected: np.ndarray = None         # per cell flag
    values: Optional[np.ndarray] = None  # (N, V) scaled eigenfunctions a_i phi_i (zero outside cells)
    lams: Optional[np.ndarray] = None

    def cell(self, i):
        return self.labels == i


def _cell_components(mesh, mask):
    idx = np.flatnonzero(mask)
    if len(idx) == 0:
        return 0, np.zeros(0, int), idx
    sub = mesh.adjacency[idx][:, idx]
    n, comp = connected_components(sub, directed=False)
    return n, comp, idx


def _prune(mesh, labels, N):
    """Keep the largest component of every cell, then hand freed vertices to neighbouring cells."""
    labels = labels.copy()
    conn = np.ones(N, bool)
    for i in range(1, N + 1):
        n, comp, idx = _cell_components(mesh, labels == i)
        if n > 1:
            keep = np.argmax(np.bincount(comp))
            labels[idx[comp != keep]] = 0
    A = mesh.adjacency
    for _ in range(mesh.n_vertices):
        free = labels == 0
        if not free.any():
            break
        votes = np.stack([A @ (labels == i).astype(float) for i in range(1, N + 1)])
        best = np.argmax(votes, axis=0) + 1
        has = votes.max(axis=0) > 0
        upd = free & has
        if not upd.any():
            break
        labels[upd] = best[upd]
    for i in range(1, N + 1):
        n, _, _ = _cell_components(mesh, labels == i)
        conn[i - 1] = n == 1
    return labels, conn


def extend_eigenfunction(mesh: SphereMesh, phi, mask, rings: int = 3):
    """Values of ``phi`` on ``rings`` vertex rings outside ``mask`` by one-ring averaging.

    A ring vertex takes the sum of its already-valued neighbours divided by
    its full degree, a harmonic-like decay away from the cell.  Vertices
    beyond the last ring get zero.
    """
    A = mesh.adjacency.astype(float)
    deg = np.asarray(A.sum(axis=1)).ravel()
    ext = np.where(mask, phi, 0.0)
    done = mask.copy()
    for _ in range(rings):
        ring = (A @ done.astype(float) > 0) & ~done
        if not ring.any():
            break
        ext[ring] = (A @ np.where(done, ext, 0.0))[ring] / deg[ring]
        done |= ring
    return ext


def multipliers(lams, phis, scale=None, gain: float = 0.1):
    """``a_i = (s_i / ||phi_i||_inf) * sqrt(lam_i / min_j lam_j)``.

    ``scale`` carries accumulated factors ``s_i`` (default ones), updated as
    ``s_i <- s_i (lam_i / min lam)^gain`` and returned as the second value;
    the accumulation removes the residual eigenvalue spread the square-root
    factor alone leaves at a discrete fixed point.
    """
    lams = np.asarray(lams, float)
    sup = np.array([np.abs(p).max() for p in phis])
    ratio = lams / lams.min()
    s = np.ones(len(lams)) if scale is None else np.asarray(scale, float)
    a = s * np.sqrt(ratio) / sup
    s = s * ratio ** gain
    return a, s / s.min()


def _cell_eigs(mesh, labels, N, levels=None):
    res = []
    for i in range(1, N + 1):
        mask = labels == i
        lev = None if levels is None else levels[i - 1]
        res.append(lambda1_dirichlet(mesh, mask, level=lev))
    return res


def _competition(mesh, labels, eigs, rings, scale=None):
    """Extended scaled eigenfunctions (for the argmax), signed cell levels, eigenvalues, scale."""
    N = len(eigs)
    lams = np.array([e.lam for e in eigs])
    a, s = multipliers(lams, [e.eigenfunction for e in eigs], scale)
    vals = np.stack([a[i] * extend_eigenfunction(mesh, eigs[i].eigenfunction, labels == i + 1, rings)
                     for i in range(N)])
    return vals, _levels(np.stack([a[i] * eigs[i].eigenfunction for i in range(N)])), lams, s


def _signed_values(eigs, scale=None):
    """Scaled unextended eigenfunctions ``a_i phi_i`` and the eigenvalues."""
    lams = np.array([r.lam for r in eigs])
    a, _ = multipliers(lams, [r.eigenfunction for r in eigs], scale)
    return np.stack([a[i] * eigs[i].eigenfunction for i in range(len(eigs))]), lams


def _levels(psi):
    """Per cell ``psi_i - max_{j != i} psi_j``: its zero is where the signed interpolants meet."""
    N = len(psi)
    if N == 1:
        return [psi[0] - 1e-3]
    return [psi[i] - np.max(np.delete(psi, i, axis=0), axis=0) for i in range(N)]


def random_partition(mesh: SphereMesh, N: int, rng) -> SpherePartition:
    """Weighted Voronoi cells of ``N`` random sites (``argmax p_i . x + w_i``), pruned to connected cells."""
    p = rng.normal(size=(N, 3))
    p /= np.linalg.norm(p, axis=1, keepdims=True)
    w = rng.uniform(-0.3, 0.3, size=N)
    labels = np.argmax(mesh.vertices @ p.T + w, axis=1) + 1
    labels, conn = _prune(mesh, labels, N)
    return SpherePartition(labels, N, conn)


@dataclass
class SearchHistory:
    sweep: list = field(default_factory=list)
    L: list = field(default_factory=list)
    spread: list = field(default_factory=list)
    changes: list = field(default_factory=list)
    restarts: int = 0
    levels: list = field(default_factory=list)      # coarse stages: (subdiv, L, sweeps)
    increases: list = field(default_factory=list)   # (sweep, increase) beyond the slack
    stop: str = ""


def _polish(mesh, labels, N, scale, max_sweeps, tau, spread_tol, hist, slack, gain=0.1):
    """Sub-vertex interface relaxation with level-corrected eigenvalues.

    The interface on each cut edge sits at the zero of the signed interpolant
    of ``a_i phi_i`` and ``a_j phi_j``; it drifts as the multipliers change and
    the outside vertex changes cell once the zero comes within ``tau`` of it.
    """
    e = mesh.edges
    levels = None
    quiet = 0
    for k in range(max_sweeps):
        eigs = _cell_eigs(mesh, labels, N, levels)
        lams = np.array([r.lam for r in eigs])
        a, scale = multipliers(lams, [r.eigenfunction for r in eigs], scale, gain)
        psi = np.stack([a[i] * eigs[i].eigenfunction for i in range(N)])
        L = float(lams.max())
        if hist.L and L > hist.L[-1] * (1 + slack):
            hist.increases.append((len(hist.L), L - hist.L[-1]))
        hist.sweep.append(len(hist.sweep))
        hist.L.append(L)
        hist.spread.append(float(lams.max() - lams.min()))
        la, lb = labels[e[:, 0]], labels[e[:, 1]]
        cut = (la != lb) & (la > 0) & (lb > 0)
        u, v, lu, lv = e[cut, 0], e[cut, 1], la[cut], lb[cut]
        pu, pv = psi[lu - 1, u], psi[lv - 1, v]
        t = pu / np.maximum(pu + pv, 1e-300)
        new = labels.copy()
        fwd, back = t >= 1 - tau, t <= tau
        new[v[fwd]] = lu[fwd]
        new[u[back]] = lv[back]
        ch = int(np.count_nonzero(new != labels))
        if ch:
            new, _ = _prune(mesh, new, N)
            moved = new != labels
            # a vertex that changed cell inherits its old value for the new owner
            old = psi[labels[moved] - 1, np.flatnonzero(moved)]
            psi[:, moved] = 0.0
            psi[new[moved] - 1, np.flatnonzero(moved)] = np.maximum(old, 1e-12)
            labels = new
        hist.changes.append(ch)
        levels = _levels(psi)
        quiet = quiet + 1 if ch == 0 else 0
        if quiet >= 3 and hist.spread[-1] <= spread_tol * L:
            hist.stop = "converged"
            return labels, scale, levels
    hist.stop = hist.stop or "max_sweeps"
    return labels, scale, levels


def minmax_partition_search(mesh: SphereMesh, N: int = 3, init=None, seed=None, max_sweeps: int = 300,
                            rings: int = 3, max_restarts: int = 5, slack: float = 1e-2,
                            spread_tol: float = 2e-3, patience: int = 10, polish_sweeps: int = 150,
                            tau: float = 0.05, coarse_subdiv: Optional[int] = 2):
    """Alternating eigenfunction/argmax search for the min-max ``N``-partition.

    Each sweep computes the first Dirichlet eigenfunction of every cell,
    scales it by :func:`multipliers` (the square-root eigenvalue factors
    accumulate over sweeps, so a cell with a high eigenvalue keeps gaining
    weight until it has grown), extends it ``rings`` vertex rings past the
    cell, reassigns every vertex to the argmax, and prunes each cell to its
    largest component.  Eigenvalues after the first sweep place the Dirichlet
    boundary at the zero of the competition function.  Stops when no label
    changes and the relative eigenvalue spread is at most ``spread_tol``, when
    labels have not changed for ``patience`` sweeps, or after ``max_sweeps``.
    These sweeps use eigenvalues with the boundary at the outside vertices.
    A polish stage of up to ``polish_sweeps`` sweeps then places every
    interface at the zero of the signed competition ``a_i phi_i - a_j phi_j``
    along each cut edge, lets it drift with the multipliers, and moves a
    vertex once the zero comes within ``tau`` of it; it ends when labels are
    quiet and the relative spread is at most ``spread_tol``.

    ``init`` is a :class:`SpherePartition`, a label array, or ``None`` for a
    random start drawn from ``seed``.  A collapsed cell (fewer than three
    vertices) restarts from a fresh random partition.  A random start on an
    icosphere finer than ``coarse_subdiv`` is searched on that coarse
    icosphere first and carried up one level at a time by
    :func:`transfer_labels`; random starts on the fine mesh tend to cycle
    between nearby partitions without equalizing the eigenvalues.  Pass
    ``coarse_subdiv=None`` to search the given mesh directly.

    Returns
    -------
    partition, L, history
        ``L`` is the largest cell eigenvalue of the final partition.

    Raises
    ------
    PartitionCollapseError
        After ``max_restarts`` collapses.
    """
    check_positive("max_sweeps", max_sweeps)
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    rng = np.random.default_rng(ss)
    level = icosphere_level(mesh)
    coarse_hist = []
    if init is None and coarse_subdiv is not None and level is not None and level > coarse_subdiv:
        kw = dict(max_sweeps=max_sweeps, rings=rings, max_restarts=max_restarts, slack=slack,
                  spread_tol=spread_tol, patience=patience, polish_sweeps=polish_sweeps, tau=tau,
                  coarse_subdiv=None)
        prev = _cached_icosphere(coarse_subdiv)
        part, Lc, hc = minmax_partition_search(prev, N, seed=ss, **kw)
        coarse_hist.append((coarse_subdiv, Lc, len(hc.L), hc.restarts))
        for sd in range(coarse_subdiv + 1, level):
            m = _cached_icosphere(sd)
            part, Lc, hc = minmax_partition_search(m, N, init=transfer_labels(prev, part.labels, m), **kw)
            coarse_hist.append((sd, Lc, len(hc.L), hc.restarts))
            prev = m
        init = transfer_labels(prev, part.labels, mesh)
    if init is None:
        part = random_partition(mesh, N, rng)
    elif isinstance(init, SpherePartition):
        part = init
    else:
        lab, conn = _prune(mesh, np.asarray(init, int), N)
        part = SpherePartition(lab, N, conn)
    labels = part.labels.copy()
    hist = SearchHistory()
    hist.levels = [c[:3] for c in coarse_hist]
    hist.restarts = sum(c[3] for c in coarse_hist)
    levels, scale = None, None
    prevL = np.inf
    sweep = 0
    while True:
        sizes = np.bincount(labels, minlength=N + 1)[1:]
        if sizes.min() < 3:
            hist.restarts += 1
            if hist.restarts > max_restarts:
                raise PartitionCollapseError(f"cell collapse after {hist.restarts - 1} restarts", hist.restarts - 1)
            labels = random_partition(mesh, N, rng).labels
            levels, scale = None, None
            prevL = np.inf
            continue
        eigs = _cell_eigs(mesh, labels, N)
        vals, levels, lams, scale = _competition(mesh, labels, eigs, rings, scale)
        L = float(lams.max())
        hist.sweep.append(sweep)
        hist.L.append(L)
        hist.spread.append(float(lams.max() - lams.min()))
        if L > prevL + slack * prevL:
            hist.increases.append((sweep, L - prevL))
        prevL = L
        if sweep >= max_sweeps:
            hist.changes.append(0)
            hist.stop = "max_sweeps"
            break
        new = np.argmax(vals, axis=0) + 1
        new[vals.max(axis=0) <= 0] = 0
        new, conn = _prune(mesh, new, N)
        ch = int(np.count_nonzero(new != labels))
        hist.changes.append(ch)
        labels = new
        sweep += 1
        if ch == 0 and hist.spread[-1] <= spread_tol * L:
            hist.stop = "converged"
            break
        if len(hist.changes) >= patience and not any(hist.changes[-patience:]):
            hist.stop = "stalled"
            break
    if hist.stop != "converged" and polish_sweeps > 0:
        hist.stop = ""
        labels, scale, levels = _polish(mesh, labels, N, scale, polish_sweeps, tau, spread_tol, hist, slack)
    else:
        eigs = _cell_eigs(mesh, labels, N)
        _, levels, _, _ = _competition(mesh, labels, eigs, rings, scale)
    eigs = _cell_eigs(mesh, labels, N, levels)
    psi, lams = _signed_values(eigs, scale)
    _, conn = _prune(mesh, labels, N)
    out = SpherePartition(labels, N, conn, psi, lams)
    return out, float(lams.max()), hist


# --------------------------------------------------------------------------- geometry report

def _face_lookup(mesh):
    V = mesh.n_vertices
    inc = [[] for _ in range(V)]
    for k, t in enumerate(mesh.faces):
        for v in t:
            inc[v].append(k)
    width = max(len(x) for x in inc)
    table = np.full((V, width), -1)
    for v, x in enumerate(inc):
        table[v, :len(x)] = x
    return table


def interpolate(mesh: SphereMesh, values, points, _cache={}):
    """Piecewise-linear interpolation of per-vertex ``values`` (``(..., V)``) at unit ``points``."""
    from scipy.spatial import cKDTree
    key = id(mesh)
    if key not in _cache or _cache[key][0] is not mesh:
        _cache.clear()
        _cache[key] = (mesh, cKDTree(mesh.vertices), _face_lookup(mesh))
    _, tree, table = _cache[key]
    pts = np.atleast_2d(points)
    _, near = tree.query(pts)
    cand = table[near]                                  # (P, w)
    best = np.zeros((len(pts), 3))
    bestf = np.zeros(len(pts), int)
    score = np.full(len(pts), -np.inf)
    for c in range(cand.shape[1]):
        f = cand[:, c]
        ok = f >= 0
        tri = mesh.vertices[mesh.faces[np.where(ok, f, 0)]]          # (P, 3, 3)
        # barycentric coordinates of the ray through the point
        T = np.transpose(tri, (0, 2, 1))
        lam = np.linalg.solve(T, pts[..., None])[..., 0]
        lam /= lam.sum(axis=1, keepdims=True)
        s = np.where(ok, lam.min(axis=1), -np.inf)
        upd = s > score
        score[upd], best[upd], bestf[upd] = s[upd], lam[upd], f[upd]
    vals = np.asarray(values)
    corner = vals[..., mesh.faces[bestf]]                            # (..., P, 3)
    return (corner * best).sum(axis=-1)


def _tangent_frame(J):
    J = J / np.linalg.norm(J)
    t = np.eye(3)[int(np.argmin(np.abs(J)))]
    t1 = t - J * (t @ J)
    t1 /= np.linalg.norm(t1)
    return J, t1, np.cross(J, t1)


def _circle_crossings(mesh, vals, J, rho, n=2048):
    J, t1, t2 = _tangent_frame(J)
    th = -np.pi + 2 * np.pi * np.arange(n) / n
    pts = np.cos(rho) * J + np.sin(rho) * (np.cos(th)[:, None] * t1 + np.sin(th)[:, None] * t2)
    v = interpolate(mesh, np.where(np.isfinite(vals), vals, -1e3), pts)
    lab = np.argmax(v, axis=0)
    out, pairs = [], []
    for a in range(n):
        b = (a + 1) % n
        if lab[a] != lab[b]:
            i, j = lab[a], lab[b]
            fa, fb = v[i, a] - v[j, a], v[i, b] - v[j, b]
            t = fa / (fa - fb)
            ang = th[a] + t * (2 * np.pi / n)
            out.append(np.cos(rho) * J + np.sin(rho) * (np.cos(ang) * t1 + np.sin(ang) * t2))
            pairs.append(tuple(sorted((int(i) + 1, int(j) + 1))))
    return np.array(out), pairs, (J, t1, t2)


def _refine_junction(mesh, vals, J, rho1, rho2, iters=4):
    for _ in range(iters):
        c1, p1, _ = _circle_crossings(mesh, vals, J, rho1)
        c2, p2, _ = _circle_crossings(mesh, vals, J, rho2)
        if len(c1) != 3 or len(c2) != 3 or sorted(p1) != sorted(p2):
            break
        S = np.zeros((3, 3))
        for k, pr in enumerate(p1):
            q = c2[p2.index(pr)]
            nrm = np.cross(c1[k], q)
            nrm /= np.linalg.norm(nrm)
            S += np.outer(nrm, nrm)
        w, U = np.linalg.eigh(S)
        Jn = U[:, 0] * np.sign(U[:, 0] @ J)
        if np.arccos(np.clip(Jn @ J, -1, 1)) < 1e-10:
            J = Jn
            break
        J = Jn
    return J / np.linalg.norm(J)


@dataclass
class PartitionReport:
    junctions: np.ndarray            # (J, 3) unit vectors
    angles_deg: list                 # per junction, three angles
    lams: np.ndarray
    L: float
    spread: float
    hausdorff_deg: float             # to the best rotated lune triple (N = 3), else nan
    arcs: list                       # (cell_a, cell_b, number of interface edges)


def partition_report(mesh: SphereMesh, partition: SpherePartition, rho_deg: float = 20.0) -> PartitionReport:
    """Junctions, junction angles, eigenvalues and distance to the nearest lune triple."""
    N = partition.N
    labels = partition.labels
    if partition.values is None or partition.lams is None:
        eigs = _cell_eigs(mesh, labels, N)
        psi, _ = _signed_values(eigs)
        for _ in range(3):
            eigs = _cell_eigs(mesh, labels, N, _levels(psi))
            psi, lams = _signed_values(eigs)
        vals = psi
    else:
        vals, lams = partition.values, partition.lams
    e = mesh.edges
    la, lb = labels[e[:, 0]], labels[e[:, 1]]
    cut = la != lb
    arcs = []
    for i in range(1, N + 1):
        for j in range(i + 1, N + 1):
            n = int(np.count_nonzero(cut & (((la == i) & (lb == j)) | ((la == j) & (lb == i)))))
            if n:
                arcs.append((i, j, n))
    fl = labels[mesh.faces]
    tri = (fl[:, 0] != fl[:, 1]) & (fl[:, 1] != fl[:, 2]) & (fl[:, 0] != fl[:, 2])
    cent = mesh.vertices[mesh.faces[tri]].mean(axis=1)
    cent /= np.linalg.norm(cent, axis=1, keepdims=True) if len(cent) else 1
    # cluster triple faces within 5 mean edge lengths
    clusters = []
    tol = 5 * mesh.mean_edge_angle()
    for c in cent:
        for cl in clusters:
            if np.arccos(np.clip(c @ cl[0], -1, 1)) < tol:
                cl.append(c)
                break
        else:
            clusters.append([c])
    rho = np.deg2rad(rho_deg)
    junctions, angles = [], []
    for cl in clusters:
        J = np.mean(cl, axis=0)
        J = _refine_junction(mesh, vals, J / np.linalg.norm(J), rho / 2, rho)
        cr, _, (J, t1, t2) = _circle_crossings(mesh, vals, J, rho)
        junctions.append(J)
        if len(cr) != 3:
            angles.append([float("nan")] * 3)
            continue
        az = np.sort(np.arctan2(cr @ t2, cr @ t1))
        angles.append(np.degrees(np.diff(np.concatenate([az, [az[0] + 2 * np.pi]]))).tolist())
    haus = float("nan")
    if N == 3 and len(junctions) == 2:
        P = junctions[0] - junctions[1]
        P /= np.linalg.norm(P)
        haus = _lune_hausdorff(mesh, labels, P)
    return PartitionReport(np.array(junctions).reshape(-1, 3), angles, lams, float(lams.max()),
                           float(lams.max() - lams.min()), haus, arcs)


def _lune_hausdorff(mesh, labels, pole):
    """Smallest over lune rotations (and cell matchings) of the largest per-cell Hausdorff distance, degrees."""
    from itertools import permutations
    best = np.inf
    for rot in np.deg2rad(np.arange(0.0, 120.0, 0.5)):
        ref, _ = lune_labels(mesh, 3, rot, pole)
        # match cells by overlap
        ov = np.array([[np.count_nonzero((labels == i) & (ref == j)) for j in (1, 2, 3)] for i in (1, 2, 3)])
        perm = max(permutations(range(3)), key=lambda p: sum(ov[i, p[i]] for i in range(3)))
        miss = 3 * mesh.n_vertices - 3 * sum(ov[i, perm[i]] for i in range(3))
        if miss > best * mesh.n_vertices:   # cheap pre-screen on mismatched vertices
            continue
        worst = 0.0
        for i in range(3):
            a = mesh.vertices[labels == i + 1]
            b = mesh.vertices[ref == perm[i] + 1]
            worst = max(worst, hausdorff_distance(a, b))
        best = min(best, 2 * np.degrees(np.arcsin(min(worst / 2, 1.0))))
    return float(best)


def write_partition_csv(path, mesh: SphereMesh, partition: SpherePartition):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["vertex", "x", "y", "z", "label"])
        for k, (p, lab) in enumerate(zip(mesh.vertices, partition.labels)):
            w.writerow([k, repr(float(p[0])), repr(float(p[1])), repr(float(p[2])), int(lab)])


def write_history_csv(path, hist: SearchHistory):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sweep", "L", "spread", "changes"])
        for row in zip(hist.sweep, hist.L, hist.spread, hist.changes):
            w.writerow([row[0], repr(row[1]), repr(row[2]), row[3]])


# --------------------------------------------------------------------------- circle analogue

def arc_lambda(length: float) -> float:
    """First Dirichlet eigenvalue ``(pi / length)^2`` of an arc of the unit circle."""
    check_positive("length", length)
    return (np.pi / length) ** 2


def circle_minmax(lengths, sweeps: int = 100, tol: float = 1e-12):
    """Min-max partition of the circle into arcs by the same multiplier rule.

    Each sweep moves every arc length towards ``sqrt(lam_i / min lam)``
    times its current length and renormalizes to ``2 pi``; the fixed point is
    equal arcs with ``L = (N / 2)^2``.  Returns ``(lengths, L, history)``.
    """
    ell = np.asarray(lengths, float)
    ell = 2 * np.pi * ell / ell.sum()
    hist = []
    for _ in range(sweeps):
        lam = (np.pi / ell) ** 2
        hist.append(float(lam.max()))
        new = ell * np.sqrt(lam / lam.min())
        new = 2 * np.pi * new / new.sum()
        if np.abs(new - ell).max() < tol:
            ell = new
            break
        ell = new
    return ell, float(((np.pi / ell) ** 2).max()), hist
