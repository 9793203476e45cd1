"""Pulled-back Fubini-Study metrics omega_k = (1/k) iota_k^* omega_FS, error
fields against the flat target, singular-region decomposition and graph
geodesics.

With K(z) = sum_i |F_i(z)|^2 for the holomorphic frame F, the coefficients are

    g_ab = (1/(2 pi k)) d^2/dz_a dzbar_b log K
         = (1/(2 pi k)) [ A_ab / K - v_a vbar_b / K^2 ],

A_ab = sum_i dF_i,a conj(dF_i,b), v_a = sum_i dF_i,a conj(F_i).  The common
holomorphic prefactor of the raw sections is pluriharmonic and drops out.
"""

import heapq
import warnings
from dataclasses import dataclass

import numpy as np

from .abelian import AbelianVariety, SectionBasis, _torus_grid
from .embedding import _frame_at, embedding_level
from .errors import BasePointError, DisconnectedError, SchemeDisagreementWarning
from .kummer import InvariantBasis, KummerVariety, canonical_rep, quotient_distance
from .abelian import AbelianPoint

_FD_STEP = 1e-4


@dataclass(frozen=True)
class MetricValue:
    """Hermitian coefficient matrix g_ab of a Kahler form i g dz^a wedge dzbar^b."""

    g: np.ndarray

    def __post_init__(self):
        g = np.atleast_2d(np.asarray(self.g, dtype=complex))
        herm = np.max(np.abs(g - g.conj().T))
        if herm > 1e-10:
            raise ValueError(f"metric coefficients not Hermitian: {herm:.2e}")
        if np.min(np.linalg.eigvalsh((g + g.conj().T) / 2)) < -1e-8:
            raise ValueError("metric coefficients not positive semidefinite")
        g.setflags(write=False)
        object.__setattr__(self, "g", g)


def metric_target(variety: AbelianVariety, basis) -> np.ndarray:
    """Constant coefficient matrix of the limit form for this basis family."""
    if isinstance(basis, InvariantBasis):
        return variety.H.copy()
    return variety.H / 2.0


def _metric_from_frame(F, dF, k):
    """Batch g matrices from frame values (m, N) and gradients (m, N, n)."""
    K = np.sum(np.abs(F) ** 2, axis=1)
    A = np.einsum("mia,mib->mab", dF, dF.conj())
    v = np.einsum("mia,mi->ma", dF, F.conj())
    g = (A / K[:, None, None]
         - np.einsum("ma,mb->mab", v, v.conj()) / (K ** 2)[:, None, None])
    return g / (2.0 * np.pi * k)


def pullback_metric_grid(variety: AbelianVariety, basis, X, Y) -> np.ndarray:
    """Analytic omega_k coefficients at every (x, y) sample, shape (m, n, n)."""
    F, dF, _ = _frame_at(basis, variety, np.atleast_2d(X), np.atleast_2d(Y),
                         grad=True)
    top = np.max(np.abs(F), axis=1)
    if np.any(top < 1e-200):
        raise BasePointError("embedding undefined at a sample point")
    scale = 1.0 / top
    F = F * scale[:, None]
    dF = dF * scale[:, None, None]
    return _metric_from_frame(F, dF, embedding_level(basis))


def _potential(variety, basis, X, Y):
    """log sum |F_i|^2 with overflow-safe rescaling (pluriharmonic shifts are
    irrelevant for second mixed derivatives at a fixed point)."""
    F, _, _ = _frame_at(basis, variety, np.atleast_2d(X), np.atleast_2d(Y))
    mag2 = np.abs(F) ** 2
    top = np.max(mag2, axis=1)
    return np.log(top) + np.log(np.sum(mag2 / top[:, None], axis=1))


def pullback_metric(variety: AbelianVariety, basis, x, y,
                    scheme: str = "analytic") -> MetricValue:
    """omega_k coefficients at a single point, by the requested scheme."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if scheme == "analytic":
        g = pullback_metric_grid(variety, basis, x[None, :], y[None, :])[0]
        return MetricValue(g=0.5 * (g + g.conj().T))
    if scheme != "finite_difference":
        raise ValueError(f"unknown scheme {scheme!r}")
    n = variety.n
    k = embedding_level(basis)
    # real coordinates (xi, eta) of z; d/dz = (d_xi - i d_eta)/2
    z0 = variety.omega @ x + y
    Q = variety.omega.imag

    def psi(zs):
        zs = np.atleast_2d(zs)
        xs = zs.imag @ variety.H.T
        ys = zs.real - xs @ variety.omega.real.T
        return _potential(variety, basis, xs, ys)

    h = _FD_STEP
    dirs = np.vstack([np.eye(n), 1j * np.eye(n)])  # d/dxi then d/deta
    g = np.zeros((n, n), dtype=complex)
    hess = np.zeros((2 * n, 2 * n))
    for a in range(2 * n):
        for b in range(a, 2 * n):
            if a == b:
                pts = np.array([z0 + h * dirs[a], z0, z0 - h * dirs[a]])
                va = psi(pts)
                hess[a, a] = (va[0] - 2 * va[1] + va[2]) / h ** 2
            else:
                pts = np.array([z0 + h * (dirs[a] + dirs[b]),
                                z0 + h * (dirs[a] - dirs[b]),
                                z0 - h * (dirs[a] - dirs[b]),
                                z0 - h * (dirs[a] + dirs[b])])
                va = psi(pts)
                hess[a, b] = hess[b, a] = (va[0] - va[1] - va[2] + va[3]) / (4 * h ** 2)
    for a in range(n):
        for b in range(n):
            g[a, b] = 0.25 * ((hess[a, b] + hess[n + a, n + b])
                              + 1j * (hess[a, n + b] - hess[n + a, b]))
    g /= 2.0 * np.pi * k
    g = 0.5 * (g + g.conj().T)
    return MetricValue(g=g)


def scheme_cross_check(variety, basis, x, y, rel_tol=1e-5) -> float:
    """Relative disagreement of the two schemes; warns above rel_tol."""
    ga = pullback_metric(variety, basis, x, y, "analytic").g
    gf = pullback_metric(variety, basis, x, y, "finite_difference").g
    rel = float(np.max(np.abs(ga - gf)) / np.max(np.abs(ga)))
    if rel > rel_tol:
        warnings.warn(f"schemes disagree by {rel:.2e}", SchemeDisagreementWarning)
    return rel


@dataclass(frozen=True)
class RegionDecomposition:
    """Grid split into singular neighborhoods D_k(e) and the complement U_k."""

    k: int
    delta: float
    radius: float
    d_mask: np.ndarray
    X: np.ndarray
    Y: np.ndarray

    @property
    def u_mask(self):
        return ~self.d_mask


def singular_distances(K: KummerVariety, X, Y) -> np.ndarray:
    """Quotient distance from each (x, y) sample to the nearest singular class."""
    X = np.atleast_2d(X)
    Y = np.atleast_2d(Y)
    # closed form: min over sigma, shifts of sqrt(2)*|Omega(x-sx)+(y-sy)+lam|_g0
    out = np.full(X.shape[0], np.inf)
    A = K.A
    rng = np.arange(-1, 2)
    grids = np.meshgrid(*([rng] * (2 * A.n)), indexing="ij")
    shifts = np.stack([g.ravel() for g in grids], axis=-1)
    lam = shifts[:, :A.n] @ A.omega.T + shifts[:, A.n:]
    for e in K.singular_points:
        ex, ey = e.rep.x, e.rep.y
        for sigma in (1.0, -1.0):
            dz = (X - sigma * ex) @ A.omega.T + (Y - sigma * ey)
            vecs = dz[:, None, :] + lam[None, :, :]
            norms = np.sqrt(np.abs(np.einsum("mli,ij,mlj->ml",
                                             vecs.conj(), A.H, vecs)))
            out = np.minimum(out, norms.min(axis=1))
    return np.sqrt(2.0) * out


def region_decomposition(K: KummerVariety, k: int, delta: float,
                         grid_per_dim: int = 16) -> RegionDecomposition:
    """Classify a torus grid into the D_k(e) balls and their complement U_k."""
    if k < 2:
        raise ValueError("k must be >= 2")
    if delta <= 0:
        raise ValueError("delta must be positive")
    radius = float(np.sqrt(np.log(k) / (delta * k)))
    X, Y = _torus_grid(K.n, grid_per_dim, symmetric_x=False)
    r = singular_distances(K, X, Y)
    return RegionDecomposition(k=k, delta=delta, radius=radius,
                               d_mask=r < radius, X=X, Y=Y)


def metric_error_field(K: KummerVariety, basis, grid_per_dim: int,
                       q: int = 0, avoid_singular=True):
    """Per-point C^q deviation of omega_k from the flat target on a torus grid.

    Returns dict with X, Y, r (distance to Sing), err_c0 and optionally err_c1.
    """
    if q not in (0, 1):
        raise ValueError("q must be 0 or 1")
    if isinstance(K, AbelianVariety):
        A = K
        K = KummerVariety(A)
    else:
        A = K.A
    g = grid_per_dim
    t = (np.arange(g) + 0.5) / g if avoid_singular else np.arange(g) / g
    axes = [t] * (2 * A.n)
    grids = np.meshgrid(*axes, indexing="ij")
    flat = [a.ravel() for a in grids]
    X = np.stack(flat[:A.n], axis=-1)
    Y = np.stack(flat[A.n:], axis=-1)
    target = metric_target(A, basis)
    gv = pullback_metric_grid(A, basis, X, Y)
    diff = gv - target[None, :, :]
    err_c0 = np.linalg.norm(diff, ord=2, axis=(1, 2))
    out = {"X": X, "Y": Y,
           "r": singular_distances(K, X, Y),
           "err_c0": err_c0}
    if q == 1:
        h = 1e-3
        derivs = []
        for a in range(A.n):
            e = np.zeros(A.n)
            e[a] = h
            gp = pullback_metric_grid(A, basis, X + e, Y)
            gm = pullback_metric_grid(A, basis, X - e, Y)
            derivs.append(np.linalg.norm(gp - gm, ord=2, axis=(1, 2)) / (2 * h))
            gp = pullback_metric_grid(A, basis, X, Y + e)
            gm = pullback_metric_grid(A, basis, X, Y - e)
            derivs.append(np.linalg.norm(gp - gm, ord=2, axis=(1, 2)) / (2 * h))
        out["err_c1"] = err_c0 + np.max(derivs, axis=0)
    return out


def error_field_to_csv(field, fh):
    import csv

    n = field["X"].shape[1]
    w = csv.writer(fh)
    header = ([f"x{i}" for i in range(n)] + [f"y{i}" for i in range(n)]
              + ["r", "err_c0"] + (["err_c1"] if "err_c1" in field else []))
    w.writerow(header)
    for i in range(field["X"].shape[0]):
        row = ([f"{v:.17g}" for v in field["X"][i]]
               + [f"{v:.17g}" for v in field["Y"][i]]
               + [f"{field['r'][i]:.17g}", f"{field['err_c0'][i]:.17g}"])
        if "err_c1" in field:
            row.append(f"{field['err_c1'][i]:.17g}")
        w.writerow(row)


# ---------------------------------------------------------------------------
# graph geodesics under a sampled metric field
# ---------------------------------------------------------------------------

class MetricGraph:
    """Torus grid graph with edge lengths from a sampled Kahler metric field.

    Edge weight between neighbors p, q (Chebyshev radius 1) is the chord length
    of Delta z under the average of the endpoint coefficient matrices, with the
    omega-metric convention |v|^2 = 2 v^H g v.
    """

    def __init__(self, variety: AbelianVariety, grid_per_dim: int, g_field,
                 X, Y):
        self.variety = variety
        self.g = grid_per_dim
        self.field = g_field
        self.X = X
        self.Y = Y
        n = variety.n
        self.shape = (grid_per_dim,) * (2 * n)
        offs = np.stack([a.ravel() for a in
                         np.meshgrid(*([np.arange(-1, 2)] * (2 * n)),
                                     indexing="ij")], axis=-1)
        self.offsets = offs[np.any(offs != 0, axis=1)]

    def node_index(self, coords):
        """Index of the grid node nearest to torus coordinates (x..., y...)."""
        c = np.atleast_1d(np.asarray(coords, dtype=float)).ravel()
        idx = np.mod(np.round(c * self.g).astype(int), self.g)
        return int(np.ravel_multi_index(tuple(idx), self.shape))

    def _edge_lengths(self, idx):
        coords = np.array(np.unravel_index(idx, self.shape))
        nbrs = (coords[None, :] + self.offsets) % self.g
        nbr_idx = np.ravel_multi_index(tuple(nbrs.T), self.shape)
        n = self.variety.n
        dz = (self.offsets[:, :n] @ self.variety.omega.T
              + self.offsets[:, n:]) / self.g
        g_avg = 0.5 * (self.field[idx][None] + self.field[nbr_idx])
        sq = 2.0 * np.real(np.einsum("mi,mij,mj->m", dz.conj(), g_avg, dz))
        return nbr_idx, np.sqrt(np.maximum(sq, 0.0))

    def distance(self, src_idx, dst_idx=None):
        """Dijkstra from src; returns the full distance array or one entry."""
        ntot = int(np.prod(self.shape))
        dist = np.full(ntot, np.inf)
        dist[src_idx] = 0.0
        heap = [(0.0, src_idx)]
        done = np.zeros(ntot, dtype=bool)
        while heap:
            d, u = heapq.heappop(heap)
            if done[u]:
                continue
            done[u] = True
            if dst_idx is not None and u == dst_idx:
                return d
            nbr, w = self._edge_lengths(u)
            for v, wv in zip(nbr, w):
                nd = d + wv
                if nd < dist[v]:
                    dist[v] = nd
                    heapq.heappush(heap, (nd, v))
        if dst_idx is not None:
            raise DisconnectedError("no path found on torus grid")
        return dist


def metric_graph(variety: AbelianVariety, basis, grid_per_dim: int,
                 flat=False) -> MetricGraph:
    """Build the grid graph under omega_k (or the flat omega target)."""
    X, Y = _torus_grid(variety.n, grid_per_dim, symmetric_x=False)
    if flat:
        field = np.repeat(metric_target(variety, basis)[None, :, :].astype(complex),
                          X.shape[0], axis=0)
    else:
        field = pullback_metric_grid(variety, basis, X, Y)
    return MetricGraph(variety, grid_per_dim, field, X, Y)


def graph_distance_dk(graph: MetricGraph, p_coords, q_coords) -> float:
    """Shortest grid-path length between two grid nodes given by index tuples."""
    return float(graph.distance(graph.node_index(p_coords),
                                graph.node_index(q_coords)))
