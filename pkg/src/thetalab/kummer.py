"""Kummer variety X = A/(-1): canonical representatives, invariant section
basis, Lagrangian fibration and the quotient/base metrics."""

from dataclasses import dataclass

import numpy as np

from .abelian import (
    AbelianPoint,
    AbelianVariety,
    SectionBasis,
    _h_weight,
    _torus_grid,
    flat_distance,
    holomorphic_frame,
    section_basis,
    torsion_points,
)
from .theta import DEFAULT_POLICY, TruncationPolicy

_SNAP = 1e-12


def _mod1(v):
    v = np.mod(np.asarray(v, dtype=float), 1.0)
    v[np.abs(v - 1.0) < _SNAP] = 0.0
    return v


@dataclass(frozen=True)
class KummerPoint:
    """Canonical representative of {(x, y), (-x, -y)} on X = A/(-1)."""

    rep: AbelianPoint


@dataclass(frozen=True)
class BasePoint:
    """Canonical representative of {y, -y} on B = T^b/(-1)."""

    y_rep: np.ndarray


def canonical_rep(p: AbelianPoint) -> KummerPoint:
    v = np.concatenate([_mod1(p.x), _mod1(p.y)])
    w = np.concatenate([_mod1(-p.x), _mod1(-p.y)])
    keep = v if tuple(np.round(v / _SNAP)) <= tuple(np.round(w / _SNAP)) else w
    n = p.x.shape[0]
    return KummerPoint(rep=AbelianPoint(keep[:n], keep[n:]))


def base_rep(y) -> BasePoint:
    v = _mod1(np.atleast_1d(y))
    w = _mod1(-np.atleast_1d(y))
    keep = v if tuple(np.round(v / _SNAP)) <= tuple(np.round(w / _SNAP)) else w
    return BasePoint(y_rep=keep)


def fibration(p: KummerPoint) -> BasePoint:
    return base_rep(p.rep.y)


def _metric_blocks(A: AbelianVariety, factor: float):
    """Block form of factor * g0 in (dx, dy) coordinates."""
    Pr = A.omega.real
    Q = A.omega.imag
    H = A.H
    g_xx = factor * (Pr.T @ H @ Pr + Q)
    g_xy = factor * (Pr.T @ H)
    g_yy = factor * H
    return g_xx, g_xy, g_yy


def submersion_base_metric(A: AbelianVariety, factor: float = 2.0) -> np.ndarray:
    """Riemannian-submersion quotient metric on the base: the Schur complement
    of the fiber block of factor * g0."""
    g_xx, g_xy, g_yy = _metric_blocks(A, factor)
    return g_yy - g_xy.T @ np.linalg.solve(g_xx, g_xy)


class KummerVariety:
    """Quotient X = A/(-1) with its singular classes and base metric."""

    def __init__(self, A: AbelianVariety):
        self.A = A
        two_torsion = torsion_points(A.n, 2)
        self.singular_points = [
            canonical_rep(AbelianPoint(t[:A.n], t[A.n:]))
            for t in np.hstack([np.repeat(two_torsion, len(two_torsion), axis=0),
                                np.tile(two_torsion, (len(two_torsion), 1))])
        ]
        assert len(self.singular_points) == 2 ** (2 * A.n)
        self.base_metric = submersion_base_metric(A, factor=2.0)

    @property
    def n(self):
        return self.A.n


@dataclass(frozen=True)
class InvariantBasisEntry:
    """One invariant section: b index list into the inner basis plus weight."""

    indices: tuple
    weight: float
    fixed: bool


@dataclass(frozen=True)
class InvariantBasis:
    """Orthonormal basis of the (-1)-invariant sections at level 2k on A."""

    k: int
    entries: tuple
    inner: SectionBasis

    @property
    def size(self):
        return len(self.entries)


def invariant_basis(A: AbelianVariety, k: int,
                    pol: TruncationPolicy = DEFAULT_POLICY) -> InvariantBasis:
    """Pair s_b with s_{-b} (weight 2^{-n/2}) and keep the two-torsion
    characteristics alone (weight 2^{-(n-1)/2})."""
    inner = section_basis(A, 2 * k, pol=pol)
    chars = inner.characteristics
    index_of = {tuple(np.round(c * 2 * k).astype(int)): i
                for i, c in enumerate(chars)}
    n = A.n
    entries = []
    seen = set()
    for i, b in enumerate(chars):
        if i in seen:
            continue
        key_neg = tuple(np.round(_mod1(-b) * 2 * k).astype(int))
        j = index_of[key_neg]
        if i == j:
            entries.append(InvariantBasisEntry(indices=(i,),
                                               weight=2.0 ** (-(n - 1) / 2.0),
                                               fixed=True))
            seen.add(i)
        else:
            entries.append(InvariantBasisEntry(indices=(i, j),
                                               weight=2.0 ** (-n / 2.0),
                                               fixed=False))
            seen.add(i)
            seen.add(j)
    expected = 2 ** (n - 1) * (k ** n + 1)
    if len(entries) != expected:
        raise AssertionError(
            f"invariant basis has {len(entries)} entries, expected {expected}")
    return InvariantBasis(k=k, entries=tuple(entries), inner=inner)


def invariant_frame(A: AbelianVariety, basis: InvariantBasis, X, Y, grad=False):
    """Holomorphic frame of the invariant sections over (x, y) arrays."""
    S, dS, x_red = holomorphic_frame(A, basis.inner.k,
                                     basis.inner.characteristics, X, Y,
                                     pol=basis.inner.pol, grad=grad)
    cols = []
    dcols = []
    for e in basis.entries:
        acc = S[:, e.indices[0]].copy()
        dacc = dS[:, e.indices[0], :].copy() if grad else None
        for idx in e.indices[1:]:
            acc += S[:, idx]
            if grad:
                dacc += dS[:, idx, :]
        cols.append(e.weight * acc)
        if grad:
            dcols.append(e.weight * dacc)
    T = np.stack(cols, axis=1)
    dT = np.stack(dcols, axis=1) if grad else None
    return T, dT, x_red


def invariant_h_norms(A: AbelianVariety, basis: InvariantBasis, X, Y):
    """Pointwise squared h-norms |t_i|^2_h over (x, y) arrays, shape (m, N+1)."""
    T, _, x_red = invariant_frame(A, basis, X, Y)
    kk = basis.inner.k
    w = _h_weight(A, kk, x_red)
    scale = basis.inner.c_omega ** 2 * kk ** (-A.n / 2.0)
    return scale * np.abs(T) ** 2 * w[:, None]


def kummer_gram_matrix(A: AbelianVariety, basis: InvariantBasis,
                       grid_per_dim: int) -> np.ndarray:
    """Gram matrix of {t_i} on X; full-torus quadrature halved, then rescaled by
    the (2 omega_0)^n volume of the orbifold metric."""
    if grid_per_dim < 8:
        raise ValueError("grid_per_dim must be >= 8")
    X, Y = _torus_grid(A.n, grid_per_dim)
    T, _, x_red = invariant_frame(A, basis, X, Y)
    kk = basis.inner.k
    w = _h_weight(A, kk, x_red)
    Tw = T * np.sqrt(w)[:, None]
    scale = (2.0 ** (A.n - 1) * basis.inner.c_omega ** 2
             * kk ** (-A.n / 2.0) / X.shape[0])
    return scale * (Tw.conj().T @ Tw)


def base_distance(K: KummerVariety, u: BasePoint, v: BasePoint) -> float:
    """Distance on B = T^b/(-1) in the submersion quotient metric."""
    G = K.base_metric
    rng = np.arange(-2, 3)
    grids = np.meshgrid(*([rng] * K.n), indexing="ij")
    shifts = np.stack([g.ravel() for g in grids], axis=-1)
    best = np.inf
    for sigma in (1.0, -1.0):
        d = u.y_rep - sigma * v.y_rep + shifts
        vals = np.einsum("mi,ij,mj->m", d, G, d)
        best = min(best, float(np.min(vals)))
    return float(np.sqrt(best))


def abelian_base_distance(A: AbelianVariety, y1, y2,
                          factor: float = 1.0) -> float:
    """Base-torus distance for the abelian fibration (no +- identification)."""
    G = submersion_base_metric(A, factor=factor)
    rng = np.arange(-2, 3)
    grids = np.meshgrid(*([rng] * A.n), indexing="ij")
    shifts = np.stack([g.ravel() for g in grids], axis=-1)
    d = np.atleast_1d(y1) - np.atleast_1d(y2) + shifts
    vals = np.einsum("mi,ij,mj->m", d, G, d)
    return float(np.sqrt(np.min(vals)))


def quotient_distance(K: KummerVariety, p: KummerPoint,
                      q: KummerPoint) -> float:
    """Orbifold distance on X in the omega-metric (twice the flat g0)."""
    pa, qa = p.rep, q.rep
    d1 = flat_distance(K.A, pa, qa)
    d2 = flat_distance(K.A, pa, AbelianPoint(-qa.x, -qa.y))
    return float(np.sqrt(2.0) * min(d1, d2))
