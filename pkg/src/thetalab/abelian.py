"""Abelian variety A = C^n/(Omega Z^n + Z^n): flat metric, level-k section basis,
Hermitian norms, orthonormality and asymptotic diagnostics.

Sections are evaluated through the holomorphic lattice sum

    S_b(z) = sum_l e( (1/(2k)) l^T Omega l + l^T (z - b) ),

which is the theta sum for period matrix Omega/k at argument z - b.  All batch
evaluations reduce the fiber coordinate x to [-1/2, 1/2) first; this changes
every section by the same automorphy factor and keeps the Gaussian peak of the
sum inside a small shared lattice box.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DivisionUnderflowError, GridTooCoarseWarning
from .theta import (
    DEFAULT_POLICY,
    PeriodMatrix,
    TruncationPolicy,
    TWO_PI_I,
    gaussian_shell_radius,
    _lattice_box,
)

_CHUNK = 8192


class AbelianVariety:
    """Period matrix together with the flat-metric data H = (Im Omega)^-1."""

    def __init__(self, P: PeriodMatrix):
        self.P = P
        self.H = P.im_inv
        resid = np.max(np.abs(self.H @ P.im - np.eye(P.n)))
        if resid > 1e-10:
            raise ValueError(f"H * Im(Omega) deviates from identity by {resid:.2e}")

    @property
    def n(self):
        return self.P.n

    @property
    def omega(self):
        return self.P.omega


@dataclass(frozen=True)
class AbelianPoint:
    """Torus coordinates (x, y) of the point z = Omega x + y."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.mod(np.atleast_1d(np.asarray(self.x, dtype=float)), 1.0)
        y = np.mod(np.atleast_1d(np.asarray(self.y, dtype=float)), 1.0)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)


def to_complex(A: AbelianVariety, p: AbelianPoint) -> np.ndarray:
    return A.omega @ p.x + p.y


def from_complex(A: AbelianVariety, z) -> AbelianPoint:
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    x = A.H @ z.imag
    y = z.real - A.omega.real @ x
    return AbelianPoint(x, y)


def torsion_points(n: int, k: int) -> np.ndarray:
    """The k^n points of (1/k)Z^n / Z^n in row-major order, shape (k^n, n)."""
    axes = [np.arange(k) / k] * n
    grids = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=-1)


@dataclass(frozen=True)
class SectionBasis:
    """Level-k basis metadata: characteristics b_i, normalization, truncation."""

    k: int
    characteristics: np.ndarray
    c_omega: float
    pol: TruncationPolicy = DEFAULT_POLICY

    def __post_init__(self):
        chars = np.atleast_2d(np.asarray(self.characteristics, dtype=float))
        object.__setattr__(self, "characteristics", chars)
        n = chars.shape[1]
        if chars.shape[0] != self.k ** n:
            raise ValueError("basis must list all k^n torsion characteristics")

    @property
    def size(self):
        return self.characteristics.shape[0]


def section_basis(A: AbelianVariety, k: int,
                  pol: TruncationPolicy = DEFAULT_POLICY) -> SectionBasis:
    if k < 1:
        raise ValueError("level k must be >= 1")
    c_omega = 2 ** (A.n / 4.0) * np.linalg.det(A.P.im) ** 0.25
    return SectionBasis(k=k, characteristics=torsion_points(A.n, k),
                        c_omega=c_omega, pol=pol)


@dataclass(frozen=True)
class HermitianSectionValue:
    """Raw section value and its pointwise Hermitian norm."""

    raw: complex
    h_norm: float


# ---------------------------------------------------------------------------
# batched holomorphic frames
# ---------------------------------------------------------------------------

def _level_lattice(A: AbelianVariety, kk: int, pol: TruncationPolicy):
    """Shared lattice box covering the peaks for all x_red in [-1/2, 1/2]^n."""
    chol = np.linalg.cholesky(A.P.im / kk)
    s = gaussian_shell_radius(chol, 0.0, pol.eps)
    inv_l = np.linalg.inv(chol)
    widths = kk / 2.0 + s * np.linalg.norm(inv_l, axis=0)
    return _lattice_box(np.zeros(A.n), widths)


def reduce_fiber(x):
    """Map fiber coordinates to the symmetric representative in [-1/2, 1/2)."""
    return x - np.round(x)


def holomorphic_frame(A: AbelianVariety, kk: int, chars, X, Y,
                      pol: TruncationPolicy = DEFAULT_POLICY, grad=False):
    """Evaluate S_b at z = Omega x_red + y for every point and characteristic.

    Parameters
    ----------
    kk : level of the lattice sum (Omega/kk weighting).
    chars : (nb, n) characteristics b.
    X, Y : (m, n) torus coordinates; X is reduced internally.

    Returns
    -------
    S : (m, nb) complex values; dS : (m, nb, n) gradients if grad else None;
    x_red : (m, n) reduced fiber coordinates.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    chars = np.atleast_2d(np.asarray(chars, dtype=float))
    x_red = reduce_fiber(X)
    Z = x_red @ A.omega.T + Y
    ls = _level_lattice(A, kk, pol)
    quad = np.exp(TWO_PI_I * (0.5 / kk)
                  * np.einsum("li,ij,lj->l", ls, A.omega, ls))
    B = np.exp(-TWO_PI_I * (chars @ ls.T))
    m = Z.shape[0]
    S = np.empty((m, chars.shape[0]), dtype=complex)
    dS = np.empty((m, chars.shape[0], A.n), dtype=complex) if grad else None
    for lo in range(0, m, _CHUNK):
        hi = min(lo + _CHUNK, m)
        E = np.exp(TWO_PI_I * (Z[lo:hi] @ ls.T)) * quad
        S[lo:hi] = E @ B.T
        if grad:
            for alpha in range(A.n):
                dS[lo:hi, :, alpha] = (E * (TWO_PI_I * ls[:, alpha])) @ B.T
    return S, dS, x_red


def _h_weight(A: AbelianVariety, kk: int, x_red):
    """exp(-2 pi kk x^T (Im Omega) x), the Hermitian weight at reduced x."""
    return np.exp(-2.0 * np.pi * kk
                  * np.einsum("mi,ij,mj->m", x_red, A.P.im, x_red))


def section_value(A: AbelianVariety, basis: SectionBasis, b: int,
                  z) -> HermitianSectionValue:
    """Value of s_b at z with its pointwise h-norm.

    raw carries the full prefactor at the given z; h_norm is evaluated through
    the lattice-periodic reduced representative and is finite for any z.
    """
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    k = basis.k
    x = A.H @ z.imag
    y = z.real - A.omega.real @ x
    S, _, x_red = holomorphic_frame(
        A, k, basis.characteristics[b:b + 1], x[None, :], y[None, :],
        pol=basis.pol)
    s_red = S[0, 0]
    h2 = (basis.c_omega ** 2 * k ** (-A.n / 2.0)
          * abs(s_red) ** 2 * _h_weight(A, k, x_red)[0])
    # automorphy factor relating the reduced sum back to z:
    # S_b(z_red + Omega j) = e(-(k/2) j^T Omega j - k j^T z_red) S_b(z_red)
    j = np.round(x)
    z_red = z - A.omega @ j
    fac = np.exp(TWO_PI_I * (-0.5 * k * (j @ A.omega @ j) - k * (j @ z_red)))
    pref = np.exp(np.pi * k / 2.0 * (z @ A.H @ z))
    raw = basis.c_omega * k ** (-A.n / 4.0) * pref * fac * s_red
    return HermitianSectionValue(raw=complex(raw), h_norm=float(np.sqrt(h2)))


def _torus_grid(n: int, grid_per_dim: int, symmetric_x=True):
    """Uniform (x, y) grid on the torus, x optionally in [-1/2, 1/2)."""
    g = grid_per_dim
    t = np.arange(g) / g
    xs = t - 0.5 if symmetric_x else t
    axes = [xs] * n + [t] * n
    grids = np.meshgrid(*axes, indexing="ij")
    flat = [a.ravel() for a in grids]
    X = np.stack(flat[:n], axis=-1)
    Y = np.stack(flat[n:], axis=-1)
    return X, Y


def gram_matrix(A: AbelianVariety, basis: SectionBasis,
                grid_per_dim: int) -> np.ndarray:
    """L^2 Gram matrix of the basis by the equal-weight torus quadrature rule."""
    if grid_per_dim < 8:
        raise ValueError("grid_per_dim must be >= 8")
    X, Y = _torus_grid(A.n, grid_per_dim)
    S, _, x_red = holomorphic_frame(A, basis.k, basis.characteristics, X, Y,
                                    pol=basis.pol)
    w = _h_weight(A, basis.k, x_red)
    Sw = S * np.sqrt(w)[:, None]
    scale = basis.c_omega ** 2 * basis.k ** (-A.n / 2.0) / X.shape[0]
    G = scale * (Sw.conj().T @ Sw)
    off = np.max(np.abs(G - np.diag(np.diagonal(G))))
    if off > 0.1:
        import warnings

        warnings.warn(
            f"off-diagonal Gram mass {off:.3f} suggests an under-resolved grid",
            GridTooCoarseWarning,
        )
    return G


def bergman_density(A: AbelianVariety, basis: SectionBasis, z) -> float:
    """Density of states rho_k(z), the sum of squared section h-norms."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    x = A.H @ z.imag
    y = z.real - A.omega.real @ x
    return float(bergman_density_grid(A, basis, x[None, :], y[None, :])[0])


def bergman_density_grid(A: AbelianVariety, basis: SectionBasis, X, Y):
    """Vectorized rho_k over torus coordinate arrays of shape (m, n)."""
    S, _, x_red = holomorphic_frame(A, basis.k, basis.characteristics, X, Y,
                                    pol=basis.pol)
    w = _h_weight(A, basis.k, x_red)
    return (basis.c_omega ** 2 * basis.k ** (-A.n / 2.0)
            * np.sum(np.abs(S) ** 2, axis=1) * w)


def asymptotic_residual(A: AbelianVariety, basis: SectionBasis, b: int,
                        z) -> complex:
    """Remainder phi of the stationary-phase form of S_b, cf. the level-k
    Gaussian approximation S_b ~ k^{n/2} det(-i Omega)^{-1/2} e(-(k/2) w^T
    Omega^-1 w) with w = z - b."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    k = basis.k
    w = z - basis.characteristics[b]
    lead = (k ** (A.n / 2.0)
            * np.sqrt(np.linalg.det(-1j * A.omega)) ** -1
            * np.exp(TWO_PI_I * (-0.5 * k * (w @ np.linalg.solve(A.omega, w)))))
    if abs(lead) < 1e-300:
        raise DivisionUnderflowError("leading term underflows; residual meaningless")
    from .theta import Characteristic, theta

    Pk = PeriodMatrix(A.omega / k)
    s_val = theta(Characteristic(np.zeros(A.n), np.zeros(A.n)), Pk, w,
                  basis.pol)
    return complex(s_val / lead - 1.0)


def torus_distance(y, b):
    """Euclidean distance on the unit torus R^n/Z^n."""
    d = np.asarray(y, dtype=float) - np.asarray(b, dtype=float)
    d = d - np.round(d)
    return float(np.linalg.norm(d))


@dataclass(frozen=True)
class GaussianDecayFit:
    """Fitted envelope h^2 <= C k^{n/2} exp(-c k d^2) and its violation count."""

    C: float
    c: float
    violations: int
    max_ratio: float


def gaussian_decay_check(A: AbelianVariety, basis: SectionBasis,
                         grid_per_dim: int = 64,
                         bound=None) -> GaussianDecayFit:
    """Check the Gaussian decay envelope of section norms in the base distance.

    Without a prior fit, c is estimated by least squares at this level (then
    shrunk for headroom) and C is the smallest constant covering the samples.
    With `bound` = (C, c) the envelope is checked as-is.
    """
    X, Y = _torus_grid(A.n, grid_per_dim)
    S, _, x_red = holomorphic_frame(A, basis.k, basis.characteristics, X, Y,
                                    pol=basis.pol)
    w = _h_weight(A, basis.k, x_red)
    h2 = (basis.c_omega ** 2 * basis.k ** (-A.n / 2.0)
          * np.abs(S) ** 2 * w[:, None])  # (m, nb)
    d2 = np.empty_like(h2)
    for i, b in enumerate(basis.characteristics):
        dd = Y - b
        dd = dd - np.round(dd)
        d2[:, i] = np.sum(dd * dd, axis=1)
    k = basis.k
    logh = np.log(np.maximum(h2, 1e-300)) - (A.n / 2.0) * np.log(k)
    if bound is None:
        mask = h2.ravel() > 1e-40  # keep the fit away from underflow noise
        kd2 = (k * d2).ravel()[mask]
        lv = logh.ravel()[mask]
        slope, intercept = np.polyfit(kd2, lv, 1)
        c = 0.8 * max(-slope, 1e-12)
        C = 1.05 * float(np.max(np.exp(logh + c * k * d2)))
    else:
        C, c = bound
    ratio = np.exp(logh + c * k * d2) / C
    return GaussianDecayFit(C=float(C), c=float(c),
                            violations=int(np.sum(ratio > 1.0)),
                            max_ratio=float(np.max(ratio)))


def flat_metric_norm(A: AbelianVariety, w) -> float:
    """Norm of a tangent vector w in the flat metric g0 = Re sum H dz dzbar."""
    w = np.atleast_1d(np.asarray(w, dtype=complex))
    return float(np.sqrt(np.real(w.conj() @ A.H @ w)))


def flat_distance(A: AbelianVariety, p: AbelianPoint, q: AbelianPoint) -> float:
    """Geodesic distance of the flat metric on A, exact for the flat torus."""
    dz = to_complex(A, p) - to_complex(A, q)
    rng = np.arange(-2, 3)
    best = np.inf
    grids = np.meshgrid(*([rng] * (2 * A.n)), indexing="ij")
    flat = np.stack([g.ravel() for g in grids], axis=-1)
    lam = flat[:, :A.n] @ A.omega.T + flat[:, A.n:]
    vecs = dz[None, :] + lam
    norms = np.sqrt(np.abs(np.einsum("mi,ij,mj->m", vecs.conj(), A.H, vecs)))
    return float(np.min(norms))
