"""Theta functions with characteristics and rigorous lattice-sum truncation.

The lattice sum runs over integer points in an axis-aligned box containing an
ellipsoidal shell around the Gaussian peak of the summand.  The shell radius is
derived from a Gaussian tail integral bound, so the truncation error is
controlled in absolute terms.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaincc

from .errors import (
    NotPositiveDefiniteError,
    NotSymmetricError,
    RadiusOverflowError,
)

TWO_PI_I = 2j * np.pi

_SYMMETRY_TOL = 1e-12


@dataclass(frozen=True)
class TruncationPolicy:
    """Absolute tail bound target and a safety cap on the lattice radius."""

    eps: float = 1e-12
    max_radius: int = 64

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if self.max_radius < 1:
            raise ValueError("max_radius must be >= 1")


DEFAULT_POLICY = TruncationPolicy()


class PeriodMatrix:
    """Validated symmetric period matrix with positive-definite imaginary part.

    Caches the lower-triangular Cholesky factor of Im(omega) together with its
    inverse, both immutable after construction.
    """

    def __init__(self, omega):
        omega = np.atleast_2d(np.asarray(omega, dtype=complex))
        if omega.ndim != 2 or omega.shape[0] != omega.shape[1]:
            raise ValueError("period matrix must be square")
        if not np.all(np.isfinite(omega)):
            raise ValueError("period matrix entries must be finite")
        asym = np.max(np.abs(omega - omega.T))
        if asym > _SYMMETRY_TOL:
            raise NotSymmetricError(
                f"period matrix asymmetry {asym:.3e} exceeds {_SYMMETRY_TOL:.0e}"
            )
        self.omega = omega
        self.n = omega.shape[0]
        self.im = omega.imag.copy()
        try:
            self.im_cholesky = np.linalg.cholesky(self.im)
        except np.linalg.LinAlgError as exc:
            raise NotPositiveDefiniteError(
                "imaginary part of the period matrix is not positive definite"
            ) from exc
        self.im_inv = np.linalg.inv(self.im)
        for arr in (self.omega, self.im, self.im_cholesky, self.im_inv):
            arr.setflags(write=False)

    def __repr__(self):
        return f"PeriodMatrix(n={self.n})"


def validate_period_matrix(raw) -> PeriodMatrix:
    """Validate a raw square complex matrix as a period matrix."""
    return PeriodMatrix(raw)


@dataclass(frozen=True)
class Characteristic:
    """Real theta characteristic pair (a, b)."""

    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.a, dtype=float))
        b = np.atleast_1d(np.asarray(self.b, dtype=float))
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise ValueError("characteristic entries must be finite")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)


def zero_characteristic(n: int) -> Characteristic:
    return Characteristic(np.zeros(n), np.zeros(n))


def gaussian_shell_radius(chol, scale_exponent, eps, max_steps=4096):
    """Smallest shell radius (in the Cholesky metric) with tail mass <= eps.

    The summand magnitudes are exp(scale_exponent) * exp(-pi |u|^2) on the
    lattice chol.T @ Z^n.  The tail over |u| > s is bounded by the Gaussian
    tail integral divided by the lattice covolume, inflated by half the cell
    diameter to account for off-grid shifts.
    """
    n = chol.shape[0]
    covol = float(np.prod(np.diagonal(chol)))
    cell = 0.5 * np.sqrt(n) * float(np.max(np.linalg.norm(chol.T, axis=0)))
    for s in range(1, max_steps):
        r = s - cell
        if r <= 0:
            continue
        tail = np.exp(scale_exponent) * gammaincc(n / 2.0, np.pi * r * r) / covol
        if tail <= eps:
            return s
    raise RadiusOverflowError("Gaussian tail bound did not close")


def _peak_center(P: PeriodMatrix, ch: Characteristic, z):
    """Location in l-space of the summand's Gaussian peak."""
    v = np.imag(z + ch.b)
    return -ch.a - P.im_inv @ v


def _scale_exponent(P: PeriodMatrix, ch: Characteristic, z):
    """log of the peak summand magnitude, exp(pi v^T Y^-1 v)."""
    v = np.imag(z + ch.b)
    return float(np.pi * v @ P.im_inv @ v)


def truncation_radius(P: PeriodMatrix, ch: Characteristic, z, eps,
                      max_radius: int = 64) -> int:
    """Integer lattice radius enclosing all summands above the eps tail bound."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    s = gaussian_shell_radius(P.im_cholesky, _scale_exponent(P, ch, z), eps)
    inv_l = np.linalg.inv(P.im_cholesky)
    widths = s * np.linalg.norm(inv_l, axis=0)
    radius = int(np.ceil(np.max(widths)))
    if radius > max_radius:
        raise RadiusOverflowError(
            f"required radius {radius} exceeds cap {max_radius}"
        )
    return max(radius, 1)


def _lattice_box(center, widths):
    """Integer points in the axis-aligned box center +- widths (per axis)."""
    los = np.floor(center - widths).astype(int)
    his = np.ceil(center + widths).astype(int)
    axes = [np.arange(lo, hi + 1) for lo, hi in zip(los, his)]
    grids = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=-1)


def _kahan_sum(values):
    total = 0j
    carry = 0j
    for v in values:
        y = v - carry
        t = total + y
        carry = (t - total) - y
        total = t
    return total


def _theta_terms(ch: Characteristic, P: PeriodMatrix, z,
                 pol: TruncationPolicy):
    """Summands sorted by increasing distance from the Gaussian peak."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    s = gaussian_shell_radius(P.im_cholesky, _scale_exponent(P, ch, z), pol.eps)
    inv_l = np.linalg.inv(P.im_cholesky)
    widths = s * np.linalg.norm(inv_l, axis=0)
    if np.ceil(np.max(widths)) > pol.max_radius:
        raise RadiusOverflowError(
            f"required radius {int(np.ceil(np.max(widths)))} exceeds cap "
            f"{pol.max_radius}"
        )
    center = _peak_center(P, ch, z)
    ls = _lattice_box(center, widths)
    m = ls + ch.a
    quad = 0.5 * np.einsum("li,ij,lj->l", m, P.omega, m)
    lin = m @ (z + ch.b)
    vals = np.exp(TWO_PI_I * (quad + lin))
    dist = np.linalg.norm((m - center) @ P.im_cholesky, axis=1)
    order = np.argsort(dist, kind="stable")
    return vals[order], m[order]


def theta(ch: Characteristic, P: PeriodMatrix, z,
          pol: TruncationPolicy = DEFAULT_POLICY) -> complex:
    """Theta function with characteristics, truncated to absolute error <= pol.eps."""
    vals, _ = _theta_terms(ch, P, z, pol)
    return _kahan_sum(vals)


def theta_grad(ch: Characteristic, P: PeriodMatrix, z,
               pol: TruncationPolicy = DEFAULT_POLICY) -> np.ndarray:
    """z-gradient of the theta function, one component per coordinate."""
    vals, m = _theta_terms(ch, P, z, pol)
    return np.array([_kahan_sum(vals * (TWO_PI_I * m[:, alpha]))
                     for alpha in range(P.n)])
