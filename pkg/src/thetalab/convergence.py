"""Fibration-convergence diagnostics: zero-section map phi_k, distortion and
covering of the base, fiber collapse, tangent-space leaks and rate fitting."""

import json
from dataclasses import dataclass, asdict

import numpy as np

from .abelian import AbelianVariety, SectionBasis
from .embedding import (
    AmoebaCloud,
    SimplexPoint,
    amoeba_points,
    directed_hausdorff,
    embedding_level,
    simplex_distance,
    simplex_distance_matrix,
    _frame_at,
)
from .errors import BasePointError, ChartFailureError, NonPositiveValueError
from .kummer import (
    BasePoint,
    InvariantBasis,
    KummerVariety,
    abelian_base_distance,
    base_distance,
    base_rep,
)

_CHART_FLOOR = 1e-12


@dataclass(frozen=True)
class HausdorffApproxReport:
    """Distortion and covering data of phi_k as a Hausdorff approximation."""

    k: int
    distortion: float
    covering_radius: float
    eps: float
    gh_upper: float

    def to_json(self):
        return json.dumps(asdict(self), sort_keys=True)


@dataclass(frozen=True)
class RateTable:
    """Log-log fit of a positive error functional against a model predictor."""

    model: str
    ks: tuple
    values: tuple
    slope: float
    intercept: float
    residual: float

    def rows(self):
        return list(zip(self.ks, self.values,
                        [_RATE_MODELS[self.model](k) for k in self.ks]))

    def to_csv(self, fh):
        import csv

        w = csv.writer(fh)
        w.writerow(["k", "value", "model_predictor"])
        for k, v, p in self.rows():
            w.writerow([k, f"{v:.17g}", f"{p:.17g}"])


_RATE_MODELS = {
    "sqrt_logk_over_k": lambda k: np.sqrt(np.log(k) / k),
    "inv_k": lambda k: 1.0 / k,
    "inv_sqrt_k": lambda k: 1.0 / np.sqrt(k),
}


def rate_fit(values, model: str) -> RateTable:
    """Least squares of log(value) against log(model predictor)."""
    if model not in _RATE_MODELS:
        raise ValueError(f"unknown rate model {model!r}")
    values = list(values)
    if len(values) < 3:
        raise ValueError("rate fit needs at least 3 rows")
    ks = np.array([float(k) for k, _ in values])
    vs = np.array([float(v) for _, v in values])
    if np.any(vs <= 0):
        raise NonPositiveValueError("rate fit requires positive values")
    pred = np.array([_RATE_MODELS[model](k) for k in ks])
    slope, intercept = np.polyfit(np.log(pred), np.log(vs), 1)
    resid = float(np.max(np.abs(np.log(vs)
                                - (slope * np.log(pred) + intercept))))
    return RateTable(model=model, ks=tuple(ks.tolist()),
                     values=tuple(vs.tolist()), slope=float(slope),
                     intercept=float(intercept), residual=resid)


def _is_kummer(basis):
    return isinstance(basis, InvariantBasis)


def base_metric_distance(variety: AbelianVariety, basis, y1, y2) -> float:
    """Submersion base distance appropriate to the family of the basis."""
    if _is_kummer(basis):
        from .kummer import KummerVariety as _KV

        K = _KV(variety)
        return base_distance(K, base_rep(y1), base_rep(y2))
    return abelian_base_distance(variety, y1, y2, factor=1.0)


def phi_k(variety: AbelianVariety, basis, y) -> SimplexPoint:
    """pi_k at the zero-section lift (x = 0, y)."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    xi = amoeba_points(variety, basis, np.zeros((1, variety.n)), y[None, :])
    return SimplexPoint(xi=xi[0])


def _intrinsic_distance_matrix(chordal, db):
    """Path metric through the sample graph: neighbors in base distance are
    joined by their chordal sheet length, then all-pairs shortest paths."""
    from scipy.sparse import csr_matrix
    from scipy.sparse.csgraph import shortest_path

    pos = db[db > 1e-12]
    if pos.size == 0:
        return chordal
    thresh = 3.0 * float(np.min(pos))
    adj = np.where(db <= thresh, chordal, 0.0)
    np.fill_diagonal(adj, 0.0)
    return shortest_path(csr_matrix(adj), method="D", directed=False)


def distortion_report(variety: AbelianVariety, basis, base_samples,
                      dense_cloud: AmoebaCloud,
                      metric: str = "intrinsic") -> HausdorffApproxReport:
    """Pairwise distortion of phi_k plus the covering radius of its image.

    base_samples: (m, n) array of base coordinates y.  metric selects how the
    image of phi_k is measured: "chordal" uses the ambient sheet distance
    (which saturates at (pi/2)/sqrt(pi k) between far points), "intrinsic"
    uses shortest paths through the sampled image.  The covering radius is the
    directed Hausdorff distance from the dense amoeba cloud to the image.
    """
    if metric not in ("chordal", "intrinsic"):
        raise ValueError(f"unknown image metric {metric!r}")
    ys = np.atleast_2d(np.asarray(base_samples, dtype=float))
    m = ys.shape[0]
    if m < 2:
        raise ValueError("need at least 2 base samples")
    k = embedding_level(basis)
    xi = amoeba_points(variety, basis, np.zeros_like(ys), ys)
    dk = simplex_distance_matrix(k, xi, xi)
    db = np.zeros((m, m))
    for i in range(m):
        for j in range(i + 1, m):
            db[i, j] = db[j, i] = base_metric_distance(variety, basis,
                                                       ys[i], ys[j])
    if metric == "intrinsic":
        dk = _intrinsic_distance_matrix(dk, db)
    distortion = float(np.max(np.abs(db - dk)))
    covering = directed_hausdorff(k, dense_cloud.xi, xi)
    eps = max(distortion, covering)
    return HausdorffApproxReport(k=k, distortion=distortion,
                                 covering_radius=covering, eps=eps,
                                 gh_upper=2.0 * eps)


def fiber_collapse(variety: AbelianVariety, basis, y,
                   fiber_grid: int = 256) -> float:
    """Diameter in the sheet metric of the moment image of the fiber over y."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    axes = [np.arange(fiber_grid) / fiber_grid] * variety.n
    grids = np.meshgrid(*axes, indexing="ij")
    X = np.stack([g.ravel() for g in grids], axis=-1)
    Y = np.broadcast_to(y, X.shape).copy()
    xi = amoeba_points(variety, basis, X, Y)
    if xi.shape[0] == 1:
        return 0.0
    k = embedding_level(basis)
    best = 0.0
    step = 1024
    for lo in range(0, xi.shape[0], step):
        D = simplex_distance_matrix(k, xi[lo:lo + step], xi)
        best = max(best, float(D.max()))
    return best


def map_deviation(variety: AbelianVariety, basis, x, y) -> float:
    """Sheet distance between phi_k(pi(p)) and pi_k(p) for p = (x, y)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    k = embedding_level(basis)
    xi_p = amoeba_points(variety, basis, x[None, :], y[None, :])[0]
    xi_b = phi_k(variety, basis, y).xi
    return simplex_distance(k, xi_b, xi_p)


def map_deviation_sup(variety: AbelianVariety, basis, grid_per_dim: int) -> float:
    """Sup of the map deviation over a uniform torus grid."""
    from .abelian import _torus_grid

    g = grid_per_dim
    X, Y = _torus_grid(variety.n, g, symmetric_x=False)
    k = embedding_level(basis)
    xi = amoeba_points(variety, basis, X, Y)
    xi0 = amoeba_points(variety, basis, np.zeros_like(X), Y)
    a = np.sqrt(np.clip(xi, 0.0, None))
    b = np.sqrt(np.clip(xi0, 0.0, None))
    c = np.clip(np.sum(a * b, axis=1), -1.0, 1.0)
    return float(np.max(np.arccos(c)) / np.sqrt(np.pi * k))


def pushforward_log_ratios(variety: AbelianVariety, basis, x, y,
                           chart=None):
    """Gradients of log(Z^j/Z^chart) and the moment weights at (x, y).

    Returns (dw, xi, chart): dw has shape (N+1, n) with the chart row zero.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    F, dF, _ = _frame_at(basis, variety, x[None, :], y[None, :], grad=True)
    F, dF = F[0], dF[0]
    top = np.max(np.abs(F))
    if top < 1e-200:
        raise BasePointError("embedding undefined at this point")
    if chart is None:
        chart = int(np.argmax(np.abs(F)))
    if abs(F[chart]) < _CHART_FLOOR * top:
        raise ChartFailureError(f"chart coordinate {chart} too small")
    dlog = dF / F[:, None]
    dw = dlog - dlog[chart][None, :]
    sq = np.abs(F / top) ** 2
    xi = sq / sq.sum()
    return dw, xi, chart


def leaks_from_pushforward(dw, xi, zeta) -> tuple:
    """(horizontal, vertical, total) FS-lengths of the pushforward of the
    tangent vector with complex velocity zeta.

    The Fubini-Study metric in the log-affine chart is G = diag(xi) - xi xi^T;
    horizontal and vertical parts are the real and imaginary components of the
    pushed log coordinates.
    """
    c = dw @ np.asarray(zeta, dtype=complex)
    du, dv = c.real, c.imag
    G = np.diag(xi) - np.outer(xi, xi)
    h2 = 2.0 * float(du @ G @ du)
    v2 = 2.0 * float(dv @ G @ dv)
    return np.sqrt(max(h2, 0.0)), np.sqrt(max(v2, 0.0)), np.sqrt(max(h2 + v2, 0.0))


def single_phase_model_pushforward(variety: AbelianVariety, offsets):
    """Log-ratio gradients of the idealized single-exponential model
    Z^j/Z^0 = C_j exp(2 pi i (b_j - b_0)^T Omega^{-1} z): each row is
    2 pi i Omega^{-1} (b_j - b_0).  With purely imaginary Omega these rows are
    real, so the fiber velocity Omega e_a pushes to a purely imaginary
    (vertical) vector and the vertical leak vanishes identically."""
    offs = np.atleast_2d(np.asarray(offsets, dtype=float))
    return 2j * np.pi * np.linalg.solve(variety.omega, offs.T).T


def fs_normalization_integral(variety: AbelianVariety, basis,
                              grid_per_dim: int = 64) -> float:
    """Torus quadrature of the rescaled pulled-back Fubini-Study form over A
    (n = 1 only); equals 1 for the flat abelian target."""
    if variety.n != 1:
        raise ValueError("normalization integral implemented for n = 1")
    from .abelian import _torus_grid
    from .metrics import pullback_metric_grid

    X, Y = _torus_grid(variety.n, grid_per_dim, symmetric_x=False)
    g = pullback_metric_grid(variety, basis, X, Y)
    mean_g = float(np.real(np.mean(g[:, 0, 0])))
    det_q = float(variety.omega.imag[0, 0])
    return 2.0 * mean_g * det_q


def tangent_distortion(variety: AbelianVariety, basis, x, y,
                       chart=None) -> tuple:
    """(vertical_leak, horizontal_leak): worst leakage of the fiber frame
    d/dx^a into the horizontal distribution and of J d/dx^a into the vertical
    one, as fractions of the total pushforward length."""
    dw, xi, _ = pushforward_log_ratios(variety, basis, x, y, chart=chart)
    n = variety.n
    vleak = 0.0
    hleak = 0.0
    for a in range(n):
        zeta_fiber = variety.omega[:, a]
        h, v, tot = leaks_from_pushforward(dw, xi, zeta_fiber)
        if tot > 0:
            vleak = max(vleak, h / tot)
        h, v, tot = leaks_from_pushforward(dw, xi, 1j * zeta_fiber)
        if tot > 0:
            hleak = max(hleak, v / tot)
    return vleak, hleak
