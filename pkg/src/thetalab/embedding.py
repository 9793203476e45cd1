"""Projective embeddings, moment map, simplex sheet metric, amoeba clouds and
Hausdorff distances."""

import csv
import io
from dataclasses import dataclass

import numpy as np

from .abelian import AbelianVariety, SectionBasis, _torus_grid, holomorphic_frame
from .errors import BasePointError
from .kummer import InvariantBasis, invariant_frame

_ZERO_FLOOR = 1e-200


@dataclass(frozen=True)
class ProjectivePoint:
    """Unit-norm homogeneous coordinates, first nonzero coordinate real positive."""

    coords: np.ndarray

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.coords, dtype=complex))
        norm = np.linalg.norm(c)
        if norm == 0:
            raise ValueError("projective point cannot be the zero vector")
        c = c / norm
        lead = np.flatnonzero(np.abs(c) > 1e-14)[0]
        c = c * (np.abs(c[lead]) / c[lead])
        c.setflags(write=False)
        object.__setattr__(self, "coords", c)


@dataclass(frozen=True)
class SimplexPoint:
    """Point of the standard simplex: nonnegative weights summing to one."""

    xi: np.ndarray

    def __post_init__(self):
        xi = np.atleast_1d(np.asarray(self.xi, dtype=float))
        if np.any(xi < -1e-12):
            raise ValueError("simplex coordinates must be nonnegative")
        total = xi.sum()
        if abs(total - 1.0) > 1e-12:
            raise ValueError("simplex coordinates must sum to one")
        xi = np.clip(xi, 0.0, None)
        xi.setflags(write=False)
        object.__setattr__(self, "xi", xi)


def projective_angle(p: ProjectivePoint, q: ProjectivePoint) -> float:
    """Hermitian angle between two projective points."""
    c = np.abs(np.vdot(p.coords, q.coords))
    return float(np.arccos(min(c, 1.0)))


def _frame_at(basis, variety: AbelianVariety, X, Y, grad=False):
    if isinstance(basis, InvariantBasis):
        return invariant_frame(variety, basis, X, Y, grad=grad)
    return holomorphic_frame(variety, basis.k, basis.characteristics, X, Y,
                             pol=basis.pol, grad=grad)


def embedding_level(basis) -> int:
    """The k of omega_k = (1/k) iota_k^* omega_FS for this basis."""
    return basis.k


def embed(variety: AbelianVariety, basis, x, y) -> ProjectivePoint:
    """Projective image of the point with torus coordinates (x, y).

    The common holomorphic prefactor cancels projectively; raw values are
    rescaled by the largest magnitude before normalizing.
    """
    F, _, _ = _frame_at(basis, variety, np.atleast_2d(x), np.atleast_2d(y))
    v = F[0]
    top = np.max(np.abs(v))
    if top < _ZERO_FLOOR:
        raise BasePointError("all sections vanish at this point")
    return ProjectivePoint(coords=v / top)


def moment_map(p: ProjectivePoint) -> SimplexPoint:
    """Moment map of the diagonal torus action on CP^N."""
    sq = np.abs(p.coords) ** 2
    return SimplexPoint(xi=sq / sq.sum())


def simplex_distance(k: int, xi, xi_p) -> float:
    """Distance through the square-root sheet of the simplex under the
    (1/k)-scaled Fubini-Study normalization."""
    a = np.sqrt(np.clip(np.atleast_1d(np.asarray(xi, dtype=float)), 0.0, None))
    b = np.sqrt(np.clip(np.atleast_1d(np.asarray(xi_p, dtype=float)), 0.0, None))
    c = np.clip(float(a @ b), -1.0, 1.0)
    return float(np.arccos(c) / np.sqrt(np.pi * k))


def simplex_distance_matrix(k: int, Xi, Xi_p) -> np.ndarray:
    """Pairwise sheet distances between two stacks of simplex points."""
    a = np.sqrt(np.clip(np.asarray(Xi, dtype=float), 0.0, None))
    b = np.sqrt(np.clip(np.asarray(Xi_p, dtype=float), 0.0, None))
    c = np.clip(a @ b.T, -1.0, 1.0)
    return np.arccos(c) / np.sqrt(np.pi * k)


@dataclass
class AmoebaCloud:
    """Moment-map images of a torus sample, with their source coordinates."""

    k: int
    n: int
    sources_x: np.ndarray
    sources_y: np.ndarray
    xi: np.ndarray
    metric: str = "sheet"

    def __post_init__(self):
        if self.xi.shape[0] == 0:
            raise ValueError("amoeba cloud cannot be empty")

    @property
    def size(self):
        return self.xi.shape[0]


def amoeba_points(variety: AbelianVariety, basis, X, Y) -> np.ndarray:
    """Moment-map images of torus points (vectorized pi_k = mu_k o iota_k)."""
    F, _, _ = _frame_at(basis, variety, X, Y)
    mag = np.abs(F)
    top = np.max(mag, axis=1)
    if np.any(top < _ZERO_FLOOR):
        raise BasePointError("embedding undefined at a sample point")
    sq = (mag / top[:, None]) ** 2
    return sq / sq.sum(axis=1)[:, None]


def amoeba_sample(variety: AbelianVariety, basis, grid_per_dim: int,
                  metric: str = "sheet") -> AmoebaCloud:
    """Sample pi_k on a uniform (x, y) torus grid."""
    if grid_per_dim < 8:
        raise ValueError("grid_per_dim must be >= 8")
    X, Y = _torus_grid(variety.n, grid_per_dim, symmetric_x=False)
    xi = amoeba_points(variety, basis, X, Y)
    return AmoebaCloud(k=embedding_level(basis), n=variety.n,
                       sources_x=X, sources_y=Y, xi=xi, metric=metric)


def directed_hausdorff(k: int, Xi, Xi_p) -> float:
    """max over Xi of the min sheet distance into Xi_p."""
    best = np.full(Xi.shape[0], np.inf)
    step = 2048
    for lo in range(0, Xi_p.shape[0], step):
        D = simplex_distance_matrix(k, Xi, Xi_p[lo:lo + step])
        best = np.minimum(best, D.min(axis=1))
    return float(best.max())


def hausdorff_distance(cloud_a: AmoebaCloud, cloud_b: AmoebaCloud) -> float:
    """Symmetric Hausdorff distance between two clouds in the sheet metric."""
    if cloud_a.k != cloud_b.k or cloud_a.metric != cloud_b.metric:
        raise ValueError("clouds must share level and metric tag")
    return max(directed_hausdorff(cloud_a.k, cloud_a.xi, cloud_b.xi),
               directed_hausdorff(cloud_a.k, cloud_b.xi, cloud_a.xi))


# ---------------------------------------------------------------------------
# CSV serialization
# ---------------------------------------------------------------------------

def cloud_to_csv(cloud: AmoebaCloud, fh):
    n, nxi = cloud.n, cloud.xi.shape[1]
    writer = csv.writer(fh)
    header = (["k", "n"]
              + [f"src_x{i}" for i in range(n)]
              + [f"src_y{i}" for i in range(n)]
              + [f"xi_{i}" for i in range(nxi)])
    writer.writerow(header)
    for i in range(cloud.size):
        row = ([cloud.k, cloud.n]
               + [f"{v:.17g}" for v in cloud.sources_x[i]]
               + [f"{v:.17g}" for v in cloud.sources_y[i]]
               + [f"{v:.17g}" for v in cloud.xi[i]])
        writer.writerow(row)


def cloud_from_csv(fh) -> AmoebaCloud:
    reader = csv.reader(fh)
    header = next(reader)
    n = sum(1 for h in header if h.startswith("src_x"))
    rows = list(reader)
    k = int(rows[0][0])
    X = np.array([[float(v) for v in r[2:2 + n]] for r in rows])
    Y = np.array([[float(v) for v in r[2 + n:2 + 2 * n]] for r in rows])
    xi = np.array([[float(v) for v in r[2 + 2 * n:]] for r in rows])
    return AmoebaCloud(k=k, n=n, sources_x=X, sources_y=Y, xi=xi)


def cloud_csv_roundtrip(cloud: AmoebaCloud) -> AmoebaCloud:
    buf = io.StringIO()
    cloud_to_csv(cloud, buf)
    buf.seek(0)
    return cloud_from_csv(buf)
