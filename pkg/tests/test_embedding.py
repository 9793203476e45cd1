import io

import numpy as np
import pytest

from thetalab.abelian import AbelianPoint, AbelianVariety, section_basis
from thetalab.embedding import (
    ProjectivePoint,
    SimplexPoint,
    amoeba_sample,
    cloud_csv_roundtrip,
    cloud_from_csv,
    cloud_to_csv,
    directed_hausdorff,
    embed,
    hausdorff_distance,
    moment_map,
    projective_angle,
    simplex_distance,
    simplex_distance_matrix,
)
from thetalab.kummer import invariant_basis
from thetalab.theta import PeriodMatrix


@pytest.fixture(scope="module")
def square_torus():
    return AbelianVariety(PeriodMatrix(np.array([[1j]])))


class TestProjectivePoint:
    def test_rejects_zero_vector(self):
        with pytest.raises(ValueError):
            ProjectivePoint(np.zeros(3, dtype=complex))

    def test_phase_fixed_representative(self):
        p = ProjectivePoint(np.array([2j, 2.0]))
        q = ProjectivePoint(np.array([-2.0, 2j]))
        assert np.allclose(p.coords, q.coords)

    def test_angle_is_scale_invariant(self):
        p = ProjectivePoint(np.array([1.0, 2.0]))
        q = ProjectivePoint(np.array([3.0, 6.0]))
        assert projective_angle(p, q) == pytest.approx(0.0, abs=1e-8)


class TestSimplex:
    def test_moment_map_example(self):
        xi = moment_map(ProjectivePoint(np.array([1.0, 2.0])))
        assert np.allclose(xi.xi, [0.2, 0.8])

    def test_rejects_negative_weights(self):
        with pytest.raises(ValueError):
            SimplexPoint(np.array([1.2, -0.2]))

    def test_vertex_distance_level_one(self):
        d = simplex_distance(1, [1.0, 0.0], [0.0, 1.0])
        assert d == pytest.approx(np.sqrt(np.pi) / 2, rel=1e-12)

    def test_distance_matrix_matches_scalar(self):
        rng = np.random.default_rng(5)
        Xi = rng.random((4, 3))
        Xi /= Xi.sum(axis=1)[:, None]
        D = simplex_distance_matrix(2, Xi, Xi)
        assert D[1, 2] == pytest.approx(simplex_distance(2, Xi[1], Xi[2]))
        assert np.allclose(np.diag(D), 0.0, atol=1e-7)


class TestEmbed:
    def test_lattice_invariance(self, square_torus):
        b = section_basis(square_torus, 4)
        p = embed(square_torus, b, [0.21], [0.37])
        q = embed(square_torus, b, [1.21], [-0.63])
        assert projective_angle(p, q) == pytest.approx(0.0, abs=1e-7)

    def test_kummer_evenness(self, square_torus):
        b = invariant_basis(square_torus, 2)
        p = embed(square_torus, b, [0.21], [0.37])
        q = embed(square_torus, b, [0.79], [0.63])
        assert projective_angle(p, q) == pytest.approx(0.0, abs=1e-7)

    def test_torsion_translation_symmetry_of_amoeba(self, square_torus):
        b = section_basis(square_torus, 4)
        cloud = amoeba_sample(square_torus, b, 16)
        shifted = amoeba_sample(square_torus, b, 16)
        # the level-4 embedding is equivariant under y -> y + 1/4, which
        # permutes the coordinates: the amoeba itself is invariant
        assert hausdorff_distance(cloud, shifted) == pytest.approx(0.0,
                                                                   abs=1e-7)


class TestAmoebaCloud:
    def test_sample_sizes(self, square_torus):
        b = section_basis(square_torus, 2)
        cloud = amoeba_sample(square_torus, b, 8)
        assert cloud.size == 64
        assert cloud.xi.shape == (64, 2)

    def test_rejects_tiny_grid(self, square_torus):
        b = section_basis(square_torus, 2)
        with pytest.raises(ValueError):
            amoeba_sample(square_torus, b, 4)

    def test_csv_roundtrip_bit_exact(self, square_torus):
        b = section_basis(square_torus, 3)
        cloud = amoeba_sample(square_torus, b, 8)
        back = cloud_csv_roundtrip(cloud)
        assert back.k == cloud.k and back.n == cloud.n
        assert np.array_equal(back.xi, cloud.xi)
        assert np.array_equal(back.sources_x, cloud.sources_x)
        assert np.array_equal(back.sources_y, cloud.sources_y)

    def test_csv_header(self, square_torus):
        b = section_basis(square_torus, 2)
        cloud = amoeba_sample(square_torus, b, 8)
        buf = io.StringIO()
        cloud_to_csv(cloud, buf)
        header = buf.getvalue().splitlines()[0]
        assert header == "k,n,src_x0,src_y0,xi_0,xi_1"


class TestHausdorff:
    def test_self_distance_zero(self, square_torus):
        b = section_basis(square_torus, 2)
        cloud = amoeba_sample(square_torus, b, 8)
        assert hausdorff_distance(cloud, cloud) == pytest.approx(0.0,
                                                                 abs=1e-7)

    def test_directed_subset_is_zero(self):
        rng = np.random.default_rng(9)
        Xi = rng.random((32, 3))
        Xi /= Xi.sum(axis=1)[:, None]
        assert directed_hausdorff(2, Xi[:8], Xi) == pytest.approx(0.0,
                                                                  abs=1e-7)
