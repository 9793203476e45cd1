import numpy as np
import pytest

from thetalab.abelian import (
    AbelianPoint,
    AbelianVariety,
    asymptotic_residual,
    bergman_density,
    bergman_density_grid,
    flat_distance,
    from_complex,
    gaussian_decay_check,
    gram_matrix,
    section_basis,
    section_value,
    to_complex,
    torsion_points,
    _torus_grid,
)
from thetalab.theta import PeriodMatrix


@pytest.fixture(scope="module")
def square_torus():
    return AbelianVariety(PeriodMatrix(np.array([[1j]])))


class TestCoordinates:
    def test_complex_roundtrip(self, square_torus):
        p = AbelianPoint([0.31], [0.77])
        q = from_complex(square_torus, to_complex(square_torus, p))
        assert np.allclose(q.x, p.x) and np.allclose(q.y, p.y)

    def test_points_reduce_mod_one(self):
        p = AbelianPoint([1.25], [-0.25])
        assert p.x[0] == pytest.approx(0.25)
        assert p.y[0] == pytest.approx(0.75)

    @pytest.mark.parametrize("n,k", [(1, 3), (2, 2)])
    def test_torsion_point_count(self, n, k):
        pts = torsion_points(n, k)
        assert pts.shape == (k ** n, n)
        assert len({tuple(r) for r in np.round(pts * k).astype(int)}) == k ** n


class TestSectionBasis:
    @pytest.mark.parametrize("k", [1, 2, 4])
    def test_size(self, square_torus, k):
        assert section_basis(square_torus, k).size == k

    def test_level_one_is_single_section(self, square_torus):
        b = section_basis(square_torus, 1)
        G = gram_matrix(square_torus, b, 32)
        assert G.shape == (1, 1)
        assert G[0, 0] == pytest.approx(1.0, abs=1e-10)

    def test_section_value_h_norm_consistency(self, square_torus):
        b = section_basis(square_torus, 4)
        z = square_torus.omega @ np.array([0.21]) + np.array([0.37])
        val = section_value(square_torus, b, 1, z)
        w = float(np.real(z.conj() @ square_torus.H @ z))
        implied = abs(val.raw) ** 2 * np.exp(-np.pi * 4 * w)
        assert implied == pytest.approx(val.h_norm ** 2, rel=1e-10)

    def test_h_norm_lattice_invariance(self, square_torus):
        b = section_basis(square_torus, 4)
        z = square_torus.omega @ np.array([0.21]) + np.array([0.37])
        v1 = section_value(square_torus, b, 2, z)
        v2 = section_value(square_torus, b, 2, z + square_torus.omega[:, 0])
        assert v1.h_norm == pytest.approx(v2.h_norm, rel=1e-10)


class TestGram:
    @pytest.mark.parametrize("k", [1, 2, 4])
    def test_orthonormal_square_lattice(self, square_torus, k):
        G = gram_matrix(square_torus, section_basis(square_torus, k), 64)
        assert np.max(np.abs(G - np.eye(k))) <= 1e-10

    def test_hermitian(self, square_torus):
        G = gram_matrix(square_torus, section_basis(square_torus, 3), 32)
        assert np.allclose(G, G.conj().T)

    def test_orthonormal_generic_period(self):
        A = AbelianVariety(PeriodMatrix(np.array([[0.3 + 1.4j]])))
        G = gram_matrix(A, section_basis(A, 2), 128)
        assert np.max(np.abs(G - np.eye(2))) <= 1e-8


class TestBergman:
    def test_mean_density_is_dimension(self, square_torus):
        k = 4
        b = section_basis(square_torus, k)
        X, Y = _torus_grid(1, 64)
        rho = bergman_density_grid(square_torus, b, X, Y)
        assert rho.mean() / k == pytest.approx(1.0, rel=1e-8)

    def test_pointwise_positive(self, square_torus):
        b = section_basis(square_torus, 2)
        z = np.array([0.3 + 0.21j])
        assert bergman_density(square_torus, b, z) > 0


class TestAsymptotics:
    def test_residual_decays_in_k(self, square_torus):
        vals = []
        for k in (4, 8):
            b = section_basis(square_torus, k)
            z = np.asarray(b.characteristics[0], dtype=complex)
            vals.append(abs(asymptotic_residual(square_torus, b, 0, z)))
        assert vals[1] < vals[0]

    def test_gaussian_decay_no_violations(self, square_torus):
        b = section_basis(square_torus, 8)
        fit = gaussian_decay_check(square_torus, b, grid_per_dim=64)
        assert fit.violations == 0
        assert fit.c > 0 and fit.C > 0


class TestFlatDistance:
    def test_symmetric_and_zero_on_diagonal(self, square_torus):
        p = AbelianPoint([0.2], [0.3])
        q = AbelianPoint([0.6], [0.9])
        assert flat_distance(square_torus, p, p) == pytest.approx(0.0)
        assert flat_distance(square_torus, p, q) == pytest.approx(
            flat_distance(square_torus, q, p))

    def test_half_period(self, square_torus):
        p = AbelianPoint([0.0], [0.0])
        q = AbelianPoint([0.0], [0.5])
        assert flat_distance(square_torus, p, q) == pytest.approx(0.5)
