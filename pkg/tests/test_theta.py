import numpy as np
import pytest

from thetalab.errors import NotPositiveDefiniteError, NotSymmetricError
from thetalab.theta import (
    Characteristic,
    DEFAULT_POLICY,
    PeriodMatrix,
    TruncationPolicy,
    theta,
    theta_grad,
    truncation_radius,
    zero_characteristic,
)


def brute_theta(ch, omega, z, radius=30):
    total = 0.0
    n = omega.shape[0]
    axes = [np.arange(-radius, radius + 1)] * n
    for l in np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, n):
        la = l + ch.a
        t = 0.5 * la @ omega @ la + la @ (z + ch.b)
        total += np.exp(2j * np.pi * t)
    return total


class TestPeriodMatrix:
    def test_validates_symmetry(self):
        with pytest.raises(NotSymmetricError):
            PeriodMatrix(np.array([[1j, 0.5], [0.2, 1j]]))

    def test_validates_positive_imaginary(self):
        with pytest.raises(NotPositiveDefiniteError):
            PeriodMatrix(np.array([[-1j]]))

    def test_caches_are_read_only(self):
        P = PeriodMatrix(np.array([[1j]]))
        with pytest.raises(ValueError):
            P.im[0, 0] = 5.0


class TestTruncationPolicy:
    def test_rejects_bad_eps(self):
        with pytest.raises(ValueError):
            TruncationPolicy(eps=0.0)

    def test_radius_shrinks_with_looser_eps(self):
        P = PeriodMatrix(np.array([[1j]]))
        ch = zero_characteristic(1)
        r_tight = truncation_radius(P, ch, np.array([0j]), 1e-12)
        r_loose = truncation_radius(P, ch, np.array([0j]), 1e-6)
        assert r_loose < r_tight
        assert r_tight <= 6

    def test_radius_shrinks_with_larger_imaginary_part(self):
        ch = zero_characteristic(1)
        r1 = truncation_radius(PeriodMatrix(np.array([[1j]])), ch,
                               np.array([0j]), 1e-12)
        r4 = truncation_radius(PeriodMatrix(np.array([[4j]])), ch,
                               np.array([0j]), 1e-12)
        assert r4 < r1


class TestThetaValues:
    def test_square_lattice_reference_value(self):
        P = PeriodMatrix(np.array([[1j]]))
        val = theta(zero_characteristic(1), P, np.array([0j]))
        assert val == pytest.approx(1.0864348112133080, abs=1e-13)

    @pytest.mark.parametrize("n", [1, 2])
    def test_matches_brute_force(self, n):
        rng = np.random.default_rng(3 + n)
        M = rng.standard_normal((n, n))
        omega = rng.standard_normal((n, n))
        omega = 0.5 * (omega + omega.T) + 1j * (M @ M.T + n * np.eye(n))
        P = PeriodMatrix(omega)
        z = rng.standard_normal(n) * 0.4 + 1j * rng.standard_normal(n) * 0.2
        ch = Characteristic(a=rng.random(n) - 0.5, b=rng.random(n) - 0.5)
        got = theta(ch, P, z)
        want = brute_theta(ch, omega, z, radius=12)
        assert abs(got - want) <= 1e-10 * max(1.0, abs(want))

    def test_evenness_at_zero_characteristic(self):
        P = PeriodMatrix(np.array([[0.3 + 1.1j]]))
        z = np.array([0.17 + 0.05j])
        ch = zero_characteristic(1)
        assert theta(ch, P, z) == pytest.approx(theta(ch, P, -z), abs=1e-12)

    def test_quasi_periodicity(self):
        rng = np.random.default_rng(11)
        P = PeriodMatrix(np.array([[0.2 + 0.9j]]))
        ch = zero_characteristic(1)
        z = np.array([0.23 + 0.08j])
        m = np.array([1.0])
        lhs = theta(ch, P, z + P.omega @ m)
        factor = np.exp(2j * np.pi * (-0.5 * m @ P.omega @ m - m @ z))
        assert abs(lhs - factor * theta(ch, P, z)) <= 1e-10 * abs(lhs)

    def test_lattice_periodicity_in_real_direction(self):
        P = PeriodMatrix(np.array([[1j]]))
        ch = zero_characteristic(1)
        z = np.array([0.4 + 0.1j])
        assert theta(ch, P, z + 1.0) == pytest.approx(theta(ch, P, z),
                                                      abs=1e-12)


class TestThetaGrad:
    @pytest.mark.parametrize("n", [1, 2])
    def test_matches_finite_differences(self, n):
        rng = np.random.default_rng(21 + n)
        M = rng.standard_normal((n, n))
        omega = 1j * (M @ M.T + n * np.eye(n))
        P = PeriodMatrix(omega)
        z = rng.standard_normal(n) * 0.3 + 1j * rng.standard_normal(n) * 0.1
        ch = Characteristic(a=rng.random(n) / 2, b=rng.random(n) / 2)
        grad = theta_grad(ch, P, z)
        h = 1e-6
        for j in range(n):
            e = np.zeros(n)
            e[j] = h
            fd = (theta(ch, P, z + e) - theta(ch, P, z - e)) / (2 * h)
            assert abs(grad[j] - fd) <= 1e-6 * max(1.0, abs(fd))
