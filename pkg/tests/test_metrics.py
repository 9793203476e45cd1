import io

import numpy as np
import pytest

from thetalab.abelian import AbelianPoint, AbelianVariety, flat_distance, section_basis
from thetalab.kummer import KummerVariety, invariant_basis
from thetalab.metrics import (
    MetricValue,
    error_field_to_csv,
    graph_distance_dk,
    metric_error_field,
    metric_graph,
    metric_target,
    pullback_metric,
    region_decomposition,
    scheme_cross_check,
    singular_distances,
)
from thetalab.theta import PeriodMatrix


@pytest.fixture(scope="module")
def square_torus():
    return AbelianVariety(PeriodMatrix(np.array([[1j]])))


@pytest.fixture(scope="module")
def square_kummer(square_torus):
    return KummerVariety(square_torus)


class TestMetricValue:
    def test_rejects_non_hermitian(self):
        with pytest.raises(ValueError):
            MetricValue(np.array([[1.0, 1.0], [0.0, 1.0]], dtype=complex))

    def test_targets(self, square_torus):
        ab = metric_target(square_torus, section_basis(square_torus, 2))
        ku = metric_target(square_torus, invariant_basis(square_torus, 2))
        assert ab[0, 0] == pytest.approx(0.5)
        assert ku[0, 0] == pytest.approx(1.0)


class TestPullbackMetric:
    def test_positive_definite_generic_point(self, square_torus):
        b = section_basis(square_torus, 4)
        m = pullback_metric(square_torus, b, [0.21], [0.37])
        assert np.min(np.linalg.eigvalsh(m.g)) > 0

    def test_scheme_agreement(self, square_torus):
        b = section_basis(square_torus, 4)
        rel = scheme_cross_check(square_torus, b, [0.21], [0.37])
        assert rel <= 1e-5

    def test_lattice_invariance(self, square_torus):
        b = section_basis(square_torus, 4)
        m1 = pullback_metric(square_torus, b, [0.21], [0.37])
        m2 = pullback_metric(square_torus, b, [1.21], [-0.63])
        assert np.max(np.abs(m1.g - m2.g)) <= 1e-10

    def test_converges_to_flat_target(self, square_torus):
        errs = []
        for k in (4, 8):
            b = section_basis(square_torus, k)
            m = pullback_metric(square_torus, b, [0.21], [0.37])
            errs.append(abs(m.g[0, 0] - 0.5))
        assert errs[1] < errs[0]

    def test_kummer_converges_to_doubled_target(self, square_torus):
        errs = []
        for k in (2, 4):
            b = invariant_basis(square_torus, k)
            m = pullback_metric(square_torus, b, [0.21], [0.37])
            errs.append(abs(m.g[0, 0] - 1.0))
        assert errs[1] < errs[0]


class TestRegions:
    def test_radius_formula(self, square_kummer):
        reg = region_decomposition(square_kummer, 2, delta=2.0,
                                   grid_per_dim=8)
        assert reg.radius == pytest.approx(np.sqrt(np.log(2) / 4.0))

    def test_masks_partition(self, square_kummer):
        reg = region_decomposition(square_kummer, 4, delta=2.0,
                                   grid_per_dim=8)
        assert np.all(reg.d_mask ^ reg.u_mask)

    def test_singular_distance_zero_at_two_torsion(self, square_kummer):
        r = singular_distances(square_kummer, np.array([[0.5]]),
                               np.array([[0.5]]))
        assert r[0] == pytest.approx(0.0, abs=1e-12)

    def test_rejects_bad_parameters(self, square_kummer):
        with pytest.raises(ValueError):
            region_decomposition(square_kummer, 1, delta=1.0)
        with pytest.raises(ValueError):
            region_decomposition(square_kummer, 4, delta=0.0)


class TestErrorField:
    def test_far_field_error_decreases(self, square_torus):
        maxima = []
        for k in (4, 8):
            b = section_basis(square_torus, k)
            f = metric_error_field(square_torus, b, grid_per_dim=10, q=0)
            maxima.append(float(np.max(f["err_c0"])))
        assert maxima[1] < maxima[0]

    def test_csv_roundtrip(self, square_torus):
        b = section_basis(square_torus, 4)
        f = metric_error_field(square_torus, b, grid_per_dim=8, q=1)
        buf = io.StringIO()
        error_field_to_csv(f, buf)
        lines = buf.getvalue().splitlines()
        assert lines[0] == "x0,y0,r,err_c0,err_c1"
        assert len(lines) == 1 + f["X"].shape[0]
        vals = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])
        assert np.array_equal(vals[:, 3], f["err_c0"])


class TestMetricGraph:
    def test_self_distance_zero(self, square_torus):
        b = section_basis(square_torus, 4)
        g = metric_graph(square_torus, b, 16, flat=True)
        assert graph_distance_dk(g, [0.0, 0.0], [0.0, 0.0]) == 0.0

    def test_flat_oracle_half_period(self, square_torus):
        b = section_basis(square_torus, 4)
        g = metric_graph(square_torus, b, 64, flat=True)
        d = graph_distance_dk(g, [0.0, 0.0], [0.0, 0.5])
        exact = flat_distance(square_torus, AbelianPoint([0.0], [0.0]),
                              AbelianPoint([0.0], [0.5]))
        assert abs(d - exact) / exact <= 0.03

    def test_flat_oracle_generic_pair(self, square_torus):
        b = section_basis(square_torus, 4)
        g = metric_graph(square_torus, b, 64, flat=True)
        d = graph_distance_dk(g, [0.0, 0.0], [0.25, 0.25])
        exact = flat_distance(square_torus, AbelianPoint([0.0], [0.0]),
                              AbelianPoint([0.25], [0.25]))
        assert abs(d - exact) / exact <= 0.03

    def test_dk_diameter_ratio_bounded(self, square_torus):
        # diameter of the near-singular ball under the pulled-back metric
        # stays a bounded multiple of sqrt(log k / k)
        ratios = []
        for k in (4, 8, 16):
            b = section_basis(square_torus, k)
            g = metric_graph(square_torus, b, 24)
            r = np.sqrt(np.log(k) / (2.0 * k))
            d = graph_distance_dk(g, [0.0, 0.0], [r / np.sqrt(2.0), 0.0])
            ratios.append(d / np.sqrt(np.log(k) / k))
        assert max(ratios) / min(ratios) <= 3.0
