import numpy as np
import pytest

from conftest import Pipeline, jx0_system, random_admissible
from relaxbc.kreiss import (FrequencyPoint, SamplingGrid, certify_gkc, frequency_matrix,
                           gkc_ratio, limit_stable_basis, stable_basis)

TS4_GKC_MIN = 0.555254895658396
TS4_RATIO_AT_ONE = 1.3763819204711736


class TestFrequencyMatrix:
    def test_jx0_reference(self, jx0):
        M = frequency_matrix(jx0.norm, FrequencyPoint(1.0, (), 0.0))
        np.testing.assert_allclose(M, [[0, -1], [-1, 0]])

    def test_jx0_with_relaxation(self, jx0):
        M = frequency_matrix(jx0.norm, FrequencyPoint(1.0, (), 3.0))
        np.testing.assert_allclose(M, [[0, -4], [-1, 0]])
        np.testing.assert_allclose(sorted(np.linalg.eigvals(M).real), [-2, 2])

    def test_point_validation(self):
        with pytest.raises(ValueError):
            FrequencyPoint(-1.0, (), 0.0)
        with pytest.raises(ValueError):
            FrequencyPoint(1.0, (), -1.0)


class TestRatio:
    def test_jx0_good_boundary(self, jx0):
        assert gkc_ratio(jx0.norm, [[1, 1]], FrequencyPoint(1.0, (), 0.0)) == \
            pytest.approx(np.sqrt(2), rel=1e-12)

    def test_jx0_bad_boundary(self, jx0):
        assert gkc_ratio(jx0.norm, [[1, -1]], FrequencyPoint(1.0, (), 0.0)) < 1e-14

    @pytest.mark.parametrize("xi,eta", [(0.3, 0.0), (1.0, 2.0), (5.0, 50.0)])
    def test_jx0_closed_form(self, jx0, xi, eta):
        s = np.sqrt(xi / (xi + eta))
        expected = abs(1 + s) / np.sqrt(1 + s ** 2)
        assert gkc_ratio(jx0.norm, [[1, 1]], FrequencyPoint(xi, (), eta)) == \
            pytest.approx(expected, rel=1e-10)

    def test_ts4_regression(self, ts4):
        assert gkc_ratio(ts4.norm, ts4.norm.B, FrequencyPoint(1.0, (), 0.0)) == \
            pytest.approx(TS4_RATIO_AT_ONE, rel=1e-10)


class TestCertifier:
    def test_jx0_infimum(self, jx0):
        rep = certify_gkc(jx0.norm)
        assert rep.passed
        assert rep.min_ratio == pytest.approx(1 / np.sqrt(2), rel=0.05)
        assert rep.min_ratio >= 0.7

    def test_jx0_bad_fails(self):
        rep = certify_gkc(Pipeline(jx0_system([[1.0, -1.0]])).norm)
        assert not rep.passed
        assert rep.status == "FAILED"

    def test_ts4_regression(self, ts4):
        rep = certify_gkc(ts4.norm)
        assert rep.passed
        assert rep.min_ratio == pytest.approx(TS4_GKC_MIN, rel=1e-8)

    def test_scaling_invariance(self, ts4):
        g = SamplingGrid.parse("5,5,3,5")
        a = certify_gkc(ts4.norm, grid=g, refine=False)
        b = certify_gkc(ts4.norm, B=7.0 * ts4.norm.B, grid=g, refine=False)
        assert a.min_ratio == pytest.approx(b.min_ratio, rel=1e-10)

    def test_grid_parse(self):
        g = SamplingGrid.parse("3,3,3,4")
        assert len(list(g.points(1))) == 3 * 3 * 4
        assert len(list(g.points(2))) == 3 * 3 * 3 * 4
        with pytest.raises(ValueError):
            SamplingGrid.parse("1,2")


@pytest.mark.parametrize("which", ["jx0", "ts4"])
def test_stable_dimension_equals_incoming_count(which, jx0, ts4):
    p = {"jx0": jx0, "ts4": ts4}[which]
    for fp in SamplingGrid.parse("7,7,3,6").points(p.norm.d):
        R = stable_basis(p.norm, fp)
        assert R.shape[1] == p.sig.n_plus


def test_limit_basis_rank(ts4, jx0):
    R = limit_stable_basis(ts4.norm, ts4.sig, ts4.la, 1.0)
    assert np.linalg.matrix_rank(R) == 3
    R = limit_stable_basis(jx0.norm, jx0.sig, jx0.la, 1.0)
    np.testing.assert_allclose(np.abs(R[:, 0]), [1, 0])


@pytest.mark.parametrize("seed", range(5))
def test_random_systems_stable_dimension(seed):
    rng = np.random.default_rng(700 + seed)
    p = Pipeline(random_admissible(rng))
    for fp in SamplingGrid.parse("4,3,3,4").points(p.norm.d):
        assert stable_basis(p.norm, fp).shape[1] == p.sig.n_plus
