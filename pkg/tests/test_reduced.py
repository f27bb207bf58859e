import numpy as np
import pytest

from conftest import Pipeline, random_admissible
from relaxbc.kreiss import SamplingGrid, certify_gkc
from relaxbc.reduced import (assemble_Y, derive_reduced_matrices, reconstruction_residual,
                             solve_boundary_traces, ukc_minimum)


def test_jx0_degenerate_shapes(jx0):
    rb = jx0.rb
    assert rb.B_o.shape == (0, 1)
    assert rb.B_1.shape == (1, 1) and abs(rb.B_1[0, 0]) > 0
    assert rb.B_2.shape[0] == 0
    Y1, Y2, Y3 = assemble_Y(jx0.norm, jx0.sig, jx0.la)
    assert Y1.shape[1] == 0 and Y3.shape[1] == 0
    np.testing.assert_allclose(np.abs(Y2), [[1.0]])
    ukc, _, _ = ukc_minimum(jx0.norm, jx0.sig, jx0.la, rb)
    assert ukc == 1.0


def test_jx0_scalar_trace(jx0):
    rb = jx0.rb
    b = np.sin(np.pi * np.linspace(0, 1, 9)) ** 2
    ubar = 0.3 * np.ones((9, 1))
    mu1, wS = solve_boundary_traces(rb, b[:, None], ubar)
    expected = (b - ubar[:, 0]) / (rb.B_1 @ rb.Y2)[0, 0] * rb.B_1[0, 0]
    np.testing.assert_allclose(mu1[:, 0], expected, atol=1e-14)
    assert wS.shape == (9, 0)


def test_ts4_blocks(ts4):
    rb = ts4.rb
    assert rb.B_o.shape == (1, 3)
    assert [Y.shape[1] for Y in (rb.Y1, rb.Y2, rb.Y3)] == [1, 1, 1]
    assert np.abs(rb.B_o @ rb.B_u @ rb.P0).max() <= 1e-12
    np.testing.assert_allclose(np.abs(rb.B_o), [[1, 0, 0]], atol=1e-12)
    np.testing.assert_allclose(np.abs(rb.coupling), np.eye(3), atol=1e-12)
    ukc, _, _ = ukc_minimum(ts4.norm, ts4.sig, ts4.la, rb)
    assert ukc == pytest.approx(1.0)


def test_ts4_reconstruction(ts4):
    rb = ts4.rb
    rng = np.random.default_rng(3)
    b = rng.standard_normal((20, 3))
    ubar = rng.standard_normal((20, 2))
    mu1, wS = solve_boundary_traces(rb, b, ubar)
    # the trace equations fix the B_1 and B_2 components; B_o carries the rest
    rhs = b - ubar @ rb.B_u.T
    np.testing.assert_allclose(mu1 @ (rb.B_1 @ rb.Y2).T, rhs @ rb.B_1.T, atol=1e-12)
    np.testing.assert_allclose(wS @ (rb.B_2 @ rb.Y3).T, rhs @ rb.B_2.T, atol=1e-12)


def test_reconstruction_when_reduced_condition_holds(ts4):
    rb = ts4.rb
    rng = np.random.default_rng(4)
    ubar = rng.standard_normal((10, 2))
    mu1 = rng.standard_normal((10, 1))
    wS = rng.standard_normal((10, 1))
    b = ubar @ rb.B_u.T + mu1 @ rb.Y2.T + wS @ rb.Y3.T
    m, w = solve_boundary_traces(rb, b, ubar)
    assert reconstruction_residual(rb, ts4.la, b, ubar, m, w) < 1e-8
    np.testing.assert_allclose(m, mu1, atol=1e-12)


@pytest.mark.parametrize("seed", range(8))
def test_random_reduced_invariants(seed):
    rng = np.random.default_rng(300 + seed)
    p = Pipeline(random_admissible(rng))
    rep = certify_gkc(p.norm, grid=SamplingGrid.parse("5,5,3,5"))
    if not rep.passed:
        pytest.skip("boundary fails the Kreiss condition")
    rb = derive_reduced_matrices(p.norm, p.sig, p.la)
    assert np.abs(rb.B_o @ rb.B_u @ rb.P0).max(initial=0.0) <= 1e-12
    assert rb.coupling_sigma_min > 1e-8
    for v in rb.checks.values():
        assert not np.isnan(v)
