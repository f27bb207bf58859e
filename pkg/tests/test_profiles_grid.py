import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from relaxbc.grid import GridSpec
from relaxbc.profiles import DataSpec, bump, sin2_ramp, tangential_factor


def test_bump_shape():
    x = np.linspace(0, 1, 1001)
    f = bump(x, 0.5, 0.25)
    assert f.max() == pytest.approx(1.0)
    assert np.all(f[(x <= 0.25) | (x >= 0.75)] == 0)
    assert np.all(f >= 0)


def test_sin2_ramp():
    assert sin2_ramp(0.0, 0.25) == 0.0
    assert sin2_ramp(0.125, 0.25) == pytest.approx(0.5)
    assert sin2_ramp(3.0, 0.25) == pytest.approx(1.0)


def test_tangential_factor():
    assert tangential_factor(None, [1], 1.0) is None
    np.testing.assert_allclose(tangential_factor(np.zeros(3), [], 1.0), 1.0)
    np.testing.assert_allclose(tangential_factor(np.array([0.0, 0.5]), [1], 1.0), [1.5, 0.5])


class TestDataSpec:
    def test_shapes_one_dimension(self):
        u0, b = DataSpec(u0_kind="bump", u0_vector=[1.0, 2.0], b_kind="sin2_ramp",
                         b_vector=[1.0]).make(np.array([[1.0, 0.0]]))
        assert u0(np.linspace(0, 1, 5)).shape == (5, 2)
        assert b(0.1).shape == (1,)

    def test_shapes_two_dimensions(self):
        u0, b = DataSpec(u0_kind="bump", u0_vector=[1.0], b_kind="constant", b_vector=[2.0],
                         tangential_modes=[1]).make(np.array([[1.0]]))
        xh = np.linspace(0, 1, 4, endpoint=False)
        assert u0(np.linspace(0, 1, 5), xh).shape == (5, 4, 1)
        assert b(0.0, xh).shape == (4, 1)

    def test_trace_added_keeps_compatibility(self):
        B_u = np.array([[1.0, 2.0]])
        u0, b = DataSpec(u0_kind="bump", u0_vector=[1.0, 1.0], u0_center=0.1,
                         b_kind="sin2_ramp", b_vector=[5.0]).make(B_u)
        np.testing.assert_allclose(b(0.0), u0(np.zeros(1))[0] @ B_u.T)

    def test_validate_collects_every_error(self):
        errs = DataSpec(u0_kind="wave", b_kind="sin2_ramp", b_vector=[1.0],
                        u0_width=-1.0).validate(m=2, n_plus=3)
        assert len(errs) >= 3


class TestGrid:
    def test_uniform_without_eps(self):
        x = GridSpec(nx=10).x1_nodes()
        np.testing.assert_allclose(np.diff(x), 0.1)

    @settings(max_examples=20, deadline=None)
    @given(st.floats(1e-5, 1e-1))
    def test_graded_grid(self, eps):
        g = GridSpec(nx=500)
        x = g.x1_nodes(eps)
        h = np.diff(x)
        assert x[0] == 0 and x[-1] == pytest.approx(1.0)
        assert np.all(h > 0)
        assert h.max() <= 1.0 / 500 * (1 + 1e-9)
        assert h[0] == pytest.approx(min(eps / g.cells_per_eps, 1 / 500))
        # no jump in spacing larger than the growth factor
        ratio = h[1:] / h[:-1]
        assert ratio.max() <= g.growth * (1 + 1e-9) or h[0] >= 1 / 500

    def test_layer_extents(self):
        g = GridSpec()
        assert g.z_extent(1.0) == 10.0
        assert g.z_extent(100.0) == pytest.approx(6 * np.sqrt(50))
        assert g.y_extent(1.0) == pytest.approx(-np.log(1e-12))
        assert GridSpec(y_max=3.0).y_extent(1.0) == 3.0

    def test_validate(self):
        errs = GridSpec(nx=1, cfl=1.5, xhat_extent=[1.0]).validate(1)
        assert any("nx" in e for e in errs) and any("cfl" in e for e in errs)
        assert any("xhat" in e for e in errs)
        assert GridSpec(xhat_extent=[1.0], xhat_count=[8]).validate(2) == []
