import numpy as np
import pytest
from scipy.special import erfc

from conftest import TS4_A1, TS4_B, TS4_Q, Pipeline, random_admissible, ts4_system
from relaxbc import expansion as ex
from relaxbc.grid import GridSpec
from relaxbc.profiles import DataSpec, bump, sin2_ramp
from relaxbc.relaxation import TimeGrid
from relaxbc.system import RelaxationSystem
from relaxbc.transport import stable_dt


def _setup(p, eps, grid, data):
    u0, b = data.make(p.norm.B_u)
    x = grid.x1_nodes(eps)
    tg = TimeGrid.build(grid.t_max, stable_dt(p.norm.A, x, [], grid.cfl), grid.n_slices)
    return u0, b, x, tg


TS4_DATA = DataSpec(b_kind="sin2_ramp", b_vector=[1.0, 1.0, 0.5])
JX0_DATA = DataSpec(u0_kind="bump", u0_vector=[0.1], b_kind="sin2_ramp", b_vector=[1.0])
SMALL = GridSpec(nx=400, nz=400, ny=200)


class TestEquilibrium:
    def test_jx0_is_stationary(self, jx0):
        u0, b, x, tg = _setup(jx0, 1e-2, SMALL, JX0_DATA)
        h = ex.solve_equilibrium(jx0.norm, jx0.sig, jx0.rb, b, u0, x, tg)
        for U in h.slices():
            np.testing.assert_array_equal(U, u0(x))

    def test_ts4_characteristics(self, ts4):
        g = GridSpec(nx=2000)
        u0, b, x, tg = _setup(ts4, None, g, TS4_DATA)
        h = ex.solve_equilibrium(ts4.norm, ts4.sig, ts4.rb, b, u0, x, tg)
        U = h.at(tg.slice_steps[-1])
        exact = np.where(x < 0.5, sin2_ramp(0.5 - x, 0.25), 0.0)
        assert np.abs(U[:, 0] - exact).max() < 0.02
        assert np.abs(U[:, 1]).max() == 0.0
        np.testing.assert_allclose(h.wall[:, 0], sin2_ramp(tg.times, 0.25), atol=1e-14)

    def test_dissipative_without_data(self, ts4):
        u0 = lambda x1, xh=None: np.stack([bump(x1, 0.3, 0.2), bump(x1, 0.5, 0.2)], axis=1)
        b = lambda t, xh=None: np.zeros(3)
        x = np.linspace(0, 1, 401)
        tg = TimeGrid.build(0.8, 0.9 / 400, 16)
        h = ex.solve_equilibrium(ts4.norm, ts4.sig, ts4.rb, b, u0, x, tg)
        energy = [np.sum(U ** 2) for U in h.slices()]
        assert all(e2 <= e1 * (1 + 1e-12) for e1, e2 in zip(energy, energy[1:]))


class TestFastLayer:
    def test_ts4_exponential_profile(self, ts4):
        y = np.linspace(0, 5, 11)
        w = ex.fast_layer_profile(ts4.la, np.array([0.7]), y)
        np.testing.assert_allclose(np.abs(w[:, 0]), 0.7 * np.exp(-y), rtol=1e-12)

    def test_jx0_has_no_fast_layer(self, jx0):
        w = ex.fast_layer_profile(jx0.la, np.zeros(0), np.linspace(0, 1, 5))
        assert w.shape == (5, 0)
        assert ex.fast_layer_rate(jx0.la) == np.inf

    def test_decay_gate(self, ts4):
        y_max = SMALL.y_extent(ex.fast_layer_rate(ts4.la))
        w = ex.fast_layer_profile(ts4.la, np.array([1.0]), np.array([0.0, y_max]))
        assert abs(w[1, 0]) <= 1e-12 * abs(w[0, 0]) * (1 + 1e-9)


class TestHeatLayer:
    def _run(self, jx0, trace, dt=1e-3, source=None):
        z = np.linspace(0, GridSpec().z_extent(1.0), GridSpec().nz + 1)
        tg = TimeGrid.build(0.5, dt, 10)
        tr = np.asarray([trace(t) for t in tg.times])[:, None]
        return tg, z, ex.solve_sqrt_layer(jx0.norm, jx0.sig, jx0.la, tg, tr, z, source=source)

    def test_erfc_similarity_solution(self, jx0):
        tg, z, H = self._run(jx0, lambda t: 0.0 if t == 0 else 1.0)
        for k in tg.slice_steps[1:]:
            exact = erfc(z / (2 * np.sqrt(k * tg.dt)))
            assert np.abs(H.fields[k][:, 0] - exact).max() < 0.02

    def test_zero_data_zero_solution(self, jx0):
        _, _, H = self._run(jx0, lambda t: 0.0)
        assert all(np.all(F == 0) for F in H.fields.values())

    def test_maximum_principle(self, jx0):
        _, _, H = self._run(jx0, lambda t: sin2_ramp(t, 0.1) * (1 + np.sin(20 * t)))
        assert min(F.min() for F in H.fields.values()) >= -1e-12

    def test_far_boundary_homogeneous(self, jx0):
        _, _, H = self._run(jx0, lambda t: 1.0)
        assert all(F[-1, 0] == 0 for F in H.fields.values())


class TestCorrectors:
    def test_exponential_profile(self, jx0):
        z = np.linspace(0, 10, 2001)
        c = 0.8
        m = c * np.exp(-z)[:, None]
        nu2, mu2 = ex.assemble_correctors(jx0.norm, jx0.sig, jx0.la, m, z)
        SinvK = np.linalg.solve(jx0.norm.S, jx0.la.K)
        exact = -(SinvK @ np.array([c]))[0] * np.exp(-z)
        assert np.abs(nu2[:, 0] - exact).max() < 1e-3
        np.testing.assert_array_equal(mu2, 0.0)

    def test_gauge_and_formula(self, ts4):
        z = np.linspace(0, 10, 2001)
        m = np.exp(-z)[:, None]
        nu2, mu2 = ex.assemble_correctors(ts4.norm, ts4.sig, ts4.la, m, z)
        np.testing.assert_allclose(mu2 @ ts4.la.P0, 0, atol=1e-15)
        # the first equilibrium row does not couple to the relaxing variables here
        np.testing.assert_allclose(mu2, 0, atol=1e-15)

    def test_zero_field(self, ts4):
        z = np.linspace(0, 10, 11)
        nu2, mu2 = ex.assemble_correctors(ts4.norm, ts4.sig, ts4.la, np.zeros((11, 1)), z)
        assert not nu2.any() and not mu2.any()

    def test_tail_integral_with_coupled_rows(self):
        rng = np.random.default_rng(5)
        p = Pipeline(random_admissible(rng, d_max=1, physical=False))
        z = np.linspace(0, 12, 4001)
        c = rng.standard_normal(p.sig.n1_zero)
        m = np.exp(-z)[:, None] * c
        nu2, mu2 = ex.assemble_correctors(p.norm, p.sig, p.la, m, z)
        SinvK = np.linalg.solve(p.norm.S, p.la.K)
        inner = -(p.la.P1.T @ p.norm.A12() @ SinvK @ c)
        expected = -(np.exp(-z)[:, None] * inner / p.la.lambda1) @ p.la.P1.T
        assert np.abs(mu2 - expected).max() < 1e-3 * max(1.0, np.abs(expected).max())


@pytest.fixture(scope="module")
def ts4_fields():
    p = Pipeline(ts4_system())
    u0, b, x, tg = _setup(p, 1e-2, SMALL, TS4_DATA)
    F = ex.build_expansion(p.norm, p.sig, p.la, p.rb, b, u0, 1e-2, x, tg, None, SMALL,
                           neighbours=True)
    return p, b, F


class TestComposition:
    def test_boundary_identity(self, ts4_fields):
        p, b, F = ts4_fields
        eps = F.eps
        for k in F.tg.slice_steps:
            U = F.compose(k)
            nu2, mu2 = F.correctors[k]
            gap = p.norm.B @ U[0] - b(k * F.tg.dt)
            corr = np.sqrt(eps) * p.norm.B @ np.concatenate([mu2[0], nu2[0]])
            np.testing.assert_allclose(gap, corr, atol=1e-12)

    def test_far_field_is_equilibrium(self, ts4_fields):
        p, b, F = ts4_fields
        k = F.tg.slice_steps[-1]
        U = F.compose(k)
        far = F.x > 0.9
        np.testing.assert_allclose(U[far, :2], F.ubar.at(k)[far], atol=1e-12)
        np.testing.assert_allclose(U[far, 2:], 0, atol=1e-12)

    def test_decay_report(self, ts4_fields):
        _, _, F = ts4_fields
        d = F.decay_report()
        assert d["w"] <= 1e-12 * (1 + 1e-9) and d["mu1"] == 0.0

    def test_second_block_residual_bounded(self, ts4_fields):
        p, _, F = ts4_fields
        res = ex.compute_residual(p.norm, F)
        assert max(res["second"]) < 2.0
        assert len(res["first"]) == len(F.tg.slice_steps) - 1

    def test_layer_source_flag(self, ts4_fields):
        p, b, F = ts4_fields
        u0 = lambda x1, xh=None: np.zeros((np.size(x1), 2))
        G = ex.build_expansion(p.norm, p.sig, p.la, p.rb, b, u0, F.eps, F.x, F.tg, None, SMALL,
                               layer_source="zero")
        k = F.tg.slice_steps[-1]
        # N = 0 and the fast layer has no tangential part, so the source vanishes here
        np.testing.assert_allclose(G.compose(k), F.compose(k), atol=1e-14)
        with pytest.raises(ValueError):
            ex.build_expansion(p.norm, p.sig, p.la, p.rb, b, u0, F.eps, F.x, F.tg, None, SMALL,
                               layer_source="half")


class TestResidual:
    def test_constant_equilibrium_state(self, jx0):
        u0 = lambda x1, xh=None: 0.3 * np.ones((np.size(x1), 1))
        b = lambda t, xh=None: np.array([0.3])
        x = SMALL.x1_nodes(1e-2)
        tg = TimeGrid.build(0.5, stable_dt(jx0.norm.A, x, [], 0.9), 10)
        F = ex.build_expansion(jx0.norm, jx0.sig, jx0.la, jx0.rb, b, u0, 1e-2, x, tg, None,
                               SMALL, neighbours=True)
        res = ex.compute_residual(jx0.norm, F)
        assert max(res["first"]) < 1e-13 and max(res["second"]) < 1e-13

    def test_layers_absent(self, jx0):
        u0, _ = JX0_DATA.make(jx0.norm.B_u)
        b = lambda t, xh=None: np.zeros(1)
        x = SMALL.x1_nodes(1e-2)
        tg = TimeGrid.build(0.5, stable_dt(jx0.norm.A, x, [], 0.9), 10)
        F = ex.build_expansion(jx0.norm, jx0.sig, jx0.la, jx0.rb, b, u0, 1e-2, x, tg, None,
                               SMALL, neighbours=True)
        res = ex.compute_residual(jx0.norm, F)
        du = np.gradient(u0(x), x, axis=0, edge_order=2) @ jx0.norm.A12().T
        assert max(res["first"]) < 1e-13
        np.testing.assert_allclose(res["second"], ex.l2_norm(du, x), rtol=1e-12)


class TestConvergence:
    def test_zero_data(self, jx0):
        u0 = lambda x1, xh=None: np.zeros((np.size(x1), 1))
        b = lambda t, xh=None: np.zeros(1)
        rep = ex.convergence_study(jx0.norm, jx0.sig, jx0.la, jx0.rb, b, u0, [1e-1, 1e-2],
                                   SMALL)
        assert all(e[1] < 1e-12 and e[2] < 1e-12 for e in rep.entries)
        assert not rep.slope_defined
        assert "N/A" in rep.format()
        assert not rep.passed

    def test_entries_sorted_descending(self, ts4):
        u0, b = TS4_DATA.make(ts4.norm.B_u)
        rep = ex.convergence_study(ts4.norm, ts4.sig, ts4.la, ts4.rb, b, u0, [1e-2, 1e-1],
                                   SMALL)
        assert [e[0] for e in rep.entries] == [1e-1, 1e-2]
        assert rep.monotone

    def test_grid_refinement_changes_error_little(self, ts4):
        u0, b = TS4_DATA.make(ts4.norm.B_u)
        errs = [ex.run_single(ts4.norm, ts4.sig, ts4.la, ts4.rb, b, u0, 1e-2,
                              GridSpec(nx=nx))["err_tmax"] for nx in (2000, 4000)]
        assert abs(errs[1] - errs[0]) < 0.1 * errs[0]

    def test_fit_slope(self):
        eps = np.array([1e-2, 1e-3, 1e-4])
        assert ex.fit_slope(eps, 3 * np.sqrt(eps)) == pytest.approx(0.5)
        assert np.isnan(ex.fit_slope(eps, np.zeros(3)))


def test_two_dimensional_run():
    A2 = np.array([[0.3, 0.1, 0, 0], [0.1, 0.2, 0, 0.1], [0, 0, 0, 0], [0, 0.1, 0, 0]])
    p = Pipeline(RelaxationSystem(A=[TS4_A1, A2], Q=TS4_Q, B=TS4_B))
    data = DataSpec(u0_kind="bump", u0_vector=[0.1, 0.05], b_kind="sin2_ramp",
                    b_vector=[1.0, 1.0, 0.5], tangential_modes=[1])
    u0, b = data.make(p.norm.B_u)
    g = GridSpec(nx=200, nz=200, xhat_extent=[1.0], xhat_count=[8], t_max=0.2, n_slices=4)
    out = [ex.run_single(p.norm, p.sig, p.la, p.rb, b, u0, e, g)["err_tmax"]
           for e in (1e-1, 1e-2)]
    assert out[1] < out[0]
