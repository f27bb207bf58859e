import numpy as np
import pytest

from conftest import Pipeline, random_admissible
from relaxbc import linalg as la
from relaxbc.layer import bordered_inertia_check, limit_blocks, stable_limit_basis_12


def test_jx0_blocks(jx0):
    L = jx0.la
    np.testing.assert_allclose(np.abs(L.K), [[1.0]])
    assert L.Ktilde.shape == (1, 0)
    np.testing.assert_allclose(L.A_schur, [[0.0]])
    assert L.M4.shape == (0, 0)
    np.testing.assert_allclose(L.D_par, [[-1.0]])
    assert L.n_layer == 0


def test_ts4_blocks(ts4):
    L = ts4.la
    np.testing.assert_allclose(np.abs(L.K[:, 0]), [1, 0])
    np.testing.assert_allclose(np.abs(L.Ktilde[:, 0]), [0, 1])
    np.testing.assert_allclose(L.A_schur, np.eye(2))
    np.testing.assert_allclose(L.M4, [[-1.0]])
    np.testing.assert_allclose(L.M3, [[-1.0]])
    np.testing.assert_allclose(L.S_K, [[1.0]])
    np.testing.assert_allclose(L.N, np.zeros((2, 1)), atol=1e-15)
    assert bordered_inertia_check(L) == (1, 0, 1)


def test_ts4_limit_blocks(ts4):
    M1, M2 = limit_blocks(ts4.norm, ts4.sig, ts4.la, 1.0)
    np.testing.assert_allclose(M1, [[-1.0]])
    np.testing.assert_allclose(M2, [[-1.0]])
    # the product that feeds the square root is S_K (xi + C00), positive here
    np.testing.assert_allclose(ts4.la.M3 @ M2, [[1.0]])
    R12 = stable_limit_basis_12(ts4.la, M2)
    np.testing.assert_allclose(R12, [[1.0], [1.0]])


def test_limit_blocks_reject_nonpositive_xi(ts4):
    with pytest.raises(ValueError):
        limit_blocks(ts4.norm, ts4.sig, ts4.la, -1.0)


def test_coupling_injective_whenever_a1_invertible(ts4):
    # K x = 0 would make (P0 x, 0) a null vector of A1
    p = ts4.la.K.shape[1]
    assert la.smallest_singular_value(ts4.la.K) > 0 and p == ts4.sig.n1_zero


@pytest.mark.parametrize("seed", range(25))
def test_random_structural_identities(seed):
    rng = np.random.default_rng(500 + seed)
    p = Pipeline(random_admissible(rng))
    L, sig = p.la, p.sig
    assert L.congruence_T <= 1e-10
    assert L.congruence_L <= 1e-10
    assert np.linalg.matrix_rank(L.K) == sig.n1_zero
    assert np.all(np.linalg.eigvalsh(L.D_par) < 0)
    assert np.all(np.linalg.eigvalsh(L.S_K) > 0)
    lam4 = np.linalg.eigvals(L.M4) if L.M4.size else np.zeros(0)
    assert int(np.sum(lam4.real < 0)) == sig.n_plus - sig.n1_zero - sig.n1_plus
    assert bordered_inertia_check(L) == (sig.n1_zero, 0, sig.n1_zero)
    np.testing.assert_allclose(L.Ktilde.T @ L.K, 0, atol=1e-10)
    if L.R2S.size:
        R = L.R2S
        assert la.norm(L.M4 @ R - R @ L.M4S) <= 1e-10 * max(1.0, la.norm(L.M4))


@pytest.mark.parametrize("seed", range(10))
def test_product_identity_at_random_frequency(seed):
    rng = np.random.default_rng(900 + seed)
    p = Pipeline(random_admissible(rng))
    xi = complex(rng.uniform(0.1, 5), rng.uniform(-5, 5))
    omega = rng.uniform(-3, 3, p.norm.d - 1)
    M1, M2 = limit_blocks(p.norm, p.sig, p.la, xi, omega)
    R12 = stable_limit_basis_12(p.la, M2)
    assert R12.shape == (2 * p.sig.n1_zero, p.sig.n1_zero)
