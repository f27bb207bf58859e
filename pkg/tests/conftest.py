import numpy as np
import pytest
from scipy.stats import ortho_group

from relaxbc.layer import build_layer_algebra
from relaxbc.reduced import derive_reduced_matrices
from relaxbc.system import RelaxationSystem, classify, normalize

TS4_A1 = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 1, 0], [0, 0, 0, 1.0]])
TS4_Q = np.diag([0, 0, -1, -1.0])
TS4_B = np.array([[1, 0, 0.5, 0], [0, 1, 1, 0], [0, 0, 1, 1.0]])
JX0_A1 = np.array([[0, 1], [1, 0.0]])
JX0_Q = np.diag([0, -1.0])


def jx0_system(B=((1.0, 1.0),)):
    return RelaxationSystem(A=[JX0_A1], Q=JX0_Q, B=np.asarray(B, float), name="jx0")


def ts4_system(B=TS4_B):
    return RelaxationSystem(A=[TS4_A1], Q=TS4_Q, B=B, name="ts4")


class Pipeline:
    def __init__(self, system):
        self.system = system
        self.norm = normalize(system)
        self.sig = classify(self.norm)
        self.la = build_layer_algebra(self.norm, self.sig)

    @property
    def rb(self):
        return derive_reduced_matrices(self.norm, self.sig, self.la)


@pytest.fixture(scope="session")
def jx0():
    return Pipeline(jx0_system())


@pytest.fixture(scope="session")
def ts4():
    return Pipeline(ts4_system())


def _spd(rng, k, lo=0.5):
    X = rng.standard_normal((k, k))
    return X @ X.T / k + lo * np.eye(k)


def random_admissible(rng, *, n_max=12, r_max=6, d_max=2, physical=True):
    """Random structurally stable relaxation system with a type II boundary.

    Built in normalized coordinates: ``A11`` gets ``p >= 1`` zero eigenvalues
    with ``p <= r`` so that ``K`` can have full column rank, ``S`` is negative
    definite, and the state is then moved by a random symmetrizer and
    rotation. The boundary rows are the incoming characteristic rows of
    ``A1``.
    """
    while True:
        n = int(rng.integers(2, n_max + 1))
        r = int(rng.integers(1, min(r_max, n - 1) + 1))
        m = n - r
        p = int(rng.integers(1, min(r, m) + 1))
        d = int(rng.integers(1, d_max + 1))
        V = ortho_group.rvs(m, random_state=rng) if m > 1 else np.eye(1)
        lam = rng.uniform(0.3, 2.0, m) * rng.choice([-1, 1], m)
        lam[:p] = 0.0
        A11 = V @ np.diag(lam) @ V.T
        A12 = rng.standard_normal((m, r))
        A22 = rng.standard_normal((r, r))
        A22 = 0.5 * (A22 + A22.T)
        An = [np.block([[A11, A12], [A12.T, A22]])]
        for _ in range(d - 1):
            X = rng.standard_normal((n, n))
            An.append(0.5 * (X + X.T))
        S = -_spd(rng, r)
        Qn = np.zeros((n, n))
        Qn[m:, m:] = S
        lam1 = np.linalg.eigvalsh(An[0])
        K = A12.T @ V[:, :p]
        if np.min(np.abs(lam1)) < 1e-3 or np.linalg.svd(K, compute_uv=False).min() < 1e-3:
            continue
        if physical:
            A0 = _spd(rng, n)
            w, E = np.linalg.eigh(A0)
            A0h = (E * np.sqrt(w)) @ E.T
            R = ortho_group.rvs(n, random_state=rng)
            M = np.linalg.solve(A0h, R)  # U = M U_norm
            Minv = np.linalg.inv(M)
            A = [M @ Aj @ Minv for Aj in An]
            Q = M @ Qn @ Minv
        else:
            A0, M = None, np.eye(n)
            A, Q = An, Qn
        w, E = np.linalg.eigh(An[0])
        Bn = E[:, w > 0].T
        B = Bn @ np.linalg.inv(M)
        return RelaxationSystem(A=A, Q=Q, B=B, A0=A0, r=r, name="random")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
