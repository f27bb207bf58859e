"""Derived boundary-layer matrices and their spectral certificates.

Builds the characteristic coupling ``K``, its orthogonal complement
``Ktilde``, the Schur complement ``A``, the fast-layer map ``N``, the
congruences ``T`` and ``L`` and the limit blocks ``M1`` to ``M4``. Every
structural identity is verified at construction time.
"""

from dataclasses import dataclass

import numpy as np

from . import linalg as la
from .errors import InertiaMismatch, NegativeRealEigenvalue, RankDeficientK, SingularC00

TOL_CONGRUENCE = 1e-10


def _solve(A, B):
    if A.shape[0] == 0:
        return np.zeros((0,) + B.shape[1:], dtype=np.result_type(A, B))
    return np.linalg.solve(A, B)


@dataclass(frozen=True)
class LayerAlgebra:
    """All derived matrices of the layer analysis.

    Shapes use ``m = n - r``, ``p = n1_zero`` and ``q = r - p``.

    Attributes
    ----------
    K : (r, p)
    Ktilde : (r, q), orthonormal columns with ``Ktilde^T K = 0``
    A_schur : (r, r)
    N : (m, q)
    T, L : (n, n) congruences of the normal coefficient
    M3 : (p, p)
    M4 : (q, q), generator of the fast-layer ODE ``w_y = M4 w``
    S_K : (p, p), symmetric positive definite
    D_par : (p, p), symmetric negative definite diffusion coefficient
    R2S : (q, k) orthonormal basis of the stable subspace of ``M4``
    M4S : (k, k) restriction of ``M4`` to that subspace
    L2U : (q - k, q) orthonormal rows annihilating ``range(R2S)``
    """

    K: np.ndarray
    Ktilde: np.ndarray
    A_schur: np.ndarray
    N: np.ndarray
    T: np.ndarray
    L: np.ndarray
    M3: np.ndarray
    M4: np.ndarray
    S_K: np.ndarray
    D_par: np.ndarray
    R2S: np.ndarray
    M4S: np.ndarray
    L2U: np.ndarray
    KK: np.ndarray
    P1: np.ndarray
    P0: np.ndarray
    lambda1: np.ndarray
    congruence_T: float
    congruence_L: float
    cond_KKt: float

    @property
    def n_layer(self):
        return self.R2S.shape[1]

    def bordered(self):
        """The matrix ``[[0, K*K], [K*K, K*A K]]``."""
        p = self.K.shape[1]
        KAK = self.K.T @ self.A_schur @ self.K
        return np.block([[np.zeros((p, p)), self.KK], [self.KK, KAK]])


def _check_congruence(A1, X, target, scale):
    res = la.norm(X.T @ A1 @ X - target)
    return res / max(scale, 1e-300)


def build_layer_algebra(norm, sig, *, tol_zero=la.TOL_ZERO,
                        tol_congruence=TOL_CONGRUENCE):
    """Construct and certify the layer algebra.

    Parameters
    ----------
    norm : NormalizedSystem
    sig : CharacteristicSignature

    Returns
    -------
    LayerAlgebra

    Raises
    ------
    RankDeficientK
        If ``K`` loses column rank or ``K^T S^{-1} K`` is not negative
        definite.
    InertiaMismatch
        If ``M4`` has the wrong number of negative eigenvalues, or a
        congruence identity fails.
    """
    m, r = norm.m, norm.r
    A1 = norm.A[0]
    A12, A22, S = norm.A12(), norm.A22(), norm.S
    P1, P0, lam1 = sig.P1, sig.P0, sig.lambda1
    p = P0.shape[1]
    m1 = P1.shape[1]

    K = A12.T @ P0
    sv = np.linalg.svd(K, compute_uv=False) if K.size else np.zeros(0)
    if p > r or sv.size < p or (p and sv[-1] <= tol_zero * max(1.0, la.norm(A1))):
        raise RankDeficientK(f"K = A12^T P0 has singular values {sv}, needs rank {p}")
    Kt = la.orth_complement(K)
    q = Kt.shape[1]
    KK = K.T @ K

    inv_lam = 1.0 / lam1
    G = (P1 * inv_lam) @ P1.T  # P1 Lambda1^{-1} P1^T
    A = A22 - A12.T @ G @ A12
    A = 0.5 * (A + A.T)

    Sinv_K = np.linalg.solve(S, K)
    D_par = 0.5 * (K.T @ Sinv_K + (K.T @ Sinv_K).T)
    if p and np.max(np.linalg.eigvalsh(D_par)) >= 0:
        raise RankDeficientK("K^T S^{-1} K is not negative definite")

    KSK = K.T @ S @ K
    KSKt = K.T @ S @ Kt
    KtSKt = Kt.T @ S @ Kt
    KtAKt = Kt.T @ A @ Kt
    KAKt = K.T @ A @ Kt
    schur_S = KSK - KSKt @ _solve(KtSKt, KSKt.T)
    M3 = np.linalg.solve(KK, schur_S)
    S_K = -np.linalg.solve(KK, np.linalg.solve(KK, schur_S).T).T
    S_K = 0.5 * (S_K + S_K.T)
    if p and np.min(np.linalg.eigvalsh(S_K)) <= 0:
        raise InertiaMismatch("S_K is not positive definite")

    if q:
        try:
            M4 = np.linalg.solve(KtAKt, KtSKt)
        except np.linalg.LinAlgError as exc:
            raise InertiaMismatch("Ktilde^T A Ktilde is singular") from exc
    else:
        M4 = np.zeros((0, 0))

    N = -(G @ A12 @ Kt) + P0 @ np.linalg.solve(
        KK, KSKt @ _solve(KtSKt, KtAKt) - KAKt)

    T = np.zeros((m + r, m + r))
    T[:m, :m1] = P1
    T[:m, m1:m] = P0
    T[:m, m:] = -G @ A12
    T[m:, m:] = np.eye(r)
    T_target = np.zeros_like(T)
    T_target[:m1, :m1] = np.diag(lam1)
    T_target[m1:m, m:] = K.T
    T_target[m:, m1:m] = K
    T_target[m:, m:] = A
    scale = la.norm(A1)
    cT = _check_congruence(A1, T, T_target, scale)

    L1 = np.zeros((p + r, p + r))
    L1[:p, :p] = np.eye(p)
    L1[p:, p:p + p] = K
    L1[p:, 2 * p:] = Kt
    L2 = np.eye(p + r)
    L2[:p, 2 * p:] = -np.linalg.solve(KK, KAKt)
    inner = np.eye(m + r)
    inner[m1:, m1:] = L1 @ L2
    L = T @ inner
    L_target = np.zeros_like(T)
    L_target[:m1, :m1] = np.diag(lam1)
    L_target[m1:m, m:m + p] = KK
    L_target[m:m + p, m1:m] = KK
    L_target[m:m + p, m:m + p] = K.T @ A @ K
    L_target[m + p:, m + p:] = KtAKt
    cL = _check_congruence(A1, L, L_target, scale)
    if cT > tol_congruence or cL > tol_congruence:
        raise InertiaMismatch(
            f"congruence residuals T: {cT:.3e}, L: {cL:.3e} exceed {tol_congruence:g}")

    expected = sig.n_plus - sig.n1_zero - sig.n1_plus
    if q:
        lam4 = np.linalg.eigvals(M4)
        n_neg = int(np.sum(lam4.real < 0))
    else:
        n_neg = 0
    if n_neg != expected:
        raise InertiaMismatch(
            f"M4 has {n_neg} negative eigenvalues, expected {expected}")
    if q:
        sub = la.stable_invariant_subspace(M4)
        R2S, M4S = sub.basis, sub.restricted_map
    else:
        R2S, M4S = np.zeros((0, 0), complex), np.zeros((0, 0), complex)
    L2U = la.left_null_space(R2S) if q else np.zeros((0, 0))

    cond = float(np.linalg.cond(np.hstack([K, Kt]))) if r else 1.0
    return LayerAlgebra(K=K, Ktilde=Kt, A_schur=A, N=N, T=T, L=L, M3=M3, M4=M4,
                        S_K=S_K, D_par=D_par, R2S=R2S, M4S=M4S, L2U=L2U, KK=KK,
                        P1=P1, P0=P0, lambda1=lam1, congruence_T=cT,
                        congruence_L=cL, cond_KKt=cond)


def bordered_inertia_check(la_, *, tol_zero=la.TOL_ZERO):
    """Inertia of the bordered matrix; must be ``(p, 0, p)``.

    Raises
    ------
    InertiaMismatch
    """
    p = la_.K.shape[1]
    got = la.inertia(la_.bordered(), tol_zero=tol_zero)
    if got != (p, 0, p):
        raise InertiaMismatch(f"bordered matrix inertia {got}, expected {(p, 0, p)}")
    return got


def tangential_C(norm, omega):
    """``C(omega) = i sum_j omega_j A_j11`` over the tangential directions."""
    m = norm.m
    C = np.zeros((m, m), complex)
    omega = np.atleast_1d(np.asarray(omega, dtype=float)) if norm.d > 1 else np.zeros(0)
    for j, w in enumerate(omega, start=1):
        C += 1j * w * norm.A11(j)
    return C


def limit_blocks(norm, sig, la_, xi, omega=None, *, tol=1e-12):
    """Limit blocks ``(M1, M2)`` at frequency ``(xi, omega)``.

    Raises
    ------
    ValueError
        If ``Re xi <= 0``.
    SingularC00
        If ``xi I + C00`` is numerically singular.
    """
    xi = complex(xi)
    if xi.real <= 0:
        raise ValueError("Re(xi) must be positive")
    P1, P0 = la_.P1, la_.P0
    C = tangential_C(norm, omega if omega is not None else np.zeros(norm.d - 1))
    C11, C10 = P1.T @ C @ P1, P1.T @ C @ P0
    C01, C00 = P0.T @ C @ P1, P0.T @ C @ P0
    p = P0.shape[1]
    X00 = xi * np.eye(p) + C00
    if p and la.smallest_singular_value(X00) <= tol * max(1.0, abs(xi)):
        raise SingularC00("xi I + C00 is singular")
    inner = xi * np.eye(P1.shape[1]) + C11 - C10 @ _solve(X00, C01)
    M1 = -(inner / la_.lambda1[:, None])
    M2 = -np.linalg.solve(la_.KK, X00)
    return M1, M2


def stable_limit_basis_12(la_, M2, *, tol_residual=1e-9):
    """Stable basis ``[I; M3^{-1} S0]`` of ``[[0, M3], [M2, 0]]``.

    ``S0`` is the stable square root of ``M3 M2``.  The product identity
    ``M3 M2 = S_K (xi I + C00)`` is enforced through ``M2`` itself:
    ``xi I + C00 = -(K*K) M2``.
    """
    p = la_.K.shape[1]
    M3 = la_.M3
    X = M3 @ M2
    X00 = -la_.KK @ M2
    ident = la.norm(X - la_.S_K @ X00) / max(1.0, la.norm(X))
    if ident > 1e-10:
        raise NegativeRealEigenvalue(
            f"product identity M3 M2 = S_K (xi I + C00) violated ({ident:.3e})")
    S0 = la.stable_sqrt(X)
    R12 = np.vstack([np.eye(p), np.linalg.solve(M3, S0)])
    big = np.block([[np.zeros((p, p)), M3], [M2, np.zeros((p, p))]])
    # restricted map: big R12 = R12 S0 since M3 (M3^{-1} S0) = S0 and M2 = M3^{-1} S0^2
    res = la.norm(big @ R12 - R12 @ S0) / max(1.0, la.norm(big))
    if res > tol_residual:
        raise NegativeRealEigenvalue(f"stable basis residual {res:.3e}")
    return R12


def format_algebra(la_):
    """Plain-text dump of every field."""
    fields = ["K", "Ktilde", "A_schur", "N", "T", "L", "M3", "M4", "S_K",
              "D_par", "R2S", "M4S", "L2U"]
    out = []
    with np.printoptions(precision=12, suppress=True, linewidth=120):
        for f in fields:
            M = getattr(la_, f)
            out.append(f"{f} {M.shape}:")
            out.append(str(M) if M.size else "  (empty)")
    out.append(f"congruence_T {la_.congruence_T:.3e}")
    out.append(f"congruence_L {la_.congruence_L:.3e}")
    out.append(f"cond(K, Ktilde) {la_.cond_KKt:.6e}")
    return "\n".join(out)
