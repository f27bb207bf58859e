"""Dense matrix primitives.

Sign-based spectral splits of symmetric matrices, ordered-Schur stable
invariant subspaces, inertia counts, stable square roots and propagation by
the matrix exponential. Everything here is a pure function of its inputs.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import (NegativeRealEigenvalue, NonFiniteMatrix, NotStable,
                     NotSymmetric, SplitAmbiguous)

TOL_ZERO = 1e-9
TOL_SYM = 1e-10
TOL_SPLIT = 1e-8
TOL_SUBSPACE = 1e-10


def as_matrix(A, *, name="matrix", dtype=None):
    """Convert to a finite 2-D array, rejecting NaN/Inf."""
    M = np.asarray(A, dtype=dtype)
    if M.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise NonFiniteMatrix(f"{name} has non-finite entries")
    return M


def norm(A):
    """Frobenius norm that returns 0 for empty matrices."""
    A = np.asarray(A)
    return float(np.linalg.norm(A)) if A.size else 0.0


def _check_symmetric(A, tol_sym):
    A = as_matrix(A, dtype=float)
    if A.shape[0] != A.shape[1]:
        raise NotSymmetric(f"matrix is not square: {A.shape}")
    scale = norm(A)
    if norm(A - A.T) > tol_sym * max(scale, np.finfo(float).tiny):
        raise NotSymmetric(
            f"asymmetry {norm(A - A.T):.3e} exceeds {tol_sym:g} * {scale:.3e}")
    return 0.5 * (A + A.T)


def zero_threshold_for(A, tol_zero=TOL_ZERO):
    """Relative zero-eigenvalue threshold ``tol_zero * max(1, ||A||)``."""
    return tol_zero * max(1.0, norm(A))


@dataclass(frozen=True)
class SpectralSplit:
    """Orthonormal eigenbases of a symmetric matrix grouped by sign.

    Attributes
    ----------
    P_plus, P_zero, P_minus : ndarray
        Bases of the positive, numerically zero and negative eigenspaces.
        Positive eigenvalues are ordered descending, negative ones ascending
        in magnitude order of the dense solver.
    eigenvalues : ndarray
        All eigenvalues, in the column order of ``(P_plus, P_zero, P_minus)``.
    zero_threshold : float
        Eigenvalues with modulus at most this value are classified as zero.
    """

    P_plus: np.ndarray
    P_zero: np.ndarray
    P_minus: np.ndarray
    eigenvalues: np.ndarray
    zero_threshold: float

    @property
    def lambda_plus(self):
        return self.eigenvalues[:self.P_plus.shape[1]]

    @property
    def lambda_minus(self):
        k = self.P_plus.shape[1] + self.P_zero.shape[1]
        return self.eigenvalues[k:]

    @property
    def basis(self):
        return np.hstack([self.P_plus, self.P_zero, self.P_minus])

    def counts(self):
        return (self.P_plus.shape[1], self.P_zero.shape[1],
                self.P_minus.shape[1])


def symmetric_eigensplit(A, zero_threshold=None, *, tol_sym=TOL_SYM,
                         tol_zero=TOL_ZERO):
    """Split a symmetric matrix into positive, zero and negative eigenspaces.

    Parameters
    ----------
    A : array_like
        Real symmetric matrix (checked to ``tol_sym`` relative).
    zero_threshold : float, optional
        Absolute threshold; defaults to ``tol_zero * max(1, ||A||)``.

    Returns
    -------
    SpectralSplit

    Raises
    ------
    NotSymmetric
        If ``||A - A^T|| > tol_sym * ||A||``.
    """
    A = _check_symmetric(A, tol_sym)
    if zero_threshold is None:
        zero_threshold = zero_threshold_for(A, tol_zero)
    n = A.shape[0]
    if n == 0:
        e = np.zeros((0, 0))
        return SpectralSplit(e, e, e, np.zeros(0), float(zero_threshold))
    lam, Q = np.linalg.eigh(A)
    pos = lam > zero_threshold
    neg = lam < -zero_threshold
    zer = ~(pos | neg)
    ip = np.flatnonzero(pos)[::-1]
    iz = np.flatnonzero(zer)
    ineg = np.flatnonzero(neg)
    order = np.concatenate([ip, iz, ineg])
    return SpectralSplit(Q[:, ip], Q[:, iz], Q[:, ineg], lam[order],
                         float(zero_threshold))


def inertia(A, zero_threshold=None, *, tol_sym=TOL_SYM, tol_zero=TOL_ZERO):
    """Return ``(n_pos, n_zero, n_neg)`` for a symmetric matrix."""
    return symmetric_eigensplit(A, zero_threshold, tol_sym=tol_sym,
                                tol_zero=tol_zero).counts()


@dataclass(frozen=True)
class StableSubspace:
    """Orthonormal basis of the invariant subspace with Re(lambda) < 0."""

    basis: np.ndarray
    restricted_map: np.ndarray
    residual: float

    @property
    def dim(self):
        return self.basis.shape[1]


def stable_invariant_subspace(M, *, tol_split=TOL_SPLIT,
                              tol_subspace=TOL_SUBSPACE):
    """Stable invariant subspace of a square matrix via ordered Schur form.

    The Schur form (real for real input, complex otherwise) is reordered so
    that eigenvalues with negative real part lead; the leading Schur vectors
    span the stable subspace.

    Parameters
    ----------
    M : array_like
        Complex or real square matrix.
    tol_split : float
        Relative gap: an eigenvalue with ``|Re lambda| <= tol_split *
        max(1, ||M||)`` makes the split ambiguous.

    Raises
    ------
    SplitAmbiguous
        If some eigenvalue sits inside the gap band around the imaginary axis.
    """
    M = as_matrix(M, name="M")
    real = not np.iscomplexobj(M)
    M = M.astype(float if real else complex)
    n = M.shape[0]
    if n == 0:
        return StableSubspace(np.zeros((0, 0), M.dtype),
                              np.zeros((0, 0), M.dtype), 0.0)
    scale = max(1.0, norm(M))
    T, Z, sdim = sla.schur(M, output="real" if real else "complex", sort="lhp")
    lam = np.linalg.eigvals(T) if real else np.diag(T)
    gap = np.min(np.abs(lam.real))
    if gap <= tol_split * scale:
        raise SplitAmbiguous(
            f"eigenvalue real part {gap:.3e} within split gap "
            f"{tol_split * scale:.3e}")
    R = Z[:, :sdim]
    MS = T[:sdim, :sdim]
    res = norm(M @ R - R @ MS)
    if res > tol_subspace * scale:
        raise SplitAmbiguous(f"invariant-subspace residual {res:.3e} too large")
    return StableSubspace(R, MS, res)


def _on_negative_axis(lam, tol):
    mag = np.abs(lam)
    return (mag <= tol) | ((lam.real <= 0) & (np.abs(lam.imag) <= tol * np.maximum(mag, 1.0)))


def stable_sqrt(X, *, tol=1e-10):
    """Square root of ``X`` whose eigenvalues all have negative real part.

    Uses the complex Schur form and the triangular square-root recurrence,
    with each diagonal entry taken as the negated principal root. This is
    well defined when ``X`` has no eigenvalue on the closed negative real
    axis.

    Parameters
    ----------
    X : array_like
        Square complex matrix.
    tol : float
        Relative tolerance for the negative-axis test.

    Returns
    -------
    ndarray
        ``S0`` with ``S0 @ S0 == X`` and ``max Re eig(S0) < 0``.

    Raises
    ------
    NegativeRealEigenvalue
    """
    X = as_matrix(X, name="X", dtype=complex)
    n = X.shape[0]
    if n == 0:
        return np.zeros((0, 0), complex)
    T, Z = sla.schur(X, output="complex")
    lam = np.diag(T)
    if np.any(_on_negative_axis(lam, tol * max(1.0, norm(X)))):
        raise NegativeRealEigenvalue(
            f"eigenvalues {lam[_on_negative_axis(lam, tol * max(1.0, norm(X)))]} "
            "lie on the closed negative real axis")
    R = np.zeros_like(T)
    d = -np.sqrt(lam)
    R[np.diag_indices(n)] = d
    for j in range(1, n):
        for i in range(j - 1, -1, -1):
            s = T[i, j] - R[i, i + 1:j] @ R[i + 1:j, j]
            R[i, j] = s / (d[i] + d[j])
    return Z @ R @ Z.conj().T


def propagate(M_S, y, v):
    """Evaluate ``exp(y * M_S) @ v`` for a stable ``M_S``.

    ``y`` may be a scalar or a 1-D array of nonnegative values; for an array
    the result stacks one output per entry along a new leading axis.

    Raises
    ------
    NotStable
        If an eigenvalue of ``M_S`` has nonnegative real part.
    """
    M_S = as_matrix(M_S, name="M_S", dtype=complex)
    v = np.asarray(v, dtype=complex)
    if M_S.shape[0]:
        lam = np.linalg.eigvals(M_S)
        if np.max(lam.real) >= 0:
            raise NotStable(f"max Re eigenvalue {np.max(lam.real):.3e} >= 0")
    ys = np.asarray(y, dtype=float)
    if np.any(ys < 0):
        raise ValueError("y must be nonnegative")
    if ys.ndim == 0:
        return sla.expm(float(ys) * M_S) @ v
    return np.stack([sla.expm(yy * M_S) @ v for yy in ys])


def propagator_stack(M_S, ys):
    """``exp(y M_S)`` for every ``y`` in ``ys``; shape ``(len(ys), k, k)``.

    Diagonalizes once when the eigenvector matrix is well conditioned and
    falls back to one ``expm`` per entry otherwise.
    """
    M_S = np.asarray(M_S, dtype=complex)
    k = M_S.shape[0]
    ys = np.asarray(ys, dtype=float)
    if k == 0:
        return np.zeros((ys.size, 0, 0), complex)
    lam, V = np.linalg.eig(M_S)
    cond = np.linalg.cond(V)
    if cond < 1e8:
        Vinv = np.linalg.inv(V)
        return np.einsum("ij,yj,jk->yik", V, np.exp(np.outer(ys, lam)), Vinv)
    return np.stack([sla.expm(yy * M_S) for yy in ys])


def left_null_space(Y, *, rcond=None):
    """Orthonormal rows spanning ``{w : w @ Y = 0}``."""
    Y = np.asarray(Y)
    m = Y.shape[0]
    if Y.shape[1] == 0:
        return np.eye(m, dtype=Y.dtype if np.iscomplexobj(Y) else float)
    return sla.null_space(Y.conj().T, rcond=rcond).conj().T


def orth_complement(K):
    """Orthonormal basis of the orthogonal complement of ``range(K)``."""
    K = np.asarray(K)
    m, k = K.shape
    if k == 0:
        return np.eye(m)
    Qf, _ = np.linalg.qr(K, mode="complete")
    return Qf[:, k:]


def smallest_singular_value(A):
    A = np.asarray(A)
    if A.size == 0:
        return np.inf
    return float(np.linalg.svd(A, compute_uv=False)[-1])


def det_or_one(A):
    """Determinant with the convention ``det`` of a 0x0 matrix is 1."""
    A = np.asarray(A)
    if A.shape[0] == 0:
        return 1.0
    return np.linalg.det(A)
