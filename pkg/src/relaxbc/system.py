"""Relaxation systems: admissibility checks, normalization and classification.

A system ``U_t + sum_j A_j U_{x_j} = Q U / eps`` on ``x_1 > 0`` with boundary
condition ``B U = b`` at ``x_1 = 0`` is normalized to symmetric form with
``Q = diag(0, S)`` and then classified by the characteristic counts of its
normal coefficient.
"""

from dataclasses import dataclass, field

import numpy as np

from . import linalg as la
from .errors import (DimensionMismatch, Incompatible, NotTypeII, NotValidated,
                     SingularA1)


@dataclass(frozen=True)
class RelaxationSystem:
    """Raw user input.

    Parameters
    ----------
    A : sequence of (n, n) arrays
        Coefficient matrices, normal direction first.
    Q : (n, n) array
        Relaxation matrix.
    B : (n_plus, n) array
        Boundary matrix.
    A0 : (n, n) array, optional
        Symmetric positive definite symmetrizer; identity when omitted.
    r : int, optional
        Declared rank of ``Q``; checked when given.
    """

    A: tuple
    Q: np.ndarray
    B: np.ndarray
    A0: np.ndarray = None
    r: int = None
    name: str = ""

    def __post_init__(self):
        A = tuple(la.as_matrix(a, name=f"A{j + 1}", dtype=float)
                  for j, a in enumerate(self.A))
        if not A:
            raise DimensionMismatch("at least one coefficient matrix is required")
        n = A[0].shape[0]
        for j, a in enumerate(A):
            if a.shape != (n, n):
                raise DimensionMismatch(f"A{j + 1} has shape {a.shape}, expected {(n, n)}")
        Q = la.as_matrix(self.Q, name="Q", dtype=float)
        if Q.shape != (n, n):
            raise DimensionMismatch(f"Q has shape {Q.shape}, expected {(n, n)}")
        B = la.as_matrix(self.B, name="B", dtype=float)
        if B.shape[1] != n:
            raise DimensionMismatch(f"B has {B.shape[1]} columns, expected {n}")
        A0 = np.eye(n) if self.A0 is None else la.as_matrix(self.A0, name="A0", dtype=float)
        if A0.shape != (n, n):
            raise DimensionMismatch(f"A0 has shape {A0.shape}, expected {(n, n)}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "A0", A0)

    @property
    def d(self):
        return len(self.A)

    @property
    def n(self):
        return self.A[0].shape[0]


@dataclass
class Check:
    name: str
    passed: bool
    value: float = float("nan")
    detail: str = ""


@dataclass
class ValidationReport:
    checks: list = field(default_factory=list)

    def add(self, name, passed, value=float("nan"), detail=""):
        self.checks.append(Check(name, bool(passed), float(value), detail))

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def failures(self):
        return [c for c in self.checks if not c.passed]

    def as_dict(self):
        return {"passed": self.passed,
                "checks": [{"name": c.name, "passed": c.passed,
                            "value": c.value, "detail": c.detail}
                           for c in self.checks]}

    def format(self):
        lines = []
        for c in self.checks:
            tag = "PASS" if c.passed else "FAIL"
            extra = f"  {c.detail}" if c.detail else ""
            lines.append(f"{tag}  {c.name:<28s} {c.value:.3e}{extra}")
        lines.append("OVERALL " + ("PASS" if self.passed else "FAIL"))
        return "\n".join(lines)


def _rank(M, tol_zero):
    s = np.linalg.svd(M, compute_uv=False)
    if s.size == 0:
        return 0
    return int(np.sum(s > tol_zero * max(1.0, s[0])))


def _sqrt_spd(A0):
    lam, V = np.linalg.eigh(0.5 * (A0 + A0.T))
    return (V * np.sqrt(lam)) @ V.T, (V / np.sqrt(lam)) @ V.T


def count_positive_normal_speeds(sys, tol_zero=la.TOL_ZERO):
    """Number of positive eigenvalues of ``A_1`` (computed in symmetric form)."""
    half, ihalf = _sqrt_spd(sys.A0)
    A1s = ihalf @ (sys.A0 @ sys.A[0]) @ ihalf
    A1s = 0.5 * (A1s + A1s.T)
    lam = np.linalg.eigvalsh(A1s)
    return int(np.sum(lam > la.zero_threshold_for(A1s, tol_zero)))


def validate_structural_stability(sys, *, tol_zero=la.TOL_ZERO, tol_sym=1e-10):
    """Check the structural stability conditions and boundary-matrix shape.

    Per-condition failures are recorded in the report; only dimension errors
    raise.

    Raises
    ------
    DimensionMismatch
        If ``B`` does not have one row per positive normal speed, or the
        declared rank ``r`` disagrees with ``rank(Q)``.
    """
    rep = ValidationReport()
    n = sys.n
    Q, A0 = sys.Q, sys.A0

    sym0 = la.norm(A0 - A0.T) / max(la.norm(A0), 1e-300)
    lam0 = np.linalg.eigvalsh(0.5 * (A0 + A0.T))
    rep.add("A0 symmetric positive definite", sym0 <= tol_sym and lam0[0] > 0,
            lam0[0], f"min eigenvalue {lam0[0]:.3e}")
    if not rep.passed:
        return rep

    rq, rq2 = _rank(Q, tol_zero), _rank(Q @ Q, tol_zero)
    rep.add("rank Q = rank Q^2", rq == rq2, rq - rq2,
            f"rank Q = {rq}, rank Q^2 = {rq2}")
    if sys.r is not None and sys.r != rq:
        raise DimensionMismatch(f"declared r = {sys.r} but rank(Q) = {rq}")

    for j, Aj in enumerate(sys.A):
        M = A0 @ Aj
        res = la.norm(M - M.T) / max(la.norm(M), 1e-300)
        rep.add(f"A0 A{j + 1} symmetric", res <= tol_sym, res)

    D = A0 @ Q + Q.T @ A0
    D = 0.5 * (D + D.T)
    lamD = np.linalg.eigvalsh(D)
    thr = la.zero_threshold_for(D, tol_zero)
    n_neg = int(np.sum(lamD < -thr))
    ok3 = lamD[-1] <= thr and n_neg == rq
    rep.add("A0 Q + Q* A0 <= 0, rank r", ok3, lamD[-1],
            f"max eigenvalue {lamD[-1]:.3e}, negative count {n_neg}")

    M = A0 @ Q
    res = la.norm(M - Q.T @ A0) / max(la.norm(M), 1e-300)
    rep.add("A0 Q = Q* A0", res <= tol_sym, res)

    half, ihalf = _sqrt_spd(A0)
    A1s = ihalf @ (A0 @ sys.A[0]) @ ihalf
    A1s = 0.5 * (A1s + A1s.T)
    lam1 = np.linalg.eigvalsh(A1s)
    smin = np.min(np.abs(lam1)) if n else np.inf
    rep.add("A1 invertible", smin > la.zero_threshold_for(A1s, tol_zero), smin)

    n_plus = int(np.sum(lam1 > la.zero_threshold_for(A1s, tol_zero)))
    if sys.B.shape[0] != n_plus:
        raise DimensionMismatch(
            f"B has {sys.B.shape[0]} rows but A1 has {n_plus} positive eigenvalues")
    rb = _rank(sys.B, tol_zero)
    rep.add("B full row rank", rb == n_plus, rb)
    return rep


@dataclass(frozen=True)
class NormalizedSystem:
    """Symmetric form with ``Q = diag(0, S)``.

    Attributes
    ----------
    A : tuple of (n, n) arrays
        Symmetric coefficients.
    S : (r, r) array
        Symmetric negative definite relaxation block.
    B : (n_plus, n) array
        Boundary matrix acting on the normalized state.
    to_normalized, from_normalized : (n, n) arrays
        ``U_norm = to_normalized @ U`` and its inverse.
    """

    A: tuple
    S: np.ndarray
    B: np.ndarray
    to_normalized: np.ndarray
    from_normalized: np.ndarray
    permutation: np.ndarray = None

    @property
    def d(self):
        return len(self.A)

    @property
    def n(self):
        return self.A[0].shape[0]

    @property
    def r(self):
        return self.S.shape[0]

    @property
    def m(self):
        """Number of conserved (equilibrium) components ``n - r``."""
        return self.n - self.r

    @property
    def Q(self):
        Qn = np.zeros((self.n, self.n))
        Qn[self.m:, self.m:] = self.S
        return Qn

    @property
    def n_plus(self):
        return la.inertia(self.A[0])[0]

    def A11(self, j=0):
        return self.A[j][:self.m, :self.m]

    def A12(self, j=0):
        return self.A[j][:self.m, self.m:]

    def A22(self, j=0):
        return self.A[j][self.m:, self.m:]

    @property
    def B_u(self):
        return self.B[:, :self.m]

    @property
    def B_v(self):
        return self.B[:, self.m:]

    def denormalize(self, U):
        """Map normalized states (last axis) back to the user's variables."""
        return np.asarray(U) @ self.from_normalized.T

    def normalize_state(self, U):
        return np.asarray(U) @ self.to_normalized.T


def _kernel_first_basis(Qs, tol_zero):
    """Orthogonal P with ``P^T Qs P = diag(0, S)``; a permutation when possible."""
    n = Qs.shape[0]
    thr = la.zero_threshold_for(Qs, tol_zero)
    rownorm = np.linalg.norm(Qs, axis=1)
    zero_idx = np.flatnonzero(rownorm <= thr)
    r = _rank(Qs, tol_zero)
    if zero_idx.size == n - r:
        rest = np.setdiff1d(np.arange(n), zero_idx)
        perm = np.concatenate([zero_idx, rest])
        return np.eye(n)[:, perm], perm
    split = la.symmetric_eigensplit(Qs, thr)
    return np.hstack([split.P_zero, split.P_minus, split.P_plus]), None


def normalize(sys, *, report=None, tol_zero=la.TOL_ZERO):
    """Transform to symmetric form with the kernel of ``Q`` first.

    The state map is ``U -> P^T A0^{1/2} U`` where ``P`` is a permutation
    whenever the kernel of the symmetrized ``Q`` is spanned by coordinate
    vectors, and an orthonormal kernel-first eigenbasis otherwise.

    Raises
    ------
    NotValidated
        If the structural stability report has failures.
    """
    if report is None:
        report = validate_structural_stability(sys, tol_zero=tol_zero)
    if not report.passed:
        names = ", ".join(c.name for c in report.failures())
        raise NotValidated(f"structural stability checks failed: {names}")
    n = sys.n
    if np.array_equal(sys.A0, np.eye(n)):
        half = ihalf = np.eye(n)
    else:
        half, ihalf = _sqrt_spd(sys.A0)
    sym = lambda M: 0.5 * (M + M.T)
    As = [sym(ihalf @ (sys.A0 @ Aj) @ ihalf) for Aj in sys.A]
    Qs = sym(ihalf @ (sys.A0 @ sys.Q) @ ihalf)
    P, perm = _kernel_first_basis(Qs, tol_zero)
    r = _rank(Qs, tol_zero)
    An = tuple(sym(P.T @ Aj @ P) for Aj in As)
    Qn = P.T @ Qs @ P
    S = sym(Qn[n - r:, n - r:])
    Bn = sys.B @ ihalf @ P
    return NormalizedSystem(A=An, S=S, B=Bn, to_normalized=P.T @ half,
                            from_normalized=ihalf @ P, permutation=perm)


def normalized_from_blocks(A, S, B):
    """Build a normalized system directly (no symmetrizer, identity map)."""
    A = tuple(np.asarray(a, dtype=float) for a in A)
    n = A[0].shape[0]
    return NormalizedSystem(A=A, S=np.asarray(S, dtype=float),
                            B=np.asarray(B, dtype=float),
                            to_normalized=np.eye(n), from_normalized=np.eye(n))


@dataclass(frozen=True)
class CharacteristicSignature:
    """Characteristic counts and the spectral split of ``A_11``.

    ``P1`` stacks the positive then negative eigenvectors of ``A_11``;
    ``Lambda1`` holds the matching eigenvalues.
    """

    n_plus: int
    n1_plus: int
    n1_zero: int
    split: la.SpectralSplit

    @property
    def P1(self):
        return np.hstack([self.split.P_plus, self.split.P_minus])

    @property
    def P0(self):
        return self.split.P_zero

    @property
    def lambda1(self):
        return np.concatenate([self.split.lambda_plus, self.split.lambda_minus])

    @property
    def Lambda1(self):
        return np.diag(self.lambda1)

    @property
    def n1_minus(self):
        return self.split.P_minus.shape[1]

    @property
    def n_layer(self):
        """Width of the fast-layer block, ``n_plus - n1_plus - n1_zero``."""
        return self.n_plus - self.n1_plus - self.n1_zero


def classify(norm, *, tol_zero=la.TOL_ZERO):
    """Characteristic signature of a normalized system.

    Raises
    ------
    SingularA1
        If the normal coefficient is numerically singular.
    NotTypeII
        If ``A_11`` has no zero eigenvalue.
    """
    A1 = norm.A[0]
    lam = np.linalg.eigvalsh(A1)
    thr = la.zero_threshold_for(A1, tol_zero)
    if lam.size and np.min(np.abs(lam)) <= thr:
        raise SingularA1(f"A1 has eigenvalue {lam[np.argmin(np.abs(lam))]:.3e}")
    n_plus = int(np.sum(lam > thr))
    split = la.symmetric_eigensplit(norm.A11(), la.zero_threshold_for(A1, tol_zero))
    n1p, n1o, _ = split.counts()
    if n1o == 0:
        raise NotTypeII("A11 has no zero eigenvalue; the boundary is not type II")
    return CharacteristicSignature(n_plus=n_plus, n1_plus=n1p, n1_zero=n1o,
                                   split=split)


def check_compatibility(norm, b, u0, xhat=None, *, tol=1e-10):
    """Verify ``B (u0(0, xh), 0) = b(0, xh)`` on sampled boundary points.

    Parameters
    ----------
    norm : NormalizedSystem
    b : callable ``(t, xhat) -> (..., n_plus)``
    u0 : callable ``(x1, xhat) -> (len(x1), [len(xhat),] n - r)``
    xhat : array, optional
        Tangential sample points (``None`` in one dimension).

    Raises
    ------
    Incompatible
        With the maximum mismatch attached.
    """
    b0 = np.atleast_1d(np.asarray(b(0.0, xhat), dtype=float))
    u0_trace = np.asarray(u0(np.zeros(1), xhat), dtype=float)[0]
    mismatch = u0_trace @ norm.B_u.T - b0
    worst = float(np.max(np.abs(mismatch))) if mismatch.size else 0.0
    scale = max(1.0, float(np.max(np.abs(b0))) if b0.size else 0.0)
    rep = ValidationReport()
    rep.add("compatibility B(u0(0),0) = b(0)", worst <= tol * scale, worst)
    if not rep.passed:
        raise Incompatible(f"max mismatch {worst:.3e}", worst)
    return rep
