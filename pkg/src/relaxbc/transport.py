"""First-order characteristic upwind transport on graded grids.

For a symmetric coefficient ``A = A_plus + A_minus`` split by eigenvalue
sign, node ``i`` is advanced with the backward difference for ``A_plus``
and the forward difference for ``A_minus``. The wall node only receives
the outgoing part; its incoming part is set by the caller's boundary
closure. The far node uses a zero-gradient ghost for incoming waves.
Tangential directions are periodic and handled by dimensional splitting.
"""

import numpy as np

from .errors import CflViolation


def sign_split(A):
    """``(A_plus, A_minus, P_plus, P_minus, P_zero)`` from an eigen-decomposition."""
    A = np.asarray(A, dtype=float)
    if A.shape[0] == 0:
        z = np.zeros((0, 0))
        return z, z, z, z, z
    lam, V = np.linalg.eigh(0.5 * (A + A.T))
    thr = 1e-9 * max(1.0, np.abs(lam).max())
    pos, neg = lam > thr, lam < -thr
    zer = ~(pos | neg)
    Ap = (V[:, pos] * lam[pos]) @ V[:, pos].T
    Am = (V[:, neg] * lam[neg]) @ V[:, neg].T
    return Ap, Am, V[:, pos], V[:, neg], V[:, zer]


def spectral_radius(A):
    A = np.asarray(A, dtype=float)
    return float(np.abs(np.linalg.eigvalsh(0.5 * (A + A.T))).max()) if A.size else 0.0


def stable_dt(coeffs, x, xhat_spacing, cfl):
    """Largest step with each directional Courant number at most ``cfl``."""
    dx = float(np.min(np.diff(x)))
    limits = []
    rho1 = spectral_radius(coeffs[0])
    if rho1 > 0:
        limits.append(dx / rho1)
    for Aj, h in zip(coeffs[1:], xhat_spacing):
        rho = spectral_radius(Aj)
        if rho > 0:
            limits.append(h / rho)
    return cfl * min(limits) if limits else np.inf


class Upwind:
    """Precomputed upwind operators for one set of coefficients."""

    def __init__(self, coeffs, x, xhat_spacing=()):
        self.x = np.asarray(x, dtype=float)
        self.dxm = np.diff(self.x)
        self.splits = [sign_split(A)[:2] for A in coeffs]
        self.rho = [spectral_radius(A) for A in coeffs]
        self.h = list(xhat_spacing)

    def check_cfl(self, dt, cfl=1.0):
        nu = [self.rho[0] * dt / float(np.min(self.dxm))]
        nu += [r * dt / h for r, h in zip(self.rho[1:], self.h)]
        if max(nu) > cfl * (1 + 1e-12):
            raise CflViolation(f"Courant number {max(nu):.4f} exceeds {cfl}")
        return max(nu)

    def sweep_normal(self, U, dt):
        """In-place normal sweep; ``U`` has shape ``(nx, [nh,] k)``."""
        Ap, Am = self.splits[0]
        shape = (-1,) + (1,) * (U.ndim - 1)
        D = np.diff(U, axis=0) / self.dxm.reshape(shape)
        if Ap.size and np.any(Ap):
            U[1:] -= dt * (D @ Ap.T)
        if Am.size and np.any(Am):
            U[:-1] -= dt * (D @ Am.T)
        return U

    def sweep_tangential(self, U, dt):
        """In-place periodic sweeps along axis 1 for each tangential direction."""
        for (Ap, Am), h in zip(self.splits[1:], self.h):
            if not (np.any(Ap) or np.any(Am)):
                continue
            back = U - np.roll(U, 1, axis=1)
            fwd = np.roll(U, -1, axis=1) - U
            U -= (dt / h) * (back @ Ap.T + fwd @ Am.T)
        return U
