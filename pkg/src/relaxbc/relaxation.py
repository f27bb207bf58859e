"""Full stiff relaxation solver.

Strang splitting: half a step of the exact source flow ``v -> exp(S dt /
(2 eps)) v``, a full upwind transport step, another half source step. The
boundary condition ``B U = b`` fixes the incoming characteristic variables
of ``A_1`` at the wall after every full step. At the far end the incoming
characteristic variables keep their initial values, so the outer boundary
is transparent for outgoing waves and feeds in nothing new.
"""

from dataclasses import dataclass

import numpy as np

from . import linalg as la
from .errors import BoundarySingular, UnstableStep
from .transport import Upwind, sign_split


@dataclass
class TimeGrid:
    """Uniform time steps with stored slices on step indices."""

    dt: float
    n_steps: int
    slice_steps: np.ndarray

    @classmethod
    def build(cls, t_max, dt_max, n_slices):
        n = int(np.ceil(t_max / dt_max - 1e-9))
        n = max(n_slices, int(np.ceil(n / n_slices)) * n_slices)
        steps = np.arange(n_slices + 1) * (n // n_slices)
        return cls(t_max / n, n, steps)

    @property
    def times(self):
        return np.arange(self.n_steps + 1) * self.dt

    @property
    def slice_times(self):
        return self.slice_steps * self.dt

    def record_steps(self, neighbours=False):
        """Step indices to store; with neighbours, also each slice +/- 1."""
        if not neighbours:
            return set(int(k) for k in self.slice_steps)
        out = set()
        for k in self.slice_steps:
            out.update(j for j in (k - 1, k, k + 1) if 0 <= j <= self.n_steps)
        return out


class WallClosure:
    """Solve ``B U = b`` for the incoming characteristic variables at the wall."""

    def __init__(self, A1, B, tol=1e-10):
        _, _, Pp, Pm, _ = sign_split(A1)
        self.Pp, self.Pm = Pp, Pm
        G = np.asarray(B) @ Pp
        if G.shape[0] != G.shape[1]:
            raise BoundarySingular(
                f"boundary rows {G.shape[0]} do not match incoming modes {G.shape[1]}")
        s = la.smallest_singular_value(G)
        if s <= tol * max(1.0, la.norm(G)):
            raise BoundarySingular(f"B restricted to incoming modes is singular ({s:.3e})")
        self.cond = float(np.linalg.cond(G)) if G.size else 1.0
        self.B = np.asarray(B)
        self.G = G
        self.BPm = self.B @ Pm

    def apply(self, U0, b):
        """Return the wall state with incoming modes set; ``U0``: ``([nh,] n)``."""
        am = U0 @ self.Pm
        rhs = np.asarray(b) - am @ self.BPm.T
        ap = np.linalg.solve(self.G, rhs.T).T if rhs.ndim > 1 else np.linalg.solve(self.G, rhs)
        return ap @ self.Pp.T + am @ self.Pm.T


@dataclass
class FieldHistory:
    """States at recorded step indices plus optional wall-trace history."""

    x: np.ndarray
    xhat: np.ndarray
    tg: TimeGrid
    states: dict
    wall: np.ndarray = None

    def at(self, step):
        return self.states[int(step)]

    def slices(self):
        return [self.states[int(k)] for k in self.tg.slice_steps]


def source_propagator(S, dt, eps):
    """``exp(S dt / eps)`` for symmetric negative definite ``S``."""
    lam, V = np.linalg.eigh(0.5 * (S + S.T))
    return (V * np.exp(lam * dt / eps)) @ V.T


def solve_relaxation(norm, b, U0, eps, x, tg, xhat=None, *, B=None,
                     neighbours=False, blowup=1e12):
    """Integrate the relaxation system in normalized variables.

    Parameters
    ----------
    norm : NormalizedSystem
    b : callable ``(t, xhat) -> ([nh,] n_plus)``
    U0 : array ``(nx, [nh,] n)``
        Initial state on the grid.
    eps : float
    x : array
        Normal grid nodes.
    tg : TimeGrid
    xhat : array, optional
        Periodic tangential nodes (two dimensions only).

    Returns
    -------
    FieldHistory

    Raises
    ------
    CflViolation, BoundarySingular, UnstableStep
    """
    B = norm.B if B is None else np.asarray(B)
    m = norm.m
    spacing = [] if xhat is None else [float(xhat[1] - xhat[0]) if len(xhat) > 1 else np.inf]
    op = Upwind(norm.A[:1 + len(spacing)], x, spacing)
    op.check_cfl(tg.dt)
    wall = WallClosure(norm.A[0], B)
    E = source_propagator(norm.S, 0.5 * tg.dt, eps)
    U = np.array(U0, dtype=float, copy=True)
    _, _, _, Pm, _ = sign_split(norm.A[0])
    far_in = Pm @ Pm.T
    far0 = U[-1] @ far_in
    record = tg.record_steps(neighbours)
    states = {}
    if 0 in record:
        states[0] = U.copy()
    for k in range(tg.n_steps):
        t1 = (k + 1) * tg.dt
        U[..., m:] = U[..., m:] @ E.T
        op.sweep_normal(U, tg.dt)
        op.sweep_tangential(U, tg.dt)
        U[..., m:] = U[..., m:] @ E.T
        U[0] = wall.apply(U[0], b(t1, xhat))
        U[-1] += far0 - U[-1] @ far_in
        if k + 1 in record:
            if not np.all(np.isfinite(U)) or np.abs(U).max() > blowup:
                raise UnstableStep(f"solution blew up at t = {t1:.6g}")
            states[k + 1] = U.copy()
    return FieldHistory(x=np.asarray(x), xhat=xhat, tg=tg, states=states)
