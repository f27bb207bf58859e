"""Reduced boundary condition for the equilibrium system.

At the reference frequency the boundary matrix applied to the limit stable
basis splits into three column blocks ``(Y1, Y2, Y3)`` for the incoming
equilibrium modes, the zero-speed modes and the fast layer. Left null
spaces of pairs of blocks give the matrices ``B_o``, ``B_1`` and ``B_2``
that decouple the boundary condition into the reduced condition for the
equilibrium field, the trace of the parabolic layer and the trace of the
fast layer.
"""

from dataclasses import dataclass

import numpy as np

from . import linalg as la
from .errors import DegenerateNullSpace, GkcViolatedAtReference, SingularTraceSystem
from .kreiss import limit_stable_basis, sample_ukc
from .layer import limit_blocks

TOL_INVERT = 1e-8
TOL_NULL = 1e-10


def _realify(M, tol=1e-13):
    M = np.asarray(M)
    if np.iscomplexobj(M) and la.norm(M.imag) <= tol * max(1.0, la.norm(M)):
        return M.real.copy()
    return M


def incoming_basis(norm, sig, la_, xi=1.0, omega=None):
    """Orthonormal basis ``R11`` of the stable subspace of ``M1(xi, omega)``."""
    M1, _ = limit_blocks(norm, sig, la_, xi, omega)
    sub = la.stable_invariant_subspace(_realify(M1))
    if sub.dim != sig.n1_plus:
        raise DegenerateNullSpace(
            f"M1 has {sub.dim} stable eigenvalues, expected {sig.n1_plus}")
    return sub.basis


def assemble_Y(norm, sig, la_, B=None, xi=1.0, omega=None):
    """Block columns ``(Y1, Y2, Y3)`` of ``B`` times the limit stable basis."""
    B = norm.B if B is None else np.asarray(B)
    m = norm.m
    B_u, B_v = B[:, :m], B[:, m:]
    R11 = incoming_basis(norm, sig, la_, xi, omega)
    if omega is None or not np.any(omega):
        top1 = la_.P1 @ R11
    else:
        top1 = limit_stable_basis(norm, sig, la_, xi, omega)[:m, :sig.n1_plus]
    Y1 = B_u @ top1
    Y2 = B_u @ la_.P0
    Y3 = (B_u @ la_.N + B_v @ la_.Ktilde) @ la_.R2S
    return _realify(Y1), _realify(Y2), _realify(Y3)


@dataclass(frozen=True)
class ReducedBoundary:
    """Reduced boundary matrices and the boundary coupling system.

    Attributes
    ----------
    B_o, B_1, B_2 : arrays with orthonormal rows
        Left annihilators of ``(Y2, Y3)``, ``(Y1, Y3)`` and ``(Y1, Y2)``.
    Y1, Y2, Y3 : arrays
        Block columns at the reference frequency.
    P1U, P1S : arrays
        Incoming and outgoing eigenbases of ``A_11``.
    coupling : square array
        The combined boundary system for ``(alpha_U, P0^T mu1, w)``.
    """

    B_o: np.ndarray
    B_1: np.ndarray
    B_2: np.ndarray
    Y1: np.ndarray
    Y2: np.ndarray
    Y3: np.ndarray
    P1U: np.ndarray
    P1S: np.ndarray
    P0: np.ndarray
    B_u: np.ndarray
    B_v: np.ndarray
    coupling: np.ndarray
    L2U: np.ndarray
    coupling_sigma_min: float
    checks: dict

    @property
    def incoming_matrix(self):
        """``B_o B_u P1U``; invertible when the UKC holds at the reference."""
        return self.B_o @ self.B_u @ self.P1U

    def format(self, ukc=None):
        out = []
        with np.printoptions(precision=12, suppress=True, linewidth=120):
            for name in ("B_o", "B_1", "B_2", "Y1", "Y2", "Y3", "coupling"):
                M = getattr(self, name)
                out.append(f"{name} {M.shape}:")
                out.append(str(M) if M.size else "  (empty)")
        out.append(f"coupling smallest singular value {self.coupling_sigma_min:.12g}")
        for k, v in self.checks.items():
            out.append(f"{k} {v:.3e}")
        if ukc is not None:
            out.append(f"UKC sampled minimum {ukc:.12g}")
        return "\n".join(out)

    def as_dict(self, ukc=None):
        d = {name: np.asarray(getattr(self, name)).tolist()
             for name in ("B_o", "B_1", "B_2", "Y1", "Y2", "Y3", "coupling")}
        d["coupling_sigma_min"] = self.coupling_sigma_min
        d["checks"] = dict(self.checks)
        if ukc is not None:
            d["ukc_min"] = ukc
        return d


def _annihilator(Y, rows_expected, name):
    W = la.left_null_space(Y, rcond=TOL_NULL * 10)
    if W.shape[0] != rows_expected:
        raise DegenerateNullSpace(
            f"{name} has {W.shape[0]} rows, expected {rows_expected}")
    return _realify(W)


def derive_reduced_matrices(norm, sig, la_, B=None, *, xi=1.0, omega=None,
                            tol_invert=TOL_INVERT):
    """Derive ``B_o``, ``B_1``, ``B_2`` and certify the coupling system.

    Raises
    ------
    GkcViolatedAtReference
        If ``(Y1, Y2, Y3)`` is singular.
    DegenerateNullSpace
        If an annihilator has the wrong number of rows.
    """
    B = norm.B if B is None else np.asarray(B)
    m = norm.m
    B_u, B_v = B[:, :m], B[:, m:]
    Y1, Y2, Y3 = assemble_Y(norm, sig, la_, B, xi, omega)
    Y = np.hstack([Y1, Y2, Y3])
    sY = la.smallest_singular_value(Y)
    if sY <= tol_invert * max(1.0, la.norm(Y)):
        raise GkcViolatedAtReference(
            f"B times the limit stable basis is singular (sigma_min = {sY:.3e})")
    k = la_.n_layer
    B_o = _annihilator(np.hstack([Y2, Y3]), sig.n1_plus, "B_o")
    B_1 = _annihilator(np.hstack([Y1, Y3]), sig.n1_zero, "B_1")
    B_2 = _annihilator(np.hstack([Y1, Y2]), k, "B_2")

    R11 = incoming_basis(norm, sig, la_, 1.0, None)
    P1U = _realify(la_.P1 @ R11)
    P1S = sig.split.P_minus

    q = la_.Ktilde.shape[1]
    L2U = la_.L2U
    top = np.hstack([B_u @ P1U, B_u @ la_.P0, B_u @ la_.N + B_v @ la_.Ktilde])
    bottom = np.hstack([np.zeros((L2U.shape[0], P1U.shape[1] + la_.P0.shape[1])), L2U])
    coupling = _realify(np.vstack([top, bottom]))
    if coupling.shape[0] != coupling.shape[1]:
        raise DegenerateNullSpace(f"coupling matrix has shape {coupling.shape}")
    smin = la.smallest_singular_value(coupling)

    sc = max(1.0, la.norm(B))
    checks = {
        "|B_o Y2|": la.norm(B_o @ Y2) / sc,
        "|B_o Y3|": la.norm(B_o @ Y3) / sc,
        "|B_o B_u P0|": la.norm(B_o @ B_u @ la_.P0) / sc,
        "|B_1 (Y1,Y3)|": la.norm(B_1 @ np.hstack([Y1, Y3])) / sc,
        "|B_2 (Y1,Y2)|": la.norm(B_2 @ np.hstack([Y1, Y2])) / sc,
        "sigma_min(B_1 Y2)": la.smallest_singular_value(B_1 @ Y2),
        "sigma_min(B_2 Y3)": la.smallest_singular_value(B_2 @ Y3),
        "sigma_min(B_o B_u P1U)": la.smallest_singular_value(B_o @ B_u @ P1U),
        "sigma_min(B_o;B_1;B_2)": la.smallest_singular_value(np.vstack([B_o, B_1, B_2])),
    }
    for key in ("|B_o Y2|", "|B_o Y3|", "|B_o B_u P0|", "|B_1 (Y1,Y3)|", "|B_2 (Y1,Y2)|"):
        if checks[key] > 1e-10:
            raise DegenerateNullSpace(f"{key} = {checks[key]:.3e}")
    for key in ("sigma_min(B_1 Y2)", "sigma_min(B_2 Y3)", "sigma_min(B_o B_u P1U)"):
        if checks[key] <= tol_invert * sc:
            raise GkcViolatedAtReference(f"{key} = {checks[key]:.3e}")
    if smin <= tol_invert * max(1.0, la.norm(coupling)):
        raise GkcViolatedAtReference(f"coupling matrix singular (sigma_min = {smin:.3e})")
    return ReducedBoundary(B_o=B_o, B_1=B_1, B_2=B_2, Y1=Y1, Y2=Y2, Y3=Y3,
                           P1U=P1U, P1S=P1S, P0=la_.P0, B_u=B_u, B_v=B_v,
                           coupling=coupling, L2U=L2U, coupling_sigma_min=smin,
                           checks=checks)


def solve_boundary_traces(rb, b_t, ubar_trace):
    """Traces of the parabolic layer and the fast layer at ``x_1 = 0``.

    Parameters
    ----------
    rb : ReducedBoundary
    b_t : (..., n_plus) array
    ubar_trace : (..., n - r) array

    Returns
    -------
    mu1_trace : (..., n1_zero) array
    wS : (..., n_layer) array
        Coordinates of ``w(t, 0)`` in the stable basis of ``M4``.

    Raises
    ------
    SingularTraceSystem
    """
    rhs = np.asarray(b_t, dtype=float) - np.asarray(ubar_trace, dtype=float) @ rb.B_u.T
    out = []
    for W, Y in ((rb.B_1, rb.Y2), (rb.B_2, rb.Y3)):
        G = W @ Y
        if G.shape[0] == 0:
            out.append(np.zeros(rhs.shape[:-1] + (0,)))
            continue
        if la.smallest_singular_value(G) <= 1e-12 * max(1.0, la.norm(G)):
            raise SingularTraceSystem("trace system is singular")
        out.append(np.linalg.solve(G, (rhs @ W.T)[..., None])[..., 0]
                   if rhs.ndim > 1 else np.linalg.solve(G, W @ rhs))
    return out[0], out[1]


def reconstruction_residual(rb, la_, b_t, ubar_trace, mu1_trace, wS):
    """``|B_u ubar + B_u P0 mu1 + (B_u N + B_v Kt) R2S wS - b|`` (max norm)."""
    lhs = (np.asarray(ubar_trace) @ rb.B_u.T + np.asarray(mu1_trace) @ rb.Y2.T
           + np.asarray(wS) @ rb.Y3.T)
    return float(np.max(np.abs(lhs - np.asarray(b_t)))) if np.size(lhs) else 0.0


def ukc_minimum(norm, sig, la_, rb, grid=None):
    """Sampled minimum of the UKC ratio; ``(value, argmin, skipped)``."""
    return sample_ukc(norm, sig, la_, rb.B_o, grid)
