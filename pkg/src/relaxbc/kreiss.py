"""Frequency matrix, Generalized and Uniform Kreiss condition audits.

The Generalized Kreiss Condition quantifies over an unbounded frequency set;
here it is sampled on a finite log-scaled grid with optional local
refinement, so a passing report is an audit, not a proof.
"""

from dataclasses import dataclass, field
from itertools import product

import numpy as np
from scipy.optimize import minimize

from . import linalg as la
from .errors import InertiaMismatch, SplitAmbiguous
from .layer import limit_blocks, tangential_C

GKC_THRESHOLD = 1e-6


@dataclass(frozen=True)
class FrequencyPoint:
    """Laplace-Fourier frequency ``(xi, omega, eta)`` with ``eta = 1/eps``."""

    xi: complex
    omega: tuple = ()
    eta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "xi", complex(self.xi))
        object.__setattr__(self, "omega", tuple(float(w) for w in np.atleast_1d(self.omega)))
        object.__setattr__(self, "eta", float(self.eta))
        if not self.xi.real > 0:
            raise ValueError(f"Re(xi) must be positive, got {self.xi}")
        if not self.eta >= 0:
            raise ValueError(f"eta must be nonnegative, got {self.eta}")

    def row(self):
        return [self.xi.real, self.xi.imag, *self.omega, self.eta]


def frequency_matrix(norm, fp):
    """``M = A_1^{-1} (eta Q - xi I - i sum_j omega_j A_j)``."""
    n = norm.n
    rhs = fp.eta * norm.Q - fp.xi * np.eye(n)
    for j, w in enumerate(fp.omega, start=1):
        if j < norm.d:
            rhs = rhs - 1j * w * norm.A[j]
    return np.linalg.solve(norm.A[0], rhs)


def stable_basis(norm, fp):
    """Orthonormal stable basis of the frequency matrix; checks its width.

    Raises
    ------
    SplitAmbiguous
    InertiaMismatch
        If the stable dimension differs from the number of positive normal
        speeds (an inadmissible input).
    """
    sub = la.stable_invariant_subspace(frequency_matrix(norm, fp))
    n_plus = norm.n_plus
    if sub.dim != n_plus:
        raise InertiaMismatch(
            f"frequency matrix has {sub.dim} stable eigenvalues, expected {n_plus} "
            f"at xi={fp.xi}, omega={fp.omega}, eta={fp.eta}")
    return sub.basis


def det_ratio(B, R):
    """``|det(B R)| / sqrt(det(R* R))`` with the empty-matrix convention."""
    num = abs(la.det_or_one(np.asarray(B) @ R))
    gram = la.det_or_one(R.conj().T @ R).real
    return num / np.sqrt(gram)


def gkc_ratio(norm, B, fp):
    """GKC determinant ratio at one frequency point.

    The stable basis is orthonormal, so the denominator is one; the ratio is
    evaluated both with and without the denominator and the two are
    required to agree.
    """
    R = stable_basis(norm, fp)
    B = np.asarray(B)
    plain = abs(la.det_or_one(B @ R))
    full = det_ratio(B, R)
    if abs(plain - full) > 1e-10 * max(1.0, full):
        raise SplitAmbiguous(f"orthonormality check failed: {plain} vs {full}")
    return full


def boundary_scale(B):
    """``sqrt(det(B B*))``: the Cauchy-Binet cap of the ratio."""
    B = np.asarray(B)
    return float(np.sqrt(max(la.det_or_one(B @ B.conj().T).real, 0.0)))


@dataclass
class SamplingGrid:
    """Tensor grid over ``(Re xi, Im xi, omega_2..omega_d, eta)``."""

    re_xi: np.ndarray
    im_xi: np.ndarray
    omega: np.ndarray
    eta: np.ndarray

    @classmethod
    def default(cls, *, n_re=21, n_im=21, n_omega=9, n_eta=13,
                xi_range=(1e-2, 1e2), omega_max=1e2, eta_max=1e4):
        lo, hi = np.log10(xi_range[0]), np.log10(xi_range[1])
        re_xi = np.logspace(lo, hi, n_re)
        k = (n_im - 1) // 2
        mags = np.logspace(lo, hi, k) if k else np.zeros(0)
        im_xi = np.concatenate([-mags[::-1], [0.0], mags]) if n_im > 1 else np.zeros(1)
        k = (n_omega - 1) // 2
        om = np.logspace(-2, np.log10(omega_max), k) if k else np.zeros(0)
        omega = np.concatenate([-om[::-1], [0.0], om])
        eta = np.concatenate([[0.0], np.logspace(-2, np.log10(eta_max), n_eta - 1)])
        return cls(re_xi, im_xi, omega, eta)

    @classmethod
    def parse(cls, spec):
        """Parse ``"n_re,n_im,n_omega,n_eta"`` into a default-shaped grid."""
        parts = [int(s) for s in str(spec).split(",")]
        if len(parts) != 4 or min(parts) < 1:
            raise ValueError("grid spec must be four positive integers n_re,n_im,n_omega,n_eta")
        return cls.default(n_re=parts[0], n_im=parts[1], n_omega=parts[2], n_eta=parts[3])

    def points(self, d):
        omegas = list(product(self.omega, repeat=d - 1)) if d > 1 else [()]
        for rx, ix, om, et in product(self.re_xi, self.im_xi, omegas, self.eta):
            yield FrequencyPoint(complex(rx, ix), om, et)

    def xi_omega_points(self, d):
        omegas = list(product(self.omega, repeat=d - 1)) if d > 1 else [()]
        for rx, ix, om in product(self.re_xi, self.im_xi, omegas):
            yield complex(rx, ix), om

    def bounds(self, d):
        return dict(re=(self.re_xi.min(), self.re_xi.max()),
                    im=(self.im_xi.min(), self.im_xi.max()),
                    omega=(self.omega.min(), self.omega.max()),
                    eta=(self.eta.min(), self.eta.max()))


@dataclass
class GkcReport:
    sampled_points: list = field(default_factory=list)
    ratios: list = field(default_factory=list)
    raw_ratios: list = field(default_factory=list)
    min_ratio: float = np.inf
    argmin_point: FrequencyPoint = None
    skipped: int = 0
    threshold: float = GKC_THRESHOLD
    scale: float = 1.0
    refined: bool = False

    @property
    def passed(self):
        return bool(self.min_ratio > self.threshold)

    @property
    def status(self):
        return "PASS" if self.passed else "FAILED"

    def format(self):
        fp = self.argmin_point
        where = ("n/a" if fp is None else
                 f"xi={fp.xi.real:.6g}{fp.xi.imag:+.6g}i omega={list(fp.omega)} eta={fp.eta:.6g}")
        return "\n".join([
            f"points sampled      {len(self.sampled_points)}",
            f"points skipped      {self.skipped}",
            f"sqrt(det(B B*))     {self.scale:.12g}",
            f"min ratio (scaled)  {self.min_ratio:.12g}",
            f"min ratio (raw)     {self.min_ratio * self.scale:.12g}",
            f"argmin              {where}",
            f"refined             {self.refined}",
            f"threshold           {self.threshold:g}",
            f"GKC {self.status}",
        ])

    def csv_rows(self):
        for fp, r, rr in zip(self.sampled_points, self.ratios, self.raw_ratios):
            yield fp.row() + [rr, r]


def certify_gkc(norm, B=None, grid=None, *, threshold=GKC_THRESHOLD, refine=True):
    """Sample the GKC ratio over a frequency grid.

    Ratios are reported both raw and divided by ``sqrt(det(B B*))`` so that
    the minimum is invariant under rescaling of the boundary rows; the
    report's ``min_ratio`` is the scaled one. Points whose stable/unstable
    split is ambiguous are skipped and counted.
    """
    B = norm.B if B is None else np.asarray(B)
    grid = SamplingGrid.default() if grid is None else grid
    scale = boundary_scale(B)
    rep = GkcReport(threshold=threshold, scale=scale)
    if scale == 0.0:
        rep.min_ratio = 0.0
        return rep
    best = (np.inf, None)
    for fp in grid.points(norm.d):
        try:
            raw = gkc_ratio(norm, B, fp)
        except SplitAmbiguous:
            rep.skipped += 1
            continue
        rep.sampled_points.append(fp)
        rep.raw_ratios.append(raw)
        rep.ratios.append(raw / scale)
        if raw / scale < best[0]:
            best = (raw / scale, fp)
    rep.min_ratio, rep.argmin_point = best
    if refine and best[1] is not None and best[0] > 0:
        val, fp = _refine(norm, B, best[1], grid, scale)
        if val < rep.min_ratio:
            rep.min_ratio, rep.argmin_point = val, fp
        rep.refined = True
    return rep


def _refine(norm, B, fp0, grid, scale):
    """Nelder-Mead polish of the grid minimum, clipped to the grid box."""
    bd = grid.bounds(norm.d)
    eta_lo = max(bd["eta"][0], 0.0)
    k = len(fp0.omega)

    def unpack(z):
        rx = 10 ** np.clip(z[0], np.log10(bd["re"][0]), np.log10(bd["re"][1]))
        ix = np.clip(z[1], *bd["im"])
        om = tuple(np.clip(z[2:2 + k], *bd["omega"]))
        et = np.clip(z[2 + k], eta_lo, bd["eta"][1])
        return FrequencyPoint(complex(rx, ix), om, et)

    def f(z):
        try:
            return gkc_ratio(norm, B, unpack(z)) / scale
        except (SplitAmbiguous, InertiaMismatch):
            return np.inf

    z0 = np.array([np.log10(fp0.xi.real), fp0.xi.imag, *fp0.omega, fp0.eta])
    res = minimize(f, z0, method="Nelder-Mead",
                   options=dict(xatol=1e-8, fatol=1e-12, maxiter=400))
    fp = unpack(res.x)
    return f(res.x), fp


def limit_stable_basis(norm, sig, la_, xi, omega=None):
    """Basis of the stable subspace of the frequency matrix as ``eta -> inf``.

    Returns an ``n x n_plus`` complex matrix with block columns for the
    incoming equilibrium modes, the zero-speed modes and the fast layer.
    """
    M1, _ = limit_blocks(norm, sig, la_, xi, omega)
    sub = la.stable_invariant_subspace(M1)
    if sub.dim != sig.n1_plus:
        raise InertiaMismatch(f"M1 has {sub.dim} stable eigenvalues, expected {sig.n1_plus}")
    R11 = sub.basis
    C = tangential_C(norm, omega if omega is not None else np.zeros(norm.d - 1))
    P1, P0 = la_.P1, la_.P0
    p = P0.shape[1]
    X00 = complex(xi) * np.eye(p) + P0.T @ C @ P0
    top1 = (P1 - P0 @ np.linalg.solve(X00, P0.T @ C @ P1)) @ R11
    R2 = la_.R2S
    m, r = norm.m, norm.r
    k = R2.shape[1]
    out = np.zeros((m + r, sig.n1_plus + p + k), complex)
    out[:m, :sig.n1_plus] = top1
    out[:m, sig.n1_plus:sig.n1_plus + p] = P0
    out[:m, sig.n1_plus + p:] = la_.N @ R2
    out[m:, sig.n1_plus + p:] = la_.Ktilde @ R2
    return out


def ukc_ratio(norm, sig, la_, B_o, xi, omega=None):
    """UKC ratio ``|det(B_o B_u P1 R11)| / sqrt(det(R11* R11))``."""
    M1, _ = limit_blocks(norm, sig, la_, xi, omega)
    sub = la.stable_invariant_subspace(M1)
    if sub.dim != sig.n1_plus:
        raise InertiaMismatch(f"M1 has {sub.dim} stable eigenvalues, expected {sig.n1_plus}")
    return det_ratio(np.asarray(B_o) @ norm.B_u @ la_.P1, sub.basis)


def sample_ukc(norm, sig, la_, B_o, grid=None):
    """Minimum UKC ratio over the ``(xi, omega)`` part of a grid."""
    grid = SamplingGrid.default() if grid is None else grid
    best, arg, skipped = np.inf, None, 0
    for xi, om in grid.xi_omega_points(norm.d):
        try:
            v = ukc_ratio(norm, sig, la_, B_o, xi, om)
        except SplitAmbiguous:
            skipped += 1
            continue
        if v < best:
            best, arg = v, (xi, om)
    return best, arg, skipped
