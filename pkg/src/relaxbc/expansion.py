"""Three-scale boundary-layer expansion and the convergence study.

The approximate solution is assembled from

* the equilibrium field ``ubar`` (upwind solve with the reduced boundary
  condition),
* the fast layer ``w(t, y)``, ``y = x1 / eps``, an exponential profile of
  the stable part of ``M4`` with trace from the boundary algebra,
* the parabolic layer ``m = P0^T mu1`` in ``z = x1 / sqrt(eps)`` solved by
  Crank-Nicolson,
* the correctors ``nu2`` and ``P1^T mu2`` (gauge ``P0^T mu2 = 0``),

in that order, and compared with the full relaxation solution on the same
space-time grid.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid, trapezoid
from scipy.linalg import solve_banded

from . import linalg as la
from .errors import BoundarySolveSingular, UnstableStep
from .reduced import solve_boundary_traces
from .relaxation import FieldHistory, TimeGrid, solve_relaxation
from .transport import Upwind, sign_split, stable_dt

LAYER_SOURCES = ("coupled", "zero")


def _spacing(xhat):
    if xhat is None:
        return []
    return [float(xhat[1] - xhat[0]) if len(xhat) > 1 else np.inf]


def _bcast(v, ndim):
    return v.reshape((-1,) + (1,) * (ndim - 1))


# equilibrium field

def solve_equilibrium(norm, sig, rb, b, u0, x, tg, xhat=None, *, neighbours=False):
    """Upwind solve of the equilibrium system with the reduced boundary condition.

    At the wall the incoming characteristic variables solve
    ``B_o B_u P1U aU = B_o b - B_o B_u (P1S aS + P0 a0)``; outgoing and
    zero-speed variables receive no boundary data.

    Returns
    -------
    FieldHistory
        With ``wall`` holding the trace ``ubar(t_k, 0)`` at every step.

    Raises
    ------
    CflViolation, BoundarySolveSingular
    """
    spacing = _spacing(xhat)
    coeffs = [norm.A11(j) for j in range(1 + len(spacing))]
    op = Upwind(coeffs, x, spacing)
    op.check_cfl(tg.dt)
    P1U, P1S, P0 = rb.P1U, rb.P1S, rb.P0
    Mi = rb.incoming_matrix
    if Mi.size and la.smallest_singular_value(Mi) <= 1e-12 * max(1.0, la.norm(Mi)):
        raise BoundarySolveSingular("B_o B_u P1U is singular")
    BoBu = rb.B_o @ rb.B_u
    U = np.array(u0(x, xhat), dtype=float)
    record = tg.record_steps(neighbours)
    states = {0: U.copy()} if 0 in record else {}
    wall = np.empty((tg.n_steps + 1,) + U.shape[1:])
    wall[0] = U[0]
    for k in range(tg.n_steps):
        t1 = (k + 1) * tg.dt
        op.sweep_normal(U, tg.dt)
        op.sweep_tangential(U, tg.dt)
        if Mi.size:
            w0 = U[0]
            aS, a0 = w0 @ P1S, w0 @ P0
            rest = aS @ P1S.T + a0 @ P0.T
            rhs = np.asarray(b(t1, xhat)) @ rb.B_o.T - rest @ BoBu.T
            aU = np.linalg.solve(Mi, rhs.T).T if rhs.ndim > 1 else np.linalg.solve(Mi, rhs)
            U[0] = aU @ P1U.T + rest
        wall[k + 1] = U[0]
        if k + 1 in record:
            states[k + 1] = U.copy()
    return FieldHistory(x=np.asarray(x), xhat=xhat, tg=tg, states=states, wall=wall)


def boundary_trace_history(rb, b, wall, tg, xhat=None):
    """``(mu1_trace, wS)`` at every time step from the equilibrium trace."""
    bt = np.stack([np.asarray(b(k * tg.dt, xhat), dtype=float)
                   for k in range(tg.n_steps + 1)])
    return solve_boundary_traces(rb, bt, wall)


# fast layer

def fast_layer_profile(la_, wS, y):
    """``w(y) = R2S exp(y M4S) wS`` for each ``y``; shape ``(len(y), [nh,] q)``."""
    y = np.asarray(y, dtype=float)
    q = la_.Ktilde.shape[1]
    wS = np.asarray(wS, dtype=float)
    k = la_.R2S.shape[1]
    if k == 0:
        return np.zeros((y.size,) + wS.shape[:-1] + (q,))
    E = la.propagator_stack(la_.M4S, y).real  # (ny, k, k)
    R = np.real(la_.R2S)
    if wS.ndim == 1:
        return np.einsum("qk,ykl,l->yq", R, E, wS)
    return np.einsum("qk,ykl,hl->yhq", R, E, wS)


def fast_layer_rate(la_):
    """Slowest decay rate ``min |Re lambda|`` of the stable part of ``M4``."""
    if la_.M4S.size == 0:
        return np.inf
    return float(np.min(np.abs(np.linalg.eigvals(la_.M4S).real)))


def solve_eps_layer(la_, wS, y):
    """Fast-layer fields ``(w, mu0, nu0)`` on the ``y`` grid for one time."""
    w = fast_layer_profile(la_, wS, y)
    return w, w @ la_.N.T, w @ la_.Ktilde.T


# parabolic layer source

class CoupledSource:
    """Source ``P0^T G`` and the tail integrals of ``P1^T G`` from the fast layer.

    ``G = -[mu0_t + sum_j (A_j11 mu0_xj + A_j12 nu0_xj)]`` with
    ``mu0 = N w``, ``nu0 = Kt w`` evaluated at ``y = z / sqrt(eps)``. Cell
    averages of ``exp(y M4S)`` over each ``z`` cell are exact, so the thin
    fast layer need not be resolved by the ``z`` grid.
    """

    def __init__(self, norm, la_, eps, z, wS_hist, tg, xhat=None):
        self.se = np.sqrt(eps)
        M = la_.M4S
        k = M.shape[0]
        self.k = k
        R = np.real(la_.R2S)
        self.active = k > 0
        if not self.active:
            return
        Minv = np.linalg.inv(M)
        dz = z[1] - z[0]
        lo = np.clip(z - 0.5 * dz, 0.0, None)
        hi = z + 0.5 * dz
        Ehi = la.propagator_stack(M, hi / self.se).real
        Elo = la.propagator_stack(M, lo / self.se).real
        self.Ebar = self.se * np.einsum("ij,zjk->zik", Minv, Ehi - Elo) / (hi - lo)[:, None, None]
        Ez = la.propagator_stack(M, z / self.se).real
        self.Etail = -self.se * np.einsum("ij,zjk->zik", Minv, Ez)
        P0, P1 = la_.P0, la_.P1
        self.Ct = -(la_.N @ R)  # multiplies d/dt wS
        self.Cj = [-(norm.A11(j) @ la_.N + norm.A12(j) @ la_.Ktilde) @ R
                   for j in range(1, 1 + len(_spacing(xhat)))]
        self.P0, self.P1 = P0, P1
        self.dwdt = np.gradient(wS_hist, tg.dt, axis=0) if tg.n_steps else np.zeros_like(wS_hist)
        self.wS = wS_hist
        self.h = _spacing(xhat)
        self.zero_all = (la.norm(self.Ct) == 0 and all(la.norm(c) == 0 for c in self.Cj))

    def _dwdx(self, k):
        if not self.h:
            return []
        w = self.wS[k]
        return [(np.roll(w, -1, axis=0) - np.roll(w, 1, axis=0)) / (2 * self.h[0])]

    def _terms(self, k):
        terms = [(self.Ct, self.dwdt[k])]
        terms += list(zip(self.Cj, self._dwdx(k)))
        return terms

    def p0_source(self, k):
        """``P0^T G`` at step ``k`` on the ``z`` nodes; ``(nz+1, [nh,] p)``."""
        out = 0.0
        for C, v in self._terms(k):
            Cp = self.P0.T @ C
            if v.ndim == 1:
                out = out + np.einsum("pk,zkl,l->zp", Cp, self.Ebar, v)
            else:
                out = out + np.einsum("pk,zkl,hl->zhp", Cp, self.Ebar, v)
        return out

    def p1_tail(self, k):
        """``int_z^inf P1^T G`` at step ``k``; ``(nz+1, [nh,] m1)``."""
        out = 0.0
        for C, v in self._terms(k):
            Cp = self.P1.T @ C
            if v.ndim == 1:
                out = out + np.einsum("pk,zkl,l->zp", Cp, self.Etail, v)
            else:
                out = out + np.einsum("pk,zkl,hl->zhp", Cp, self.Etail, v)
        return out


@dataclass
class HeatLayer:
    z: np.ndarray
    fields: dict
    V: np.ndarray
    kappa: np.ndarray


def solve_sqrt_layer(norm, sig, la_, tg, mu1_trace, z, xhat=None, source=None, *,
                     neighbours=False, startup=2, steps=None):
    """Crank-Nicolson solve of the parabolic layer for ``m = P0^T mu1``.

    ``m_t + D m_zz + sum_j E_j m_xj = P0^T G`` with ``D = K^T S^{-1} K``
    negative definite, Dirichlet trace ``mu1_trace`` at ``z = 0``,
    homogeneous Dirichlet at ``z_max`` and zero initial data. The diffusion
    is decoupled by the eigenvectors of ``-D``; the first ``startup`` steps
    are each replaced by two backward-Euler half steps to damp the start-up
    transient of a switched-on trace. Tangential transport, if any, is an
    explicit upwind split step.

    Raises
    ------
    UnstableStep
        If the tangential Courant number exceeds one.
    """
    z = np.asarray(z, dtype=float)
    nz = z.size - 1
    dz = z[1] - z[0]
    kappa, V = np.linalg.eigh(-la_.D_par)
    p = kappa.size
    spacing = _spacing(xhat)
    E = [la_.P0.T @ norm.A11(j) @ la_.P0 for j in range(1, 1 + len(spacing))]
    F = [V.T @ Ej @ V for Ej in E]
    op = None
    if F and any(la.norm(f) > 0 for f in F):
        op = Upwind([np.zeros((p, p))] + F, z, spacing)
        nu = max(float(np.abs(np.linalg.eigvalsh(f)).max()) * tg.dt / h
                 for f, h in zip(F, spacing))
        if nu > 1:
            raise UnstableStep(f"tangential Courant number {nu:.3f} in the parabolic layer")
    trace = np.asarray(mu1_trace, dtype=float) @ V
    shape = (nz + 1,) + trace.shape[1:]
    c = np.zeros(shape)
    record = tg.record_steps(neighbours) if steps is None else set(steps)
    fields = {0: c @ V.T} if 0 in record else {}
    N = nz - 1
    cache = {}

    def lhs(i, dt, theta):
        key = (i, round(dt / tg.dt, 12), theta)
        if key not in cache:
            r = theta * dt * kappa[i] / dz ** 2
            ab = np.zeros((3, N))
            ab[0, 1:] = -r
            ab[1, :] = 1 + 2 * r
            ab[2, :-1] = -r
            cache[key] = ab
        return cache[key]

    def src(k):
        if source is None or not source.active or source.zero_all:
            return None
        return source.p0_source(k) @ V

    def step(c, dt, theta, g_old, g_new, s_old, s_new):
        new = np.empty_like(c)
        new[0] = g_new
        new[-1] = 0.0
        for i in range(p):
            ci = c[..., i]
            lap = (ci[:-2] - 2 * ci[1:-1] + ci[2:]) / dz ** 2
            rhs = ci[1:-1] + (1 - theta) * dt * kappa[i] * lap
            rhs[0] = rhs[0] + theta * dt * kappa[i] * g_new[..., i] / dz ** 2
            if s_old is not None:
                rhs = rhs + dt * ((1 - theta) * s_old[1:-1, ..., i] + theta * s_new[1:-1, ..., i])
            new[1:-1, ..., i] = solve_banded((1, 1), lhs(i, dt, theta), rhs)
        if op is not None:
            op.sweep_tangential(new, dt)
            new[0] = g_new
            new[-1] = 0.0
        return new

    s_prev = src(0)
    for k in range(tg.n_steps):
        s_next = src(k + 1)
        if k < startup:
            g_mid = 0.5 * (trace[k] + trace[k + 1])
            s_mid = None if s_prev is None else 0.5 * (s_prev + s_next)
            c = step(c, 0.5 * tg.dt, 1.0, trace[k], g_mid, s_mid, s_mid)
            c = step(c, 0.5 * tg.dt, 1.0, g_mid, trace[k + 1], s_next, s_next)
        else:
            c = step(c, tg.dt, 0.5, trace[k], trace[k + 1], s_prev, s_next)
        s_prev = s_next
        if k + 1 in record:
            fields[k + 1] = c @ V.T
    return HeatLayer(z=z, fields=fields, V=V, kappa=kappa)


def assemble_correctors(norm, sig, la_, m_field, z, xhat=None, tail_G=None):
    """Correctors ``(nu2, mu2)`` from one parabolic-layer snapshot.

    ``nu2 = S^{-1} K m_z`` and
    ``P1^T mu2 = -Lambda1^{-1} [P1^T A12 S^{-1} K m_z
    - sum_j P1^T A_j11 P0 int_z^inf m_xj + int_z^inf P1^T G]``, with
    ``P0^T mu2 = 0``. ``m_z`` uses second-order one-sided differences at
    the ends; tail integrals use the trapezoid rule from ``z_max``.
    """
    m_field = np.asarray(m_field, dtype=float)
    z = np.asarray(z, dtype=float)
    dm = np.gradient(m_field, z, axis=0, edge_order=2)
    S = norm.S
    SinvK = np.linalg.solve(S, la_.K)
    nu2 = dm @ SinvK.T
    P1 = la_.P1
    if P1.shape[1] == 0:
        return nu2, np.zeros(m_field.shape[:-1] + (norm.m,))
    inner = dm @ (P1.T @ norm.A12() @ SinvK).T
    spacing = _spacing(xhat)
    for j, h in zip(range(1, 1 + len(spacing)), spacing):
        dmx = (np.roll(m_field, -1, axis=1) - np.roll(m_field, 1, axis=1)) / (2 * h)
        rev = cumulative_trapezoid(dmx[::-1], -z[::-1], axis=0, initial=0.0)[::-1]
        inner = inner - rev @ (P1.T @ norm.A11(j) @ la_.P0).T
    if tail_G is not None:
        inner = inner + tail_G
    p1mu2 = -(inner / la_.lambda1)
    return nu2, p1mu2 @ P1.T


# composition

def _interp_uniform(z, F, zq):
    """Linear interpolation along axis 0 of ``F`` on uniform nodes ``z``; zero beyond."""
    dz = z[1] - z[0]
    s = zq / dz
    i = np.clip(np.floor(s).astype(int), 0, z.size - 2)
    f = (s - i)
    f = _bcast(f, F.ndim)
    out = (1 - f) * F[i] + f * F[i + 1]
    out[zq > z[-1]] = 0.0
    return out


@dataclass
class ExpansionFields:
    """All coefficient fields for one ``eps`` on one space-time grid."""

    eps: float
    x: np.ndarray
    xhat: np.ndarray
    tg: TimeGrid
    ubar: FieldHistory
    mu1_trace: np.ndarray
    wS: np.ndarray
    z: np.ndarray
    heat: HeatLayer
    correctors: dict
    y: np.ndarray
    la_: object = None
    norm: object = None
    layer_source: str = "coupled"
    info: dict = field(default_factory=dict)

    def w_field(self, step):
        """Fast layer on the ``y`` grid at a step; ``(ny+1, [nh,] q)``."""
        return fast_layer_profile(self.la_, self.wS[step], self.y)

    def compose(self, step):
        """Composite approximation on the physical grid at a recorded step."""
        norm, la_ = self.norm, self.la_
        m, eps = norm.m, self.eps
        ub = self.ubar.at(step)
        U = np.zeros(ub.shape[:-1] + (norm.n,))
        U[..., :m] = ub
        if la_.R2S.shape[1]:
            y = self.x / eps
            ymax = self.y[-1]
            w = np.zeros(ub.shape[:-1] + (la_.Ktilde.shape[1],))
            inside = y <= ymax
            w[inside] = fast_layer_profile(la_, self.wS[step], y[inside])
            U[..., :m] += w @ la_.N.T
            U[..., m:] += w @ la_.Ktilde.T
        zq = self.x / np.sqrt(eps)
        mf = self.heat.fields[step]
        nu2, mu2 = self.correctors[step]
        U[..., :m] += _interp_uniform(self.z, mf, zq) @ la_.P0.T
        se = np.sqrt(eps)
        U[..., :m] += se * _interp_uniform(self.z, mu2, zq)
        U[..., m:] += se * _interp_uniform(self.z, nu2, zq)
        return U

    def decay_report(self):
        """Relative size of each layer at its truncation length (max over slices)."""
        out = {"w": 0.0, "mu1": 0.0}
        for k in self.tg.slice_steps:
            w = self.w_field(k)
            if w.size:
                scale = max(np.abs(w).max(), 1e-300)
                out["w"] = max(out["w"], float(np.abs(w[-1]).max() / scale))
            mf = self.heat.fields[k]
            scale = max(np.abs(mf).max(), 1e-300)
            out["mu1"] = max(out["mu1"], float(np.abs(mf[-1]).max() / scale))
        return out


def build_expansion(norm, sig, la_, rb, b, u0, eps, x, tg, xhat=None, grid=None, *,
                    layer_source="coupled", neighbours=False):
    """Compute every expansion coefficient in dependency order."""
    if layer_source not in LAYER_SOURCES:
        raise ValueError(f"layer_source must be one of {LAYER_SOURCES}")
    from .grid import GridSpec
    grid = GridSpec() if grid is None else grid
    ubar = solve_equilibrium(norm, sig, rb, b, u0, x, tg, xhat, neighbours=neighbours)
    mu1_tr, wS = boundary_trace_history(rb, b, ubar.wall, tg, xhat)
    D_norm = float(np.linalg.norm(la_.D_par, 2))
    z = np.linspace(0.0, grid.z_extent(D_norm), grid.nz + 1)
    y = np.linspace(0.0, grid.y_extent(fast_layer_rate(la_)), grid.ny + 1)
    src = None
    if layer_source == "coupled":
        src = CoupledSource(norm, la_, eps, z, wS, tg, xhat)
    heat = solve_sqrt_layer(norm, sig, la_, tg, mu1_tr, z, xhat, src, neighbours=neighbours)
    corr = {}
    for k, mf in heat.fields.items():
        tail = None
        if src is not None and src.active and not src.zero_all and la_.P1.shape[1]:
            tail = src.p1_tail(k)
        corr[k] = assemble_correctors(norm, sig, la_, mf, z, xhat, tail)
    return ExpansionFields(eps=eps, x=np.asarray(x), xhat=xhat, tg=tg, ubar=ubar,
                           mu1_trace=mu1_tr, wS=wS, z=z, heat=heat, correctors=corr,
                           y=y, la_=la_, norm=norm, layer_source=layer_source)


def compose_Ueps(fields, step):
    return fields.compose(step)


# error norms

def l2_norm(U, x, xhat=None):
    """Composite trapezoid ``L2`` norm over ``x1`` (rectangle rule in periodic ``xhat``)."""
    sq = np.sum(np.abs(U) ** 2, axis=-1)
    if xhat is not None:
        h = xhat[1] - xhat[0] if len(xhat) > 1 else 1.0
        sq = sq.sum(axis=1) * h
    return float(np.sqrt(trapezoid(sq, x)))


def compute_residual(norm, fields, *, steps=None):
    """Residual of the composite in the relaxation operator at stored slices.

    Central differences in time (one-sided at the last slice) and
    second-order differences on the graded ``x1`` grid; periodic central
    differences in ``xhat``.

    Returns
    -------
    dict
        ``first`` and ``second``: lists of ``L2`` norms of the first
        ``n - r`` and last ``r`` rows per slice; ``times``.
    """
    tg = fields.tg
    eps = fields.eps
    m = norm.m
    x, xhat = fields.x, fields.xhat
    steps = [k for k in tg.slice_steps if k > 0] if steps is None else steps
    Q = norm.Q
    first, second, times = [], [], []
    for k in steps:
        kp = k + 1 if (k + 1) in fields.heat.fields else k
        km = k - 1
        Uk = fields.compose(k)
        Ut = (fields.compose(kp) - fields.compose(km)) / ((kp - km) * tg.dt)
        R = Ut + np.gradient(Uk, x, axis=0, edge_order=2) @ norm.A[0].T
        for j, h in zip(range(1, 1 + len(_spacing(xhat))), _spacing(xhat)):
            R += ((np.roll(Uk, -1, axis=1) - np.roll(Uk, 1, axis=1)) / (2 * h)) @ norm.A[j].T
        R -= (Uk @ Q.T) / eps
        first.append(l2_norm(R[..., :m], x, xhat))
        second.append(l2_norm(R[..., m:], x, xhat))
        times.append(k * tg.dt)
    return {"first": first, "second": second, "times": times}


# convergence study

@dataclass
class ConvergenceReport:
    entries: list = field(default_factory=list)  # (eps, err_tmax, err_sup)
    fitted_slope: float = float("nan")
    slope_range: tuple = (0.4, 0.6)
    residuals: list = field(default_factory=list)
    info: list = field(default_factory=list)

    @property
    def monotone(self):
        errs = [e[1] for e in self.entries]
        return all(a > b for a, b in zip(errs, errs[1:]))

    @property
    def slope_defined(self):
        return np.isfinite(self.fitted_slope)

    @property
    def passed(self):
        lo, hi = self.slope_range
        return bool(self.slope_defined and lo <= self.fitted_slope <= hi and self.monotone)

    def format(self):
        lines = [f"{'epsilon':>12s} {'L2 error t_max':>18s} {'sup_t L2 error':>18s}"]
        for e, a, s in self.entries:
            lines.append(f"{e:12.4e} {a:18.10e} {s:18.10e}")
        slope = f"{self.fitted_slope:.4f}" if self.slope_defined else "N/A"
        lines.append(f"fitted slope {slope}  monotone {self.monotone}  "
                     f"range [{self.slope_range[0]}, {self.slope_range[1]}]")
        lines.append("CONVERGENCE " + ("PASS" if self.passed else "FAIL"))
        return "\n".join(lines)

    def csv_rows(self):
        for e, a, s in self.entries:
            yield [e, a, s]


def fit_slope(eps, errs, floor=1e-12):
    eps, errs = np.asarray(eps, float), np.asarray(errs, float)
    if eps.size < 2 or np.any(errs <= floor) or not np.all(np.isfinite(errs)):
        return float("nan")
    return float(np.polyfit(np.log(eps), np.log(errs), 1)[0])


def run_single(norm, sig, la_, rb, b, u0, eps, grid, *, layer_source="coupled",
               residual=False, keep=False):
    """Full solve and expansion for one ``eps``; returns a result dict."""
    x = grid.x1_nodes(eps)
    xhat = grid.xhat_nodes()
    spacing = _spacing(xhat)
    dt = stable_dt(norm.A[:1 + len(spacing)], x, spacing, grid.cfl)
    tg = TimeGrid.build(grid.t_max, dt, grid.n_slices)
    U0 = np.zeros(x.shape + (() if xhat is None else (len(xhat),)) + (norm.n,))
    U0[..., :norm.m] = u0(x, xhat)
    full = solve_relaxation(norm, b, U0, eps, x, tg, xhat, neighbours=residual)
    exp = build_expansion(norm, sig, la_, rb, b, u0, eps, x, tg, xhat, grid,
                          layer_source=layer_source, neighbours=residual)
    errs = []
    for k in tg.slice_steps:
        errs.append(l2_norm(full.at(k) - exp.compose(k), x, xhat))
    out = {"eps": eps, "err_tmax": errs[-1], "err_sup": max(errs), "errors": errs,
           "nx": x.size, "n_steps": tg.n_steps, "dt": tg.dt}
    if residual:
        out["residual"] = compute_residual(norm, exp)
    if keep:
        out["full"], out["expansion"] = full, exp
    return out


def convergence_study(norm, sig, la_, rb, b, u0, epsilons, grid, *,
                      layer_source="coupled", residual=False, slope_range=(0.4, 0.6),
                      progress=None):
    """Error of the composite against the full solution across an ``eps`` sweep."""
    rep = ConvergenceReport(slope_range=slope_range)
    for eps in sorted(epsilons, reverse=True):
        res = run_single(norm, sig, la_, rb, b, u0, eps, grid,
                         layer_source=layer_source, residual=residual)
        rep.entries.append((eps, res["err_tmax"], res["err_sup"]))
        rep.info.append({k: res[k] for k in ("nx", "n_steps", "dt")})
        if residual:
            rep.residuals.append(res["residual"])
        if progress is not None:
            progress(res)
    rep.fitted_slope = fit_slope([e[0] for e in rep.entries], [e[1] for e in rep.entries])
    return rep
