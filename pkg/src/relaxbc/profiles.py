"""Named data profiles for initial and boundary data.

``u0(x1, xhat)`` returns equilibrium data in normalized coordinates with
shape ``(len(x1), [len(xhat),] n - r)``; ``b(t, xhat)`` returns boundary
data with shape ``([len(xhat),] n_plus)``. ``xhat`` is the 1-D tangential grid
in two dimensions and ``None`` in one.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import SchemaError

U0_KINDS = ("zero", "bump")
B_KINDS = ("zero", "sin2_ramp", "constant")


def bump(x, center, width):
    """Smooth compactly supported bump ``exp(1 - 1/(1 - s^2))`` with peak 1."""
    s = (np.asarray(x, dtype=float) - center) / width
    out = np.zeros_like(s)
    inside = np.abs(s) < 1
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - s[inside] ** 2))
    return out


def sin2_ramp(t, rise):
    """``sin^2(pi t / (2 rise))`` up to ``t = rise`` and 1 afterwards."""
    tt = np.clip(np.asarray(t, dtype=float), 0.0, rise)
    return np.sin(0.5 * np.pi * tt / rise) ** 2


def tangential_factor(xhat, modes, period):
    """``1 + 0.5 cos(2 pi k xhat / period)``; 1 when no mode is set."""
    if xhat is None:
        return None
    xhat = np.asarray(xhat, dtype=float)
    f = np.ones_like(xhat)
    for k in modes:
        f = f + 0.5 * np.cos(2 * np.pi * k * xhat / period)
    return f


@dataclass
class DataSpec:
    """Parameters of the initial and boundary data.

    ``b = compatible_part + b_vector * g(t)`` where the compatible part is
    ``B_u u0(0, xhat)`` when ``b_add_trace`` is set, so that ``b(0)``
    matches the initial trace whenever ``g(0) = 0``.
    """

    u0_kind: str = "zero"
    u0_vector: list = field(default_factory=list)
    u0_center: float = 0.5
    u0_width: float = 0.25
    b_kind: str = "zero"
    b_vector: list = field(default_factory=list)
    b_rise: float = 0.25
    b_add_trace: bool = True
    tangential_modes: list = field(default_factory=list)
    tangential_period: float = 1.0

    def validate(self, m, n_plus):
        errs = []
        if self.u0_kind not in U0_KINDS:
            errs.append(f"data.u0: unknown profile {self.u0_kind!r}")
        if self.b_kind not in B_KINDS:
            errs.append(f"data.b: unknown profile {self.b_kind!r}")
        if self.u0_kind != "zero" and len(self.u0_vector) != m:
            errs.append(f"data.u0_vector: length {len(self.u0_vector)}, expected n - r = {m}")
        if self.b_kind != "zero" and len(self.b_vector) != n_plus:
            errs.append(f"data.b_vector: length {len(self.b_vector)}, expected n_plus = {n_plus}")
        if self.u0_width <= 0:
            errs.append("data.u0_width: must be positive")
        if self.b_rise <= 0:
            errs.append("data.b_rise: must be positive")
        return errs

    def make(self, B_u):
        """Return the callables ``(u0, b)`` for a boundary block ``B_u``."""
        B_u = np.asarray(B_u, dtype=float)
        m = B_u.shape[1]
        n_plus = B_u.shape[0]
        uvec = np.asarray(self.u0_vector if self.u0_kind != "zero" else np.zeros(m), float)
        bvec = np.asarray(self.b_vector if self.b_kind != "zero" else np.zeros(n_plus), float)
        kind_u, kind_b = self.u0_kind, self.b_kind
        c, w, rise = self.u0_center, self.u0_width, self.b_rise
        modes, period = list(self.tangential_modes), self.tangential_period

        def u0(x1, xhat=None):
            x1 = np.atleast_1d(np.asarray(x1, dtype=float))
            prof = bump(x1, c, w) if kind_u == "bump" else np.zeros_like(x1)
            f = tangential_factor(xhat, modes, period)
            if f is None:
                return prof[:, None] * uvec
            return prof[:, None, None] * f[None, :, None] * uvec

        def g(t):
            if kind_b == "sin2_ramp":
                return sin2_ramp(t, rise)
            if kind_b == "constant":
                return 1.0
            return 0.0

        add_trace = self.b_add_trace

        def b(t, xhat=None):
            f = tangential_factor(xhat, modes, period)
            val = g(t) * bvec if f is None else g(t) * f[:, None] * bvec
            if add_trace:
                val = val + u0(np.zeros(1), xhat)[0] @ B_u.T
            return val

        return u0, b


def check_kind(kind, allowed, name):
    if kind not in allowed:
        raise SchemaError(f"{name}: unknown profile {kind!r}; allowed {allowed}")
