"""Grids for the physical domain and the two boundary-layer domains."""

from dataclasses import dataclass, field

import numpy as np


@dataclass
class GridSpec:
    """Discretization parameters.

    The physical ``x1`` grid is graded: near the wall its spacing is
    ``eps / cells_per_eps`` out to ``fine_width * sqrt(eps * t_max)`` so that
    upwind numerical diffusion stays well below the physical ``O(eps)``
    diffusion inside the parabolic layer; it then grows geometrically by
    ``growth`` up to the outer spacing ``x1_max / nx``.

    Attributes
    ----------
    x1_max : float
    nx : int
        Number of outer cells (uniform spacing ``x1_max / nx``).
    xhat_extent, xhat_count : lists
        Periodic tangential extents and cell counts (``d - 1`` entries).
    t_max, cfl : float
    y_max, z_max : float
        Layer truncation lengths; nonpositive means derive automatically.
    ny, nz : int
    n_slices : int
        Number of stored time slices after ``t = 0``.
    """

    x1_max: float = 1.0
    nx: int = 2000
    xhat_extent: list = field(default_factory=list)
    xhat_count: list = field(default_factory=list)
    t_max: float = 0.5
    cfl: float = 0.9
    y_max: float = 0.0
    z_max: float = 0.0
    ny: int = 400
    nz: int = 2000
    n_slices: int = 10
    cells_per_eps: float = 20.0
    fine_width: float = 6.0
    growth: float = 1.02
    tol_layer: float = 1e-12

    def validate(self, d):
        errs = []
        if self.x1_max <= 0:
            errs.append("grid.x1_max: must be positive")
        if self.nx < 2:
            errs.append("grid.nx: must be at least 2")
        if not 0 < self.cfl < 1:
            errs.append("grid.cfl: must lie in (0, 1)")
        if self.t_max <= 0:
            errs.append("grid.t_max: must be positive")
        if len(self.xhat_extent) != d - 1 or len(self.xhat_count) != d - 1:
            errs.append(f"grid.xhat_extent/xhat_count: need {d - 1} entries each")
        if any(e <= 0 for e in self.xhat_extent) or any(c < 1 for c in self.xhat_count):
            errs.append("grid.xhat: extents must be positive and counts at least 1")
        if self.ny < 2 or self.nz < 2:
            errs.append("grid.ny/nz: must be at least 2")
        if self.n_slices < 1:
            errs.append("grid.n_slices: must be at least 1")
        if self.cells_per_eps <= 0 or self.fine_width < 0 or self.growth <= 1:
            errs.append("grid.cells_per_eps/fine_width/growth: out of range")
        if not 0 < self.tol_layer < 1:
            errs.append("grid.tol_layer: must lie in (0, 1)")
        return errs

    def x1_nodes(self, eps=None):
        """Nodes of the physical normal grid; graded when ``eps`` is given."""
        h_out = self.x1_max / self.nx
        if eps is None:
            return np.linspace(0.0, self.x1_max, self.nx + 1)
        h_in = eps / self.cells_per_eps
        if h_in >= h_out:
            return np.linspace(0.0, self.x1_max, self.nx + 1)
        x_fine = min(self.fine_width * np.sqrt(eps * self.t_max), self.x1_max)
        n_fine = int(np.ceil(x_fine / h_in))
        xs = list(np.arange(n_fine + 1) * h_in)
        h = h_in
        while xs[-1] < self.x1_max:
            h = min(h * self.growth, h_out)
            if h >= h_out:
                break
            xs.append(xs[-1] + h)
        x0 = xs[-1]
        if x0 < self.x1_max:
            n_rest = max(1, int(np.ceil((self.x1_max - x0) / h_out)))
            xs.extend(np.linspace(x0, self.x1_max, n_rest + 1)[1:])
        x = np.asarray(xs)
        x[-1] = self.x1_max if x[-1] > self.x1_max else x[-1]
        return x[x <= self.x1_max + 1e-15]

    def xhat_nodes(self):
        """Periodic tangential nodes (cell left ends) or ``None`` in 1-D."""
        if not self.xhat_extent:
            return None
        L, n = self.xhat_extent[0], self.xhat_count[0]
        return np.arange(n) * (L / n)

    def z_extent(self, D_norm):
        if self.z_max > 0:
            return self.z_max
        return max(6.0 * np.sqrt(self.t_max * max(D_norm, 1e-300)), 10.0)

    def y_extent(self, gamma):
        if self.y_max > 0:
            return self.y_max
        if gamma <= 0 or not np.isfinite(gamma):
            return 1.0
        return -np.log(self.tol_layer) / gamma

    def slice_times(self):
        return np.linspace(0.0, self.t_max, self.n_slices + 1)
