"""1-D Dirichlet mesh: grid functions, discrete p-Laplace flux and quadrature.

The domain (0, X) is split into ``n_cells`` uniform cells of width
h = X/n_cells.  Grid functions live on the interior nodes 1..n_cells-1
with homogeneous Dirichlet values at nodes 0 and n_cells.  Gradients live
on the n_cells edges; integration is the rectangle rule h * sum over
interior nodes, which keeps discrete summation by parts exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Grid1D",
    "GridFunction",
    "gradient",
    "p_flux",
    "p_flux_deriv",
    "p_laplacian",
    "integrate",
    "inner",
    "l1_norm",
    "l2_norm",
    "levelset_gradient_integral",
    "truncated_gradient_energy",
    "default_eps",
]


@dataclass(frozen=True)
class Grid1D:
    """Uniform mesh of (0, X) with nodes i*h, i = 0..n_cells."""

    n_cells: int
    length: float = 1.0

    def __post_init__(self) -> None:
        if self.n_cells < 2:
            raise ValueError("n_cells must be at least 2")
        if not (self.length > 0.0):
            raise ValueError("length must be positive")

    @property
    def h(self) -> float:
        return self.length / self.n_cells

    @property
    def n_interior(self) -> int:
        return self.n_cells - 1

    @property
    def interior_x(self) -> np.ndarray:
        return np.arange(1, self.n_cells) * self.h

    @property
    def node_x(self) -> np.ndarray:
        return np.arange(0, self.n_cells + 1) * self.h


@dataclass(frozen=True)
class GridFunction:
    """Real values on the interior nodes; boundary values identically zero."""

    grid: Grid1D
    values: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.grid.n_interior,):
            raise ValueError(
                f"expected {self.grid.n_interior} interior values, got {vals.shape}"
            )
        if not np.all(np.isfinite(vals)):
            raise ValueError("grid function values must be finite")
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def padded(self) -> np.ndarray:
        """Values on all nodes 0..n_cells including zero boundary."""
        out = np.zeros(self.grid.n_cells + 1)
        out[1:-1] = self.values
        return out

    def with_values(self, values: np.ndarray) -> "GridFunction":
        return GridFunction(self.grid, values)

    @staticmethod
    def zero(grid: Grid1D) -> "GridFunction":
        return GridFunction(grid, np.zeros(grid.n_interior))

    @staticmethod
    def from_profile(grid: Grid1D, f) -> "GridFunction":
        return GridFunction(grid, np.asarray(f(grid.interior_x), dtype=float))


def gradient(u: GridFunction) -> np.ndarray:
    """Edge difference quotients (u_{i+1} - u_i)/h, edges 0..n_cells-1."""
    return np.diff(u.padded()) / u.grid.h


def _flux_values(s: np.ndarray, p: float, eps: float) -> np.ndarray:
    if eps == 0.0:
        # sign(s)*|s|^(p-1) avoids 0**negative for 1 < p < 2
        return np.sign(s) * np.abs(s) ** (p - 1.0)
    return (s * s + eps * eps) ** ((p - 2.0) / 2.0) * s


def _check_flux_args(s, p: float, eps: float) -> None:
    if not (p > 1.0):
        raise ValueError(f"p must exceed 1, got {p}")
    if eps < 0.0:
        raise ValueError(f"eps must be nonnegative, got {eps}")
    if p < 2.0 and eps == 0.0 and np.any(np.asarray(s) == 0.0):
        raise ValueError(
            "singular configuration: p < 2 with eps = 0 at s = 0; "
            "use a positive regularization eps"
        )


def p_flux(s, p: float, eps: float = 0.0):
    """Regularized flux (s^2 + eps^2)^((p-2)/2) * s; |s|^(p-2) s for eps = 0."""
    _check_flux_args(s, p, eps)
    out = _flux_values(np.asarray(s, dtype=float), p, eps)
    return out if np.ndim(s) else float(out)


def p_flux_deriv(s, p: float, eps: float = 0.0):
    """Derivative of p_flux in s: (s^2+eps^2)^((p-4)/2) * ((p-1) s^2 + eps^2)."""
    _check_flux_args(s, p, eps)
    arr = np.asarray(s, dtype=float)
    if eps == 0.0:
        out = (p - 1.0) * np.abs(arr) ** (p - 2.0)
        out = np.where(arr == 0.0, 0.0 if p > 2.0 else (p - 1.0) * (p == 2.0), out)
    else:
        q = arr * arr + eps * eps
        out = q ** ((p - 4.0) / 2.0) * ((p - 1.0) * arr * arr + eps * eps)
    return out if np.ndim(s) else float(out)


def p_laplacian(u: GridFunction, p: float, eps: float = 0.0) -> GridFunction:
    """Discrete div(|du|^(p-2) du): node i gets (flux_i - flux_{i-1})/h."""
    g = gradient(u)
    _check_flux_args(g, p, eps)
    flux = _flux_values(g, p, eps)
    return u.with_values(np.diff(flux) / u.grid.h)


def integrate(u: GridFunction, f=None) -> float:
    """Rectangle rule h * sum_i f(u_i) over interior nodes (f defaults to identity)."""
    vals = u.values if f is None else np.asarray(f(u.values), dtype=float)
    return float(u.grid.h * np.sum(vals))


def inner(u: GridFunction, v: GridFunction) -> float:
    """Discrete L2 pairing h * sum_i u_i v_i."""
    return float(u.grid.h * np.dot(u.values, v.values))


def l1_norm(u: GridFunction) -> float:
    return float(u.grid.h * np.sum(np.abs(u.values)))


def l2_norm(u: GridFunction) -> float:
    return float(np.sqrt(u.grid.h * np.dot(u.values, u.values)))


def levelset_gradient_integral(
    u: GridFunction, p: float, lo: float, hi: float, eps: float = 0.0
) -> float:
    """h * sum over edges with lo < |ubar_e| < hi of |grad_e|^p.

    Band membership is decided by the edge-midpoint value
    ubar_e = (u_i + u_{i+1})/2; gradients live on edges, u on nodes.
    """
    if not (0.0 <= lo < hi):
        raise ValueError(f"need 0 <= lo < hi, got lo={lo}, hi={hi}")
    pad = u.padded()
    g = np.diff(pad) / u.grid.h
    mid = np.abs(pad[1:] + pad[:-1]) / 2.0
    mask = (mid > lo) & (mid < hi)
    if not np.any(mask):
        return 0.0
    return float(u.grid.h * np.sum(np.abs(g[mask]) ** p))


def truncated_gradient_energy(u: GridFunction, k: float, p: float) -> float:
    """h * sum over edges of |D_e(T_k u)|^p: truncate nodewise, then difference."""
    if not (k > 0.0):
        raise ValueError(f"k must be positive, got {k}")
    pad = np.clip(u.padded(), -k, k)
    g = np.diff(pad) / u.grid.h
    return float(u.grid.h * np.sum(np.abs(g) ** p))


def default_eps(p: float, gradient_scale: float = 1.0) -> float:
    """Regularization default: 0 for p >= 2, 1e-6 * gradient scale for p < 2."""
    if p >= 2.0:
        return 0.0
    return 1e-6 * max(gradient_scale, 1.0)
