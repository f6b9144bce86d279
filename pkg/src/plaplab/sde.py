"""Brownian paths and the semi-implicit Euler-Maruyama evolution.

One step applies the noise increment explicitly and the p-Laplace
diffusion implicitly (Lie splitting):

    g^j     = u^j + phi(t_j, u^j) * dbeta_j        (nodewise; dbeta scalar)
    u^{j+1} = resolvent of the backward-Euler diffusion applied to g^j

The explicit left-endpoint evaluation of phi matches the Ito integral;
putting the monotone implicit step last preserves the L1
non-expansiveness of the deterministic half exactly, which is what the
coupled contraction estimates rely on.  The driving Brownian motion is a
single real-valued process: one scalar increment per step multiplies
phi(u) at every node.

Increments are reproducible: path (master_seed, path_index) draws from
numpy's PCG64 seeded with SeedSequence(master_seed, spawn_key=(path_index,)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .mesh import Grid1D, GridFunction
from .noise import NoiseModel
from .plap_step import DEFAULT_OPTIONS, SolverFailure, SolverOptions, solve_values

__all__ = ["BrownianPath", "Trajectory", "sample_brownian", "evolve",
           "evolve_coupled", "ito_integral"]


@dataclass(frozen=True)
class BrownianPath:
    """Increments dbeta_j ~ N(0, dt), j = 0..J-1, plus seed provenance."""

    dt: float
    increments: np.ndarray = field(repr=False)
    master_seed: int = 0
    path_index: int = 0

    def __post_init__(self) -> None:
        inc = np.asarray(self.increments, dtype=float)
        if inc.ndim != 1 or inc.size < 1:
            raise ValueError("increments must be a nonempty 1-d array")
        inc = inc.copy()
        inc.setflags(write=False)
        object.__setattr__(self, "increments", inc)

    @property
    def n_steps(self) -> int:
        return self.increments.size

    def truncated(self, n_steps: int) -> "BrownianPath":
        """The same path restricted to its first n_steps increments."""
        return BrownianPath(self.dt, self.increments[:n_steps],
                            self.master_seed, self.path_index)


def sample_brownian(master_seed: int, path_index: int, n_steps: int,
                    dt: float) -> BrownianPath:
    """Deterministic function of (master_seed, path_index)."""
    if n_steps < 1:
        raise ValueError("n_steps must be at least 1")
    if not (dt > 0.0):
        raise ValueError("dt must be positive")
    seq = np.random.SeedSequence(entropy=master_seed, spawn_key=(path_index,))
    rng = np.random.default_rng(seq)
    return BrownianPath(dt=dt, increments=rng.standard_normal(n_steps) * math.sqrt(dt),
                        master_seed=master_seed, path_index=path_index)


@dataclass(frozen=True)
class Trajectory:
    """States u^0..u^J on one grid together with the path that produced them."""

    grid: Grid1D
    values: np.ndarray = field(repr=False)  # shape (J+1, n_interior)
    path: BrownianPath

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 2 or vals.shape[0] != self.path.n_steps + 1 \
                or vals.shape[1] != self.grid.n_interior:
            raise ValueError(
                f"values shape {vals.shape} inconsistent with "
                f"{self.path.n_steps} steps on {self.grid.n_interior} nodes"
            )
        if not np.all(np.isfinite(vals)):
            raise ValueError("trajectory states must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def n_steps(self) -> int:
        return self.path.n_steps

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.path.dt

    def state(self, j: int) -> GridFunction:
        return GridFunction(self.grid, self.values[j])

    @property
    def final(self) -> GridFunction:
        return self.state(self.n_steps)


def _evolve_values(u0: np.ndarray, grid: Grid1D, noise: NoiseModel,
                   path: BrownianPath, p: float, eps: float,
                   opts: SolverOptions) -> np.ndarray:
    J = path.n_steps
    dt, h = path.dt, grid.h
    inc = path.increments
    out = np.empty((J + 1, u0.size))
    out[0] = u0
    u = u0.copy()
    for j in range(J):
        g = u + noise.phi(j * dt, u) * inc[j]
        try:
            u = solve_values(g, dt, h, p, eps, opts)
        except SolverFailure as err:
            raise SolverFailure(f"diffusion step {j} failed: {err}",
                                err.iterate, err.residual) from err
        out[j + 1] = u
    return out


def evolve(u0: GridFunction, noise: NoiseModel, path: BrownianPath,
           p: float, eps: float = 0.0,
           opts: SolverOptions = DEFAULT_OPTIONS) -> Trajectory:
    """Run the splitting scheme from u0 along the given Brownian path."""
    vals = _evolve_values(np.asarray(u0.values, dtype=float), u0.grid, noise,
                          path, p, eps, opts)
    return Trajectory(grid=u0.grid, values=vals, path=path)


def evolve_coupled(u0: GridFunction, v0: GridFunction, noise: NoiseModel,
                   path: BrownianPath, p: float, eps: float = 0.0,
                   opts: SolverOptions = DEFAULT_OPTIONS
                   ) -> tuple[Trajectory, Trajectory]:
    """Two solutions driven by the identical Brownian path (synchronous coupling)."""
    if u0.grid != v0.grid:
        raise ValueError("coupled initial data must share one grid")
    return (evolve(u0, noise, path, p, eps, opts),
            evolve(v0, noise, path, p, eps, opts))


def ito_integral(traj: Trajectory,
                 integrand: Callable[[GridFunction, float], float]) -> float:
    """Left-endpoint Ito sum  sum_j integrand(u^j, t_j) * dbeta_j."""
    dt = traj.path.dt
    inc = traj.path.increments
    total = 0.0
    comp = 0.0
    for j in range(traj.n_steps):
        term = float(integrand(traj.state(j), j * dt)) * inc[j]
        # Neumaier compensation keeps the sum order-independent of chunking
        s = total + term
        if abs(total) >= abs(term):
            comp += (total - s) + term
        else:
            comp += (term - s) + total
        total = s
    return total + comp
