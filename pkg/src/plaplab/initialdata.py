"""Initial-datum generators, emphasizing integrable-but-barely profiles.

A finite grid cannot hold genuinely non-square-integrable data, so the
"L1 not L2" regime is emulated by tall spikes and capped power
singularities whose L2 norm is large relative to their L1 norm.  The
`truncate_initial` clamp realizes the canonical approximating sequence of
square-integrable data below a merely integrable datum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .mesh import Grid1D, GridFunction

__all__ = ["InitialSpec", "make_initial", "make_initial_for_path",
           "truncate_initial"]

_KINDS = ("sine", "spike", "power_singularity", "random_amplitude")


@dataclass(frozen=True)
class InitialSpec:
    """Declarative description of one initial datum.

    sine:               amplitude * sin(mode * pi * x / X)
    spike:              plateau of the given height and width centered at
                        `center` (default X/2), linear ramps of width `ramp`
                        down to zero on both sides
    power_singularity:  min(x^(-alpha), cap) with 0 < alpha < 1; cap defaults
                        to the value at the first interior node, h^(-alpha)
    random_amplitude:   A * base profile with A ~ Uniform(amp_lo, amp_hi)
                        drawn once from `seed` (per-path seeds fold the path
                        index in, modeling initial data measurable at time 0)
    """

    kind: str
    amplitude: float = 1.0
    mode: int = 1
    height: float = 1.0
    width: float = 0.1
    ramp: float = 0.02
    center: Optional[float] = None
    alpha: float = 0.5
    cap: Optional[float] = None
    seed: int = 0
    amp_lo: float = 0.5
    amp_hi: float = 1.5
    base: Optional["InitialSpec"] = None

    def __post_init__(self) -> None:
        if self.kind not in _KINDS:
            raise ValueError(f"unknown initial kind {self.kind!r}; choose from {_KINDS}")
        if self.kind == "spike":
            if not (self.width > 0.0 and self.ramp > 0.0):
                raise ValueError("spike needs positive width and ramp")
        if self.kind == "power_singularity":
            if not (0.0 < self.alpha < 1.0):
                raise ValueError(
                    f"alpha must lie in (0, 1) for an integrable tail, got {self.alpha}"
                )
            if self.cap is not None and not (self.cap > 0.0):
                raise ValueError("cap must be positive when given")
        if self.kind == "sine" and self.mode < 1:
            raise ValueError("sine mode must be a positive integer")
        if self.kind == "random_amplitude" and not (self.amp_lo <= self.amp_hi):
            raise ValueError("need amp_lo <= amp_hi")

    @property
    def is_random(self) -> bool:
        return self.kind == "random_amplitude"


def _profile(spec: InitialSpec, grid: Grid1D, x: np.ndarray) -> np.ndarray:
    X = grid.length
    if spec.kind == "sine":
        return spec.amplitude * np.sin(spec.mode * math.pi * x / X)
    if spec.kind == "spike":
        c = X / 2.0 if spec.center is None else spec.center
        # distance-based trapezoid: 1 on the plateau, linear on the ramps
        shoulder = spec.width / 2.0
        t = (shoulder + spec.ramp - np.abs(x - c)) / spec.ramp
        return spec.height * np.clip(t, 0.0, 1.0)
    if spec.kind == "power_singularity":
        cap = grid.h ** (-spec.alpha) if spec.cap is None else spec.cap
        return np.minimum(x ** (-spec.alpha), cap)
    raise AssertionError(spec.kind)


def _random_amplitude(spec: InitialSpec, realization: int) -> float:
    seq = np.random.SeedSequence(entropy=spec.seed, spawn_key=(0xDA7A, realization))
    return float(np.random.default_rng(seq).uniform(spec.amp_lo, spec.amp_hi))


def make_initial(spec: InitialSpec, grid: Grid1D,
                 realization: int = 0) -> GridFunction:
    """Sample the profile at the interior nodes.

    `realization` only matters for the random kind, whose amplitude is a
    deterministic function of (spec.seed, realization).
    """
    if spec.kind == "random_amplitude":
        base = spec.base or InitialSpec(kind="sine")
        amp = _random_amplitude(spec, realization)
        return GridFunction(grid, amp * _profile(base, grid, grid.interior_x))
    return GridFunction(grid, _profile(spec, grid, grid.interior_x))


def make_initial_for_path(spec: InitialSpec, grid: Grid1D,
                          path_index: int) -> GridFunction:
    """Per-path datum: the datum of Monte Carlo path `path_index`.

    Deterministic kinds ignore the index; the random kind draws its
    amplitude once per path, before any time stepping.
    """
    return make_initial(spec, grid, realization=path_index)


def truncate_initial(u0: GridFunction, n: float) -> GridFunction:
    """Nodewise clamp at level n: |result| <= |u0| and equality once n covers u0."""
    if not (n > 0.0):
        raise ValueError(f"truncation level must be positive, got {n}")
    return u0.with_values(np.clip(u0.values, -n, n))
