"""Multiplicative noise coefficients: Lipschitz in the state, zero at zero.

A model evaluates phi(t, lam) with a declared Lipschitz constant L and an
optional sup bound M.  The shipped kinds:

    bounded_trunc   L * clamp of lam at M/L      (Lipschitz L, bounded by M)
    linear          L * lam                      (unbounded; L = 0 gives the
                                                  zero map for deterministic
                                                  reference runs)
    sinusoidal      M * sin(L lam / M)           (Lipschitz L, bounded by M)
    time_modulated  c(t) * base model, |c| <= 1  (c = sin or cos)

Models depend only on (t, lam), deterministically; progressive
measurability is inherited from evaluating along adapted states.
`validate_noise` spot-checks the declared constants empirically and
reports violations with witness points instead of raising.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

__all__ = ["NoiseModel", "NoiseViolation", "NoiseValidationReport",
           "make_noise", "validate_noise"]

_KINDS = ("bounded_trunc", "linear", "sinusoidal", "time_modulated", "custom")
_MODULATIONS = {"sin": np.sin, "cos": np.cos}
_WITNESS_CAP = 16  # listed witnesses per assumption; counts are exact


@dataclass(frozen=True)
class NoiseModel:
    """phi(t, lam) with declared Lipschitz constant L and sup bound M (None if unbounded)."""

    kind: str
    L: float
    M: Optional[float] = None
    modulation: Optional[str] = None
    base_kind: Optional[str] = None
    custom_phi: Optional[Callable] = field(default=None, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.kind not in _KINDS:
            raise ValueError(f"unknown noise kind {self.kind!r}; choose from {_KINDS}")
        if self.L < 0.0 or not math.isfinite(self.L):
            raise ValueError(f"L must be a nonnegative finite real, got {self.L}")
        if self.kind not in ("linear", "custom") and self.L == 0.0:
            raise ValueError(f"L must be positive for kind {self.kind!r}")
        if self.M is not None and not (self.M > 0.0):
            raise ValueError(f"M must be positive when given, got {self.M}")
        if self.kind in ("bounded_trunc", "sinusoidal") and self.M is None:
            raise ValueError(f"kind {self.kind!r} requires a bound M")
        if self.M is not None and (self.kind == "linear"
                                   or self.base_kind == "linear"):
            raise ValueError("linear noise is unbounded; omit M")
        if self.kind == "time_modulated":
            if self.modulation not in _MODULATIONS:
                raise ValueError(
                    f"time_modulated needs modulation in {sorted(_MODULATIONS)}"
                )
            if self.base_kind not in ("bounded_trunc", "linear", "sinusoidal"):
                raise ValueError("time_modulated needs a non-modulated base_kind")
        if self.kind == "custom" and self.custom_phi is None:
            raise ValueError("custom noise needs custom_phi")

    @property
    def bounded(self) -> bool:
        return self.M is not None

    def phi(self, t, lam):
        """Evaluate the coefficient; t and lam broadcast like numpy operands."""
        out = self._phi_base(self.base_kind or self.kind, t,
                             np.asarray(lam, dtype=float))
        if self.kind == "time_modulated":
            out = _MODULATIONS[self.modulation](t) * out
        return out if (np.ndim(lam) or np.ndim(t)) else float(out)

    def _phi_base(self, kind: str, t, lam: np.ndarray) -> np.ndarray:
        if kind == "custom":
            return np.asarray(self.custom_phi(t, lam), dtype=float)
        if kind == "linear":
            return self.L * lam
        if kind == "bounded_trunc":
            return self.L * np.clip(lam, -self.M / self.L, self.M / self.L)
        if kind == "sinusoidal":
            return self.M * np.sin(self.L * lam / self.M)
        raise AssertionError(kind)


def make_noise(kind: str, L: float, M: Optional[float] = None,
               modulation: str = "sin",
               base_kind: str = "bounded_trunc") -> NoiseModel:
    """Build a catalog noise model; aux params only matter for time_modulated."""
    if kind == "time_modulated":
        return NoiseModel(kind=kind, L=L, M=M, modulation=modulation,
                          base_kind=base_kind)
    return NoiseModel(kind=kind, L=L, M=M)


@dataclass(frozen=True)
class NoiseViolation:
    assumption: str  # "zero_at_zero" | "lipschitz" | "bound"
    t: float
    a: float
    b: Optional[float]
    observed: float
    allowed: float

    def __str__(self) -> str:
        at = f"t={self.t:.6g}, a={self.a:.6g}" + (
            f", b={self.b:.6g}" if self.b is not None else "")
        return (f"{self.assumption} violated at {at}: "
                f"|observed| {self.observed:.6g} exceeds {self.allowed:.6g}")


@dataclass(frozen=True)
class NoiseValidationReport:
    model: NoiseModel
    n_samples: int
    radius: float
    seed: int
    violations: tuple[NoiseViolation, ...]
    counts: dict

    @property
    def ok(self) -> bool:
        return not self.violations and not any(self.counts.values())


def validate_noise(model: NoiseModel, n_samples: int = 10_000,
                   radius: float = 10.0, seed: int = 0,
                   t_max: float = 1.0) -> NoiseValidationReport:
    """Empirically check phi(t,0)=0, the Lipschitz quotient <= L and |phi| <= M."""
    if n_samples < 1:
        raise ValueError("n_samples must be positive")
    rng = np.random.default_rng(seed)
    ts = rng.uniform(0.0, t_max, size=n_samples)
    a = rng.uniform(-radius, radius, size=n_samples)
    b = rng.uniform(-radius, radius, size=n_samples)

    z = np.asarray(model.phi(ts, np.zeros(n_samples)))
    fa = np.asarray(model.phi(ts, a))
    fb = np.asarray(model.phi(ts, b))

    violations: list[NoiseViolation] = []
    counts = {"zero_at_zero": 0, "lipschitz": 0, "bound": 0}

    def record(kind: str, mask: np.ndarray, bvals, observed, allowed: float) -> None:
        idx = np.flatnonzero(mask)
        counts[kind] = int(idx.size)
        for i in idx[:_WITNESS_CAP]:
            violations.append(NoiseViolation(
                kind, float(ts[i]), float(a[i]),
                None if bvals is None else float(bvals[i]),
                float(observed[i]), allowed))

    record("zero_at_zero", z != 0.0, None, np.abs(z), 0.0)

    gap = np.abs(a - b)
    safe = gap > 1e-12 * max(1.0, radius)
    quotient = np.zeros(n_samples)
    quotient[safe] = np.abs(fa - fb)[safe] / gap[safe]
    record("lipschitz", quotient > model.L * (1.0 + 1e-12), b, quotient, model.L)

    if model.bounded:
        record("bound", np.abs(fa) > model.M * (1.0 + 1e-12), None,
               np.abs(fa), model.M)

    return NoiseValidationReport(model=model, n_samples=n_samples, radius=radius,
                                 seed=seed, violations=tuple(violations),
                                 counts=counts)
