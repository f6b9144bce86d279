"""Monte Carlo harness and the theorem-verification estimators.

Each estimator runs one per-path experiment over paths 0..n_paths-1, with
path i driven by the Brownian increments of (master seed, i), and reduces
the results in ascending path order with compensated summation, so the
outcome is bit-identical regardless of worker count.

Quadrature conventions, used consistently everywhere:

* time integrals of state functionals (energies, level-set integrals,
  drift terms of the identities) use the trapezoidal rule over the states
  u^0..u^J -- the implicit half of the splitting evaluates diffusion at
  the right endpoint, so one-sided rectangle sums would carry an O(dt)
  systematic bias proportional to the initial energy;
* stochastic integrals and Ito-correction sums are left-endpoint in the
  state (adaptedness), matching `sde.ito_integral`;
* duality pairings against the discrete p-Laplacian are exact summation
  by parts: <div flux(u), w> = -h * sum_e flux(D_e u) D_e w.
"""

from __future__ import annotations

import math
import multiprocessing
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .config import ExperimentConfig
from .initialdata import make_initial_for_path, truncate_initial
from .mesh import Grid1D, GridFunction
from .noise import make_noise
from .plap_step import DEFAULT_OPTIONS
from .sde import sample_brownian, _evolve_values
from .truncations import PiecewiseC2

__all__ = ["MCResult", "mc_expectation", "TestFunction", "test_function",
           "ContractionReport", "contraction_check",
           "EnergyReport", "energy_bound_check", "energy_profile",
           "DissipationReport", "dissipation_profile",
           "ResidualReport", "renorm_residual", "ito_product_residual",
           "CauchyReport", "cauchy_initial_check",
           "monotonicity_gap", "hz_coupling_diagnostic",
           "HeatReport", "heat_convergence"]


# ---------------------------------------------------------------------------
# deterministic Monte Carlo reduction
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MCResult:
    """Sample mean and standard error with seed provenance."""

    mean: float
    stderr: float
    n: int
    seed: int

    def __post_init__(self) -> None:
        if self.n < 2:
            raise ValueError("Monte Carlo results need at least 2 samples")


_WORK_FN: Optional[Callable] = None


def _invoke(i: int):
    return _WORK_FN(i)


def _collect(per_path: Callable[[int], np.ndarray], n_paths: int,
             workers: int) -> list:
    """Evaluate per_path(0..n_paths-1), in order; fork-based fan-out."""
    if workers <= 1:
        return [per_path(i) for i in range(n_paths)]
    global _WORK_FN
    _WORK_FN = per_path
    try:
        ctx = multiprocessing.get_context("fork")
        chunk = max(1, n_paths // (workers * 8))
        with ctx.Pool(processes=workers) as pool:
            return pool.map(_invoke, range(n_paths), chunksize=chunk)
    finally:
        _WORK_FN = None


def _comp_sum(values: Sequence[np.ndarray]) -> np.ndarray:
    """Neumaier-compensated sum in the given (ascending path) order."""
    total = np.zeros_like(np.asarray(values[0], dtype=float))
    comp = np.zeros_like(total)
    for v in values:
        v = np.asarray(v, dtype=float)
        s = total + v
        comp = comp + np.where(np.abs(total) >= np.abs(v),
                               (total - s) + v, (v - s) + total)
        total = s
    return total + comp


def _mc_stats(values: Sequence) -> tuple[np.ndarray, np.ndarray]:
    n = len(values)
    if n < 2:
        raise ValueError("need at least 2 samples")
    arrs = [np.asarray(v, dtype=float) for v in values]
    mean = _comp_sum(arrs) / n
    ssq = _comp_sum([(a - mean) ** 2 for a in arrs])
    stderr = np.sqrt(ssq / (n - 1)) / math.sqrt(n)
    return mean, stderr


def mc_expectation(per_path: Callable[[int], float], n_paths: int,
                   master_seed: int, workers: int = 1) -> MCResult:
    """Mean and stderr of a scalar per-path experiment, path i seeded by
    (master_seed, i); the reduction order is fixed so the result does not
    depend on worker count."""
    if n_paths < 2:
        raise ValueError("n_paths must be at least 2")
    values = _collect(per_path, n_paths, workers)
    mean, stderr = _mc_stats(values)
    return MCResult(mean=float(mean), stderr=float(stderr), n=n_paths,
                    seed=master_seed)


# ---------------------------------------------------------------------------
# test functions psi
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TestFunction:
    """psi(t, x) on the full node set with its analytic time derivative."""

    name: str
    boundary_vanishing: bool
    _space: np.ndarray      # spatial factor at all nodes 0..n_cells
    _growth: bool           # True: psi = space * (1 + t)

    def nodes(self, t: float) -> np.ndarray:
        return self._space * (1.0 + t) if self._growth else self._space

    def dt_nodes(self, t: float) -> np.ndarray:
        return self._space if self._growth else np.zeros_like(self._space)


def test_function(name: str, grid) -> TestFunction:
    """Catalog: 'const' (psi = 1), 'sine' (sin(pi x/X)), 'sine_t' (sin(pi x/X)(1+t))."""
    x = grid.node_x
    if name == "const":
        return TestFunction(name, False, np.ones_like(x), False)
    if name == "sine":
        return TestFunction(name, True, np.sin(math.pi * x / grid.length), False)
    if name == "sine_t":
        return TestFunction(name, True, np.sin(math.pi * x / grid.length), True)
    raise ValueError(f"unknown test function {name!r}; choose const, sine or sine_t")


# ---------------------------------------------------------------------------
# shared per-path machinery
# ---------------------------------------------------------------------------

def _flux(e: np.ndarray, p: float, eps: float) -> np.ndarray:
    if eps == 0.0:
        return np.sign(e) * np.abs(e) ** (p - 1.0)
    return (e * e + eps * eps) ** ((p - 2.0) / 2.0) * e


def _pad(vals: np.ndarray) -> np.ndarray:
    out = np.zeros(vals.shape[-1] + 2)
    out[1:-1] = vals
    return out


def _trap(per_state: np.ndarray, dt: float) -> float:
    """Trapezoidal time quadrature of a functional sampled at u^0..u^J."""
    return float(dt * (per_state.sum() - 0.5 * (per_state[0] + per_state[-1])))


def _run_pair(cfg: ExperimentConfig, i: int, u0, v0) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Coupled trajectories (values only) and the shared increments."""
    path = sample_brownian(cfg.seed, i, cfg.n_steps, cfg.dt)
    eps = cfg.resolved_eps()
    tu = _evolve_values(u0, cfg.grid, cfg.noise, path, cfg.p, eps, DEFAULT_OPTIONS)
    tv = _evolve_values(v0, cfg.grid, cfg.noise, path, cfg.p, eps, DEFAULT_OPTIONS)
    return tu, tv, path.increments


def _initial_values(cfg: ExperimentConfig, i: int) -> np.ndarray:
    return np.asarray(make_initial_for_path(cfg.initial, cfg.grid, i).values)


def _second_initial_values(cfg: ExperimentConfig, i: int) -> np.ndarray:
    if cfg.initial2 is None:
        raise ValueError("this estimator needs a second initial datum (initial2)")
    return np.asarray(make_initial_for_path(cfg.initial2, cfg.grid, i).values)


# ---------------------------------------------------------------------------
# contraction principle + pathwise Ito-correction bound
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ContractionReport:
    times: np.ndarray
    ratio: np.ndarray              # R(t_j) = E||u-v||_1 / E||u0-v0||_1
    ratio_stderr: np.ndarray
    denominator: float
    ratio_max: float
    t_at_max: float
    rel_stderr_at_max: float
    ito_corrections: tuple        # (delta, max over paths, bound delta L^2 T |D|)
    n: int
    seed: int

    def threshold(self, slack_a: float, slack_b: float, dt: float) -> float:
        return 1.0 + slack_a * math.sqrt(dt) + slack_b * self.rel_stderr_at_max


def contraction_check(cfg: ExperimentConfig) -> ContractionReport:
    """Coupled L1 distance curve against its initial value (synchronous coupling),
    plus the pathwise Ito-correction sums for each configured delta."""
    h = cfg.grid.h
    dt = cfg.dt
    deltas = tuple(cfg.contraction_deltas)
    L = cfg.noise.L
    noise = cfg.noise

    def per_path(i: int) -> np.ndarray:
        u0 = _initial_values(cfg, i)
        v0 = _second_initial_values(cfg, i)
        tu, tv, inc = _run_pair(cfg, i, u0, v0)
        w = tu - tv
        curve = h * np.sum(np.abs(w), axis=1)
        acc = np.zeros(len(deltas))
        for j in range(inc.size):
            t = j * dt
            dphi2 = (noise.phi(t, tu[j]) - noise.phi(t, tv[j])) ** 2
            aw = np.abs(w[j])
            for d_idx, delta in enumerate(deltas):
                acc[d_idx] += dt * h * np.sum(dphi2[aw < delta]) / delta
        return np.concatenate([curve, acc])

    values = _collect(per_path, cfg.n_paths, cfg.workers)
    mean, stderr = _mc_stats(values)
    J = cfg.n_steps
    curve_mean, curve_se = mean[:J + 1], stderr[:J + 1]
    denom = float(curve_mean[0])
    if denom <= 0.0:
        raise ValueError("initial data coincide; contraction ratio undefined")
    ratio = curve_mean / denom
    ratio_se = curve_se / denom
    jmax = int(np.argmax(ratio))
    bound_scale = L * L * cfg.T * cfg.grid.length
    ito = tuple(
        (delta, float(max(v[J + 1 + d_idx] for v in values)), delta * bound_scale)
        for d_idx, delta in enumerate(deltas))
    return ContractionReport(
        times=np.arange(J + 1) * dt, ratio=ratio, ratio_stderr=ratio_se,
        denominator=denom, ratio_max=float(ratio[jmax]),
        t_at_max=float(jmax * dt),
        rel_stderr_at_max=float(ratio_se[jmax] / max(ratio[jmax], 1e-300)),
        ito_corrections=ito, n=cfg.n_paths, seed=cfg.seed)


# ---------------------------------------------------------------------------
# truncated energy bound
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EnergyReport:
    levels: tuple                  # (k, MCResult lhs, C_k)
    u0_l1: float                   # E ||u0||_L1 (exact for deterministic data)
    n: int
    seed: int


def energy_profile(cfg: ExperimentConfig, ks: Sequence[float]) -> EnergyReport:
    """Space-time truncated gradient energies against C(k) = T L^2 k^2 |D|/2 + k ||u0||_1."""
    ks = tuple(float(k) for k in ks)
    if any(k <= 0 for k in ks):
        raise ValueError("truncation levels must be positive")
    h = cfg.grid.h
    eps = cfg.resolved_eps()
    noise = cfg.noise

    def per_path(i: int) -> np.ndarray:
        u0 = _initial_values(cfg, i)
        path = sample_brownian(cfg.seed, i, cfg.n_steps, cfg.dt)
        tu = _evolve_values(u0, cfg.grid, noise, path, cfg.p, eps, DEFAULT_OPTIONS)
        J = tu.shape[0] - 1
        per_state = np.empty((len(ks), J + 1))
        for j in range(J + 1):
            pad = _pad(tu[j])
            for k_idx, k in enumerate(ks):
                gk = np.diff(np.clip(pad, -k, k)) / h
                per_state[k_idx, j] = h * np.sum(np.abs(gk) ** cfg.p)
        out = np.empty(len(ks) + 1)
        for k_idx in range(len(ks)):
            out[k_idx] = _trap(per_state[k_idx], cfg.dt)
        out[-1] = h * np.sum(np.abs(u0))
        return out

    values = _collect(per_path, cfg.n_paths, cfg.workers)
    mean, stderr = _mc_stats(values)
    u0_l1 = float(mean[-1])
    L = cfg.noise.L
    levels = []
    for k_idx, k in enumerate(ks):
        c_k = cfg.T * L * L * k * k * cfg.grid.length / 2.0 + k * u0_l1
        lhs = MCResult(float(mean[k_idx]), float(stderr[k_idx]), cfg.n_paths, cfg.seed)
        levels.append((k, lhs, c_k))
    return EnergyReport(levels=tuple(levels), u0_l1=u0_l1, n=cfg.n_paths, seed=cfg.seed)


def energy_bound_check(cfg: ExperimentConfig, k: float) -> EnergyReport:
    return energy_profile(cfg, (k,))


# ---------------------------------------------------------------------------
# energy dissipation profile
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DissipationReport:
    levels: tuple                   # (k, MCResult D(k)) over bands (k, k+1)
    observed_max: float             # max over paths/states/edges of |edge midpoint|
    n: int
    seed: int


def dissipation_profile(cfg: ExperimentConfig,
                        ks: Sequence[float]) -> DissipationReport:
    """Band energies D(k) = E integral over {k < |u| < k+1} of |grad u|^p dx dt."""
    ks = tuple(float(k) for k in ks)
    if any(k < 0 for k in ks) or list(ks) != sorted(ks):
        raise ValueError("band levels must be nonnegative and ascending")
    h = cfg.grid.h
    eps = cfg.resolved_eps()

    def per_path(i: int) -> np.ndarray:
        u0 = _initial_values(cfg, i)
        path = sample_brownian(cfg.seed, i, cfg.n_steps, cfg.dt)
        tu = _evolve_values(u0, cfg.grid, cfg.noise, path, cfg.p, eps, DEFAULT_OPTIONS)
        J = tu.shape[0] - 1
        per_state = np.zeros((len(ks), J + 1))
        obs = 0.0
        for j in range(J + 1):
            pad = _pad(tu[j])
            g = np.abs(np.diff(pad) / h) ** cfg.p
            mid = np.abs(pad[1:] + pad[:-1]) / 2.0
            obs = max(obs, float(mid.max()))
            for k_idx, k in enumerate(ks):
                mask = (mid > k) & (mid < k + 1.0)
                if np.any(mask):
                    per_state[k_idx, j] = h * np.sum(g[mask])
        out = np.empty(len(ks) + 1)
        for k_idx in range(len(ks)):
            out[k_idx] = _trap(per_state[k_idx], cfg.dt)
        out[-1] = obs
        return out

    values = _collect(per_path, cfg.n_paths, cfg.workers)
    mean, stderr = _mc_stats(values)
    levels = tuple(
        (k, MCResult(float(mean[k_idx]), float(stderr[k_idx]), cfg.n_paths, cfg.seed))
        for k_idx, k in enumerate(ks))
    observed_max = float(max(v[-1] for v in values))
    return DissipationReport(levels=levels, observed_max=observed_max,
                             n=cfg.n_paths, seed=cfg.seed)


# ---------------------------------------------------------------------------
# renormalized-equation residual
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ResidualReport:
    mean: float
    stderr: float
    rms: float
    n: int
    seed: int
    dt: float


def _check_renorm_admissible(S: PiecewiseC2, psi: TestFunction) -> None:
    if psi.boundary_vanishing:
        return
    if float(np.asarray(S.d1(0.0))) != 0.0 or not math.isfinite(S.support_radius):
        raise ValueError(
            "with a test function that does not vanish on the boundary the "
            "renormalizer needs S'(0) = 0 and a compactly supported (or at "
            f"least saturating) derivative; {S.name} has S'(0) = "
            f"{float(np.asarray(S.d1(0.0)))!r}, support radius {S.support_radius}"
        )


def renorm_residual(cfg: ExperimentConfig, S: PiecewiseC2,
                    psi: TestFunction) -> ResidualReport:
    """Residual of the renormalized identity at t = T, per path.

    Terms: [S(u(T))psi(T) - S(u0)psi(0)] + [S''-energy] + [S'-flux against
    grad psi] - [stochastic integral] - [S psi_t] - [Ito correction].
    Drift terms use trapezoidal time quadrature; the stochastic and Ito
    correction sums are left-endpoint.
    """
    _check_renorm_admissible(S, psi)
    h = cfg.grid.h
    dt = cfg.dt
    noise = cfg.noise
    eps = cfg.resolved_eps()

    def per_path(i: int) -> float:
        u0 = _initial_values(cfg, i)
        path = sample_brownian(cfg.seed, i, cfg.n_steps, cfg.dt)
        tu = _evolve_values(u0, cfg.grid, noise, path, cfg.p, eps, DEFAULT_OPTIONS)
        inc = path.increments
        J = inc.size
        drift = np.empty(J + 1)
        sto = 0.0
        ito_corr = 0.0
        psit_term = 0.0
        for j in range(J + 1):
            t = j * dt
            pad = _pad(tu[j])
            e = np.diff(pad) / h
            mid = (pad[1:] + pad[:-1]) / 2.0
            psi_full = psi.nodes(t)
            psi_mid = (psi_full[1:] + psi_full[:-1]) / 2.0
            dpsi = np.diff(psi_full) / h
            energy = h * np.sum(S.d2(mid) * np.abs(e) ** cfg.p * psi_mid)
            fluxpsi = h * np.sum(S.d1(mid) * _flux(e, cfg.p, eps) * dpsi)
            drift[j] = energy + fluxpsi
            if j < J:
                u = tu[j]
                psi_in = psi_full[1:-1]
                sto += h * np.sum(S.d1(u) * psi_in * noise.phi(t, u)) * inc[j]
                ito_corr += 0.5 * dt * h * np.sum(
                    S.d2(u) * psi_in * noise.phi(t, u) ** 2)
                psit_term += dt * h * np.sum(S.value(u) * psi.dt_nodes(t)[1:-1])
        boundary = (h * np.sum(S.value(tu[-1]) * psi.nodes(cfg.T)[1:-1])
                    - h * np.sum(S.value(tu[0]) * psi.nodes(0.0)[1:-1]))
        return boundary + _trap(drift, dt) - sto - psit_term - ito_corr

    values = _collect(per_path, cfg.n_paths, cfg.workers)
    mean, stderr = _mc_stats(values)
    rms = float(np.sqrt(_comp_sum([v * v for v in np.asarray(values)]) / len(values)))
    return ResidualReport(mean=float(mean), stderr=float(stderr), rms=rms,
                          n=cfg.n_paths, seed=cfg.seed, dt=cfg.dt)


# ---------------------------------------------------------------------------
# Ito product rule residual
# ---------------------------------------------------------------------------

def _check_hz(H: PiecewiseC2, Z: PiecewiseC2) -> None:
    if float(np.asarray(Z.value(0.0))) != 0.0 or float(np.asarray(Z.d1(0.0))) != 0.0:
        raise ValueError(
            f"Z must satisfy Z(0) = Z'(0) = 0; {Z.name} has "
            f"Z(0) = {float(np.asarray(Z.value(0.0)))!r}, "
            f"Z'(0) = {float(np.asarray(Z.d1(0.0)))!r}")


def ito_product_residual(cfg: ExperimentConfig, H: PiecewiseC2,
                         Z: PiecewiseC2) -> ResidualReport:
    """Residual of the product identity for (Z(u - v), H(u)) on coupled paths.

    All time integrals are left-endpoint sums; the two p-Laplace duality
    pairings are exact discrete integration by parts; the two stochastic
    integrals ride the shared Brownian increments of the coupling.
    """
    _check_hz(H, Z)
    h = cfg.grid.h
    dt = cfg.dt
    noise = cfg.noise
    eps = cfg.resolved_eps()

    def per_path(i: int) -> float:
        u0 = _initial_values(cfg, i)
        v0 = _second_initial_values(cfg, i)
        tu, tv, inc = _run_pair(cfg, i, u0, v0)
        J = inc.size
        drift = 0.0
        sto = 0.0
        corr = 0.0
        for j in range(J):
            t = j * dt
            u, v = tu[j], tv[j]
            w = u - v
            eu = np.diff(_pad(u)) / h
            ev = np.diff(_pad(v)) / h
            flux_u = _flux(eu, cfg.p, eps)
            flux_v = _flux(ev, cfg.p, eps)
            # term 2: <div flux(u) - div flux(v), H(u) Z'(u-v)>
            w_nodes = _pad(np.asarray(H.value(u)) * np.asarray(Z.d1(w)))
            t2 = -h * np.sum((flux_u - flux_v) * np.diff(w_nodes) / h)
            # term 3: <div flux(u), H'(u) Z(u-v)>
            w_nodes3 = _pad(np.asarray(H.d1(u)) * np.asarray(Z.value(w)))
            t3 = -h * np.sum(flux_u * np.diff(w_nodes3) / h)
            drift += dt * (t2 + t3)
            phi_u = noise.phi(t, u)
            dphi = phi_u - noise.phi(t, v)
            Hu = np.asarray(H.value(u))
            Hp = np.asarray(H.d1(u))
            Zw = np.asarray(Z.value(w))
            Zp = np.asarray(Z.d1(w))
            sto += h * np.sum(phi_u * Hp * Zw) * inc[j]
            sto += h * np.sum(dphi * Zp * Hu) * inc[j]
            corr += 0.5 * dt * h * np.sum(phi_u ** 2 * np.asarray(H.d2(u)) * Zw)
            corr += 0.5 * dt * h * np.sum(dphi ** 2 * np.asarray(Z.d2(w)) * Hu)
            corr += dt * h * np.sum(dphi * Zp * phi_u * Hp)
        w_T = tu[-1] - tv[-1]
        w_0 = tu[0] - tv[0]
        lhs = h * np.sum(np.asarray(Z.value(w_T)) * np.asarray(H.value(tu[-1])))
        rhs0 = h * np.sum(np.asarray(Z.value(w_0)) * np.asarray(H.value(tu[0])))
        return lhs - rhs0 - drift - sto - corr

    values = _collect(per_path, cfg.n_paths, cfg.workers)
    mean, stderr = _mc_stats(values)
    rms = float(np.sqrt(_comp_sum([v * v for v in np.asarray(values)]) / len(values)))
    return ResidualReport(mean=float(mean), stderr=float(stderr), rms=rms,
                          n=cfg.n_paths, seed=cfg.seed, dt=cfg.dt)


# ---------------------------------------------------------------------------
# Cauchy property of the truncated-data approximations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CauchyReport:
    level_n: float
    level_m: float
    lhs: MCResult                  # E ||u_n(T) - u_m(T)||_1
    rhs: float                     # E ||T_n u0 - T_m u0||_1
    n: int
    seed: int


def cauchy_initial_check(cfg: ExperimentConfig, n: float, m: float) -> CauchyReport:
    """Coupled runs from T_n(u0) and T_m(u0): final L1 gap against the initial one."""
    if n == m:
        raise ValueError("levels n and m must differ")
    if n <= 0 or m <= 0:
        raise ValueError("levels must be positive")
    h = cfg.grid.h

    def per_path(i: int) -> np.ndarray:
        base = GridFunction(cfg.grid, _initial_values(cfg, i))
        un0 = np.asarray(truncate_initial(base, n).values)
        um0 = np.asarray(truncate_initial(base, m).values)
        tu, tv, _ = _run_pair(cfg, i, un0, um0)
        return np.array([h * np.sum(np.abs(tu[-1] - tv[-1])),
                         h * np.sum(np.abs(un0 - um0))])

    values = _collect(per_path, cfg.n_paths, cfg.workers)
    mean, stderr = _mc_stats(values)
    lhs = MCResult(float(mean[0]), float(stderr[0]), cfg.n_paths, cfg.seed)
    return CauchyReport(level_n=n, level_m=m, lhs=lhs, rhs=float(mean[1]),
                        n=cfg.n_paths, seed=cfg.seed)


# ---------------------------------------------------------------------------
# monotonicity gap and the H/Z coupling diagnostic
# ---------------------------------------------------------------------------

def monotonicity_gap(cfg: ExperimentConfig, n: float, m: float,
                     k: float) -> MCResult:
    """E integral of (flux(grad u_n) - flux(grad u_m)) . grad T_k(u_n - u_m);
    nonnegative pathwise because nodewise truncation preserves edge signs."""
    if n <= 0 or m <= 0 or k <= 0:
        raise ValueError("levels must be positive")
    h = cfg.grid.h
    eps = cfg.resolved_eps()

    def per_path(i: int) -> float:
        base = GridFunction(cfg.grid, _initial_values(cfg, i))
        un0 = np.asarray(truncate_initial(base, n).values)
        um0 = np.asarray(truncate_initial(base, m).values)
        tu, tv, inc = _run_pair(cfg, i, un0, um0)
        J = inc.size
        per_state = np.empty(J + 1)
        for j in range(J + 1):
            eu = np.diff(_pad(tu[j])) / h
            ev = np.diff(_pad(tv[j])) / h
            dk = np.diff(np.clip(_pad(tu[j] - tv[j]), -k, k)) / h
            per_state[j] = h * np.sum(
                (_flux(eu, cfg.p, eps) - _flux(ev, cfg.p, eps)) * dk)
        return _trap(per_state, cfg.dt)

    return mc_expectation(per_path, cfg.n_paths, cfg.seed, cfg.workers)


def hz_coupling_diagnostic(cfg: ExperimentConfig, n: float, m: float,
                           H: PiecewiseC2, Z: PiecewiseC2) -> MCResult:
    """E integral of H''(u_n) Z(u_n - u_m) |grad u_n|^p, edge-midpoint values."""
    _check_hz(H, Z)
    if n <= 0 or m <= 0:
        raise ValueError("levels must be positive")
    h = cfg.grid.h

    def per_path(i: int) -> float:
        base = GridFunction(cfg.grid, _initial_values(cfg, i))
        un0 = np.asarray(truncate_initial(base, n).values)
        um0 = np.asarray(truncate_initial(base, m).values)
        tu, tv, inc = _run_pair(cfg, i, un0, um0)
        J = inc.size
        per_state = np.empty(J + 1)
        for j in range(J + 1):
            pad_u = _pad(tu[j])
            pad_v = _pad(tv[j])
            eu = np.diff(pad_u) / h
            mid_u = (pad_u[1:] + pad_u[:-1]) / 2.0
            mid_v = (pad_v[1:] + pad_v[:-1]) / 2.0
            per_state[j] = h * np.sum(
                np.asarray(H.d2(mid_u)) * np.asarray(Z.value(mid_u - mid_v))
                * np.abs(eu) ** cfg.p)
        return _trap(per_state, cfg.dt)

    return mc_expectation(per_path, cfg.n_paths, cfg.seed, cfg.workers)


# ---------------------------------------------------------------------------
# deterministic heat-equation order study (p = 2, zero noise)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HeatReport:
    levels: tuple                  # (n_cells, dt, relative L2 error at T)
    gains: tuple                   # error ratios between consecutive levels


def heat_convergence(cfg: ExperimentConfig, n_levels: int = 2) -> HeatReport:
    """Backward-Euler heat run against A e^{-(m pi/X)^2 t} sin(m pi x / X).

    Level l halves dt and doubles n_cells relative to level l-1; the
    expected error reduction of the O(dt + h^2) scheme is about 2x.
    """
    zero_noise = make_noise("linear", 0.0)
    levels = []
    for lvl in range(n_levels):
        n_cells = cfg.heat_n_cells * (2 ** lvl)
        dt = cfg.heat_dt / (2 ** lvl)
        grid = Grid1D(n_cells, cfg.grid.length)
        x = grid.interior_x
        lam = (cfg.heat_mode * math.pi / grid.length) ** 2
        u0 = cfg.heat_amplitude * np.sin(cfg.heat_mode * math.pi * x / grid.length)
        J = int(round(cfg.heat_T / dt))
        path = sample_brownian(cfg.seed, 0, J, dt)  # increments unused by zero noise
        tu = _evolve_values(u0, grid, zero_noise, path, 2.0, 0.0, DEFAULT_OPTIONS)
        exact = u0 * math.exp(-lam * cfg.heat_T)
        err = np.sqrt(grid.h * np.sum((tu[-1] - exact) ** 2))
        ref = np.sqrt(grid.h * np.sum(exact ** 2))
        levels.append((n_cells, dt, float(err / ref)))
    gains = tuple(levels[i][2] / levels[i + 1][2] for i in range(len(levels) - 1))
    return HeatReport(levels=tuple(levels), gains=gains)
