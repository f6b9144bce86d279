"""Experiment configuration: flat `section.key = value` text files.

One file pins everything a run needs: mesh, time grid, exponent p, noise
coefficient, initial data, seeds, sample counts, the renormalizers and
test function used by the identity checks, and the pass thresholds of the
verify subcommands.  `load_config` parses and validates, returning the
typed configuration together with a list of violations; an empty list
means runnable.  `config_echo` serializes every effective value back to
the flat format, so a run manifest reproduces its run exactly.

Lines are `key = value` with `#` comments; keys use dotted sections
(`grid.n_cells = 64`).  Lists are comma separated; truncation-level pairs
use colons (`cauchy.pairs = 2:8, 4:8`); an empty value means "unset".
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields as dc_fields
from pathlib import Path
from typing import Optional

import numpy as np

from .initialdata import InitialSpec, make_initial
from .mesh import Grid1D, default_eps, gradient
from .noise import NoiseModel, make_noise
from .truncations import PiecewiseC2, catalog

__all__ = ["ConfigIssue", "ConfigError", "ExperimentConfig", "FuncSpec",
           "parse_flat", "load_config", "build_config", "config_echo",
           "resolve_renormalizer"]


class ConfigError(ValueError):
    """Raised when a config file cannot be parsed at all."""


@dataclass(frozen=True)
class ConfigIssue:
    key: str
    message: str

    def __str__(self) -> str:
        return f"{self.key}: {self.message}"


@dataclass(frozen=True)
class FuncSpec:
    """A catalog renormalizer by name plus parameters, e.g. hk_delta(k, delta)."""

    kind: str
    params: tuple[tuple[str, float], ...] = ()

    def build(self) -> PiecewiseC2:
        return catalog(self.kind, **dict(self.params))


_FUNC_PARAM_KEYS = ("k", "kp", "delta", "s", "sigma", "l")


@dataclass(frozen=True)
class ExperimentConfig:
    # mesh / time / operator
    grid: Grid1D = Grid1D(64, 1.0)
    T: float = 0.5
    dt: float = 1e-3
    p: float = 2.0
    eps: Optional[float] = None  # None = auto rule from initial gradient scale
    # randomness
    noise: NoiseModel = field(default_factory=lambda: make_noise("bounded_trunc", 1.0, 2.0))
    initial: InitialSpec = field(default_factory=lambda: InitialSpec(kind="spike", height=5.0))
    initial2: Optional[InitialSpec] = field(default_factory=lambda: InitialSpec(kind="sine", amplitude=1.0))
    seed: int = 12345
    n_paths: int = 2000
    workers: int = 1
    # truncation levels shared by energy / dissipation sweeps
    k_levels: tuple[float, ...] = (0.5, 1.0, 2.0)
    # renormalizers and test function
    S: FuncSpec = FuncSpec("hk_delta", (("k", 2.0), ("delta", 0.5)))
    H: FuncSpec = FuncSpec("hk_delta", (("k", 3.0), ("delta", 0.5)))
    Z: FuncSpec = FuncSpec("trunc_primitive", (("k", 1.0),))
    psi: str = "sine"
    # subcommand thresholds / parameters
    contraction_slack_a: float = 0.6
    contraction_slack_b: float = 3.0
    contraction_deltas: tuple[float, ...] = (0.1, 0.01)
    energy_slack: float = 0.10
    energy_stderr_mult: float = 3.0
    dissipation_levels: tuple[float, ...] = tuple(float(k) for k in range(13))
    dissipation_lo: float = 0.0
    dissipation_hi: float = 8.0
    dissipation_max_ratio: float = 0.1
    renorm_dt_sweep: tuple[float, ...] = ()
    renorm_min_order: float = 0.4
    renorm_stderr_mult: float = 4.0
    ito_dt_sweep: tuple[float, ...] = ()
    ito_stderr_mult: float = 4.0
    cauchy_pairs: tuple[tuple[float, float], ...] = ((2.0, 8.0), (4.0, 8.0))
    cauchy_slack: float = 0.05
    cauchy_stderr_mult: float = 3.0
    mono_pairs: tuple[tuple[float, float], ...] = ((2.0, 8.0), (4.0, 8.0))
    mono_k: float = 1.0
    hz_pairs: tuple[tuple[float, float], ...] = ((2.0, 4.0), (4.0, 8.0), (8.0, 16.0))
    heat_n_cells: int = 128
    heat_dt: float = 1e-4
    heat_T: float = 0.1
    heat_amplitude: float = 1.0
    heat_mode: int = 1
    heat_max_rel_err: float = 2e-3
    heat_min_gain: float = 1.8
    simulate_path_index: int = 0

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.dt))

    def resolved_eps(self) -> float:
        if self.eps is not None:
            return self.eps
        if self.p >= 2.0:
            return 0.0
        u0 = make_initial(self.initial, self.grid)
        scale = float(np.max(np.abs(gradient(u0)))) if u0.values.size else 1.0
        return default_eps(self.p, scale)

    def with_overrides(self, **kw) -> "ExperimentConfig":
        cur = {f.name: getattr(self, f.name) for f in dc_fields(self)}
        cur.update(kw)
        return ExperimentConfig(**cur)


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

def parse_flat(text: str) -> dict[str, str]:
    """Parse `key = value` lines into an ordered flat dict (later keys win)."""
    out: dict[str, str] = {}
    for lineno, rawline in enumerate(text.splitlines(), start=1):
        line = rawline.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected `key = value`, got {rawline!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        out[key] = value.strip()
    return out


def _parse_float_list(s: str) -> tuple[float, ...]:
    return tuple(float(tok) for tok in s.split(",") if tok.strip())


def _parse_pairs(s: str) -> tuple[tuple[float, float], ...]:
    pairs = []
    for tok in s.split(","):
        tok = tok.strip()
        if not tok:
            continue
        a, _, b = tok.partition(":")
        pairs.append((float(a), float(b)))
    return tuple(pairs)


_INITIAL_FLOAT_KEYS = ("amplitude", "height", "width", "ramp", "alpha", "cap",
                       "center", "amp_lo", "amp_hi")
_INITIAL_INT_KEYS = ("mode", "seed")


def _build_initial(section: str, raw: dict[str, str],
                   issues: list[ConfigIssue]) -> Optional[InitialSpec]:
    prefix = section + "."
    keys = {k[len(prefix):]: v for k, v in raw.items() if k.startswith(prefix)}
    if not keys or not keys.get("kind"):
        return None
    kw: dict = {"kind": keys.pop("kind")}
    for name, value in keys.items():
        if not value:
            continue
        try:
            if name in _INITIAL_INT_KEYS:
                kw[name] = int(value)
            elif name in _INITIAL_FLOAT_KEYS:
                kw[name] = float(value)
            else:
                issues.append(ConfigIssue(prefix + name, "unknown initial-data key"))
        except ValueError:
            issues.append(ConfigIssue(prefix + name, f"bad number {value!r}"))
    try:
        return InitialSpec(**kw)
    except (ValueError, TypeError) as err:
        issues.append(ConfigIssue(section + ".kind", str(err)))
        return None


def _build_funcspec(section: str, raw: dict[str, str],
                    issues: list[ConfigIssue],
                    default: FuncSpec) -> FuncSpec:
    prefix = section + "."
    keys = {k[len(prefix):]: v for k, v in raw.items() if k.startswith(prefix)}
    if not keys:
        return default
    kind = keys.pop("kind", default.kind)
    params = []
    for name, value in keys.items():
        if name not in _FUNC_PARAM_KEYS:
            issues.append(ConfigIssue(prefix + name, "unknown renormalizer parameter"))
            continue
        try:
            params.append((name, float(value)))
        except ValueError:
            issues.append(ConfigIssue(prefix + name, f"bad number {value!r}"))
    spec = FuncSpec(kind, tuple(params))
    try:
        spec.build()
    except (ValueError, TypeError) as err:
        issues.append(ConfigIssue(prefix + "kind", str(err)))
    return spec


def build_config(raw: dict[str, str]) -> tuple[ExperimentConfig, list[ConfigIssue]]:
    """Turn a flat key dict into a typed config plus a violation report."""
    issues: list[ConfigIssue] = []
    consumed: set[str] = set()

    def take(key: str, default, kind="float"):
        consumed.add(key)
        if key not in raw or raw[key] == "":
            return default
        value = raw[key]
        try:
            if kind == "float":
                return float(value)
            if kind == "int":
                return int(value)
            if kind == "str":
                return value
            if kind == "float_list":
                return _parse_float_list(value)
            if kind == "pairs":
                return _parse_pairs(value)
        except ValueError:
            issues.append(ConfigIssue(key, f"bad {kind} {value!r}"))
            return default
        raise AssertionError(kind)

    n_cells = take("grid.n_cells", 64, "int")
    length = take("grid.length", 1.0)
    T = take("time.T", 0.5)
    dt = take("time.dt", 1e-3)
    p = take("model.p", 2.0)
    eps_raw = take("model.eps", "auto", "str")

    grid = Grid1D(64, 1.0)
    if n_cells < 2:
        issues.append(ConfigIssue("grid.n_cells", "must be at least 2"))
    elif length <= 0:
        issues.append(ConfigIssue("grid.length", "must be positive"))
    else:
        grid = Grid1D(n_cells, length)

    eps: Optional[float] = None
    if eps_raw not in ("auto", ""):
        try:
            eps = float(eps_raw)
            if eps < 0:
                issues.append(ConfigIssue("model.eps", "must be nonnegative or auto"))
        except ValueError:
            issues.append(ConfigIssue("model.eps", f"bad value {eps_raw!r}"))

    noise_kind = take("noise.kind", "bounded_trunc", "str")
    noise_L = take("noise.L", 1.0)
    m_default = "2.0" if noise_kind != "linear" else ""
    noise_M_raw = take("noise.M", m_default, "str")
    noise_M = None
    if noise_M_raw not in ("", "none", "unbounded"):
        try:
            noise_M = float(noise_M_raw)
        except ValueError:
            issues.append(ConfigIssue("noise.M", f"bad value {noise_M_raw!r}"))
    modulation = take("noise.modulation", "sin", "str")
    base_kind = take("noise.base_kind", "bounded_trunc", "str")
    noise = make_noise("linear", 0.0)
    try:
        noise = make_noise(noise_kind, noise_L, noise_M,
                           modulation=modulation, base_kind=base_kind)
    except ValueError as err:
        issues.append(ConfigIssue("noise.kind", str(err)))

    for sec in ("initial", "initial2"):
        consumed.update(k for k in raw if k.startswith(sec + "."))
    initial = _build_initial("initial", raw, issues) or InitialSpec(kind="spike", height=5.0)
    initial2 = _build_initial("initial2", raw, issues)
    if initial2 is None and not any(k.startswith("initial2.") for k in raw):
        initial2 = InitialSpec(kind="sine", amplitude=1.0)  # absent section: default pair

    for sec in ("S", "H", "Z"):
        consumed.update(k for k in raw if k.startswith(sec + "."))
    defaults = ExperimentConfig()
    S = _build_funcspec("S", raw, issues, defaults.S)
    H = _build_funcspec("H", raw, issues, defaults.H)
    Z = _build_funcspec("Z", raw, issues, defaults.Z)

    cfg = ExperimentConfig(
        grid=grid, T=T, dt=dt, p=p, eps=eps, noise=noise,
        initial=initial, initial2=initial2,
        seed=take("mc.seed", 12345, "int"),
        n_paths=take("mc.n_paths", 2000, "int"),
        workers=take("mc.workers", 1, "int"),
        k_levels=take("levels.k", (0.5, 1.0, 2.0), "float_list"),
        S=S, H=H, Z=Z,
        psi=take("psi.kind", "sine", "str"),
        contraction_slack_a=take("contraction.slack_a", 0.6),
        contraction_slack_b=take("contraction.slack_b", 3.0),
        contraction_deltas=take("contraction.deltas", (0.1, 0.01), "float_list"),
        energy_slack=take("energy.slack", 0.10),
        energy_stderr_mult=take("energy.stderr_mult", 3.0),
        dissipation_levels=take("dissipation.levels",
                                tuple(float(k) for k in range(13)), "float_list"),
        dissipation_lo=take("dissipation.lo", 0.0),
        dissipation_hi=take("dissipation.hi", 8.0),
        dissipation_max_ratio=take("dissipation.max_ratio", 0.1),
        renorm_dt_sweep=take("renorm.dt_sweep", (), "float_list"),
        renorm_min_order=take("renorm.min_order", 0.4),
        renorm_stderr_mult=take("renorm.stderr_mult", 4.0),
        ito_dt_sweep=take("ito.dt_sweep", (), "float_list"),
        ito_stderr_mult=take("ito.stderr_mult", 4.0),
        cauchy_pairs=take("cauchy.pairs", ((2.0, 8.0), (4.0, 8.0)), "pairs"),
        cauchy_slack=take("cauchy.slack", 0.05),
        cauchy_stderr_mult=take("cauchy.stderr_mult", 3.0),
        mono_pairs=take("mono.pairs", ((2.0, 8.0), (4.0, 8.0)), "pairs"),
        mono_k=take("mono.k", 1.0),
        hz_pairs=take("hz.pairs", ((2.0, 4.0), (4.0, 8.0), (8.0, 16.0)), "pairs"),
        heat_n_cells=take("heat.n_cells", 128, "int"),
        heat_dt=take("heat.dt", 1e-4),
        heat_T=take("heat.T", 0.1),
        heat_amplitude=take("heat.amplitude", 1.0),
        heat_mode=take("heat.mode", 1, "int"),
        heat_max_rel_err=take("heat.max_rel_err", 2e-3),
        heat_min_gain=take("heat.min_gain", 1.8),
        simulate_path_index=take("simulate.path_index", 0, "int"),
    )

    for key in raw:
        if key not in consumed:
            issues.append(ConfigIssue(key, "unknown key"))

    issues.extend(_validate(cfg))
    return cfg, issues


def _check_time_grid(T: float, dt: float, key: str) -> list[ConfigIssue]:
    issues = []
    if not (T > 0):
        issues.append(ConfigIssue(key + ".T", "must be positive"))
    if not (dt > 0):
        issues.append(ConfigIssue(key + ".dt", "must be positive"))
    if T > 0 and dt > 0:
        if dt > T:
            issues.append(ConfigIssue(key + ".dt", f"dt={dt} exceeds T={T}"))
        else:
            J = round(T / dt)
            if J < 1 or abs(J * dt - T) > 1e-12 * max(1.0, T):
                issues.append(ConfigIssue(
                    key + ".dt", f"dt={dt} does not divide T={T} (within 1e-12)"))
    return issues


def _validate(cfg: ExperimentConfig) -> list[ConfigIssue]:
    issues: list[ConfigIssue] = []
    issues.extend(_check_time_grid(cfg.T, cfg.dt, "time"))
    if not (cfg.p > 1.0):
        issues.append(ConfigIssue("model.p", f"p must exceed 1, got {cfg.p}"))
    elif cfg.p < 2.0 and cfg.eps == 0.0:
        issues.append(ConfigIssue("model.eps", "p < 2 requires positive eps (or auto)"))
    if cfg.n_paths < 2:
        issues.append(ConfigIssue("mc.n_paths", "need at least 2 paths"))
    if cfg.workers < 1:
        issues.append(ConfigIssue("mc.workers", "must be at least 1"))
    if cfg.seed < 0:
        issues.append(ConfigIssue("mc.seed", "must be nonnegative"))
    if any(k <= 0 for k in cfg.k_levels):
        issues.append(ConfigIssue("levels.k", "levels must be positive"))
    if list(cfg.k_levels) != sorted(cfg.k_levels):
        issues.append(ConfigIssue("levels.k", "levels must ascend"))
    if cfg.psi not in ("const", "sine", "sine_t"):
        issues.append(ConfigIssue("psi.kind", f"unknown test function {cfg.psi!r}"))
    if not (0.0 <= cfg.dissipation_lo < cfg.dissipation_hi):
        issues.append(ConfigIssue("dissipation.lo", "need 0 <= lo < hi"))
    lv = cfg.dissipation_levels
    if any(k < 0 for k in lv) or list(lv) != sorted(lv) or not lv:
        issues.append(ConfigIssue("dissipation.levels",
                                  "need a nonempty ascending nonnegative list"))
    elif cfg.dissipation_lo not in lv or cfg.dissipation_hi not in lv:
        issues.append(ConfigIssue("dissipation.lo",
                                  "lo and hi must be members of dissipation.levels"))
    for name, sweep in (("renorm.dt_sweep", cfg.renorm_dt_sweep),
                        ("ito.dt_sweep", cfg.ito_dt_sweep)):
        for dt in sweep:
            if dt <= 0 or abs(round(cfg.T / dt) * dt - cfg.T) > 1e-12 * max(1.0, cfg.T):
                issues.append(ConfigIssue(name, f"sweep dt={dt} does not divide T={cfg.T}"))
    for name, pairs in (("cauchy.pairs", cfg.cauchy_pairs),
                        ("mono.pairs", cfg.mono_pairs),
                        ("hz.pairs", cfg.hz_pairs)):
        for a, b in pairs:
            if a <= 0 or b <= 0 or a == b:
                issues.append(ConfigIssue(name, f"bad pair {a}:{b}"))
    if cfg.mono_k <= 0:
        issues.append(ConfigIssue("mono.k", "must be positive"))
    issues.extend(_check_time_grid(cfg.heat_T, cfg.heat_dt, "heat"))
    if cfg.heat_n_cells < 2:
        issues.append(ConfigIssue("heat.n_cells", "must be at least 2"))
    if cfg.eps is not None and cfg.eps < 0:
        issues.append(ConfigIssue("model.eps", "must be nonnegative"))
    if cfg.simulate_path_index < 0:
        issues.append(ConfigIssue("simulate.path_index", "must be nonnegative"))
    return issues


def load_config(path: str | Path) -> tuple[ExperimentConfig, list[ConfigIssue]]:
    text = Path(path).read_text()
    return build_config(parse_flat(text))


def validate_config(path: str | Path) -> list[ConfigIssue]:
    """Every violated invariant of the config file; empty iff runnable."""
    return load_config(path)[1]


# ---------------------------------------------------------------------------
# echo (manifest round-trip)
# ---------------------------------------------------------------------------

def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _initial_items(section: str, spec: Optional[InitialSpec]) -> list[tuple[str, str]]:
    if spec is None:
        return [(f"{section}.kind", "")]
    items = [(f"{section}.kind", spec.kind)]
    if spec.kind == "sine":
        items += [(f"{section}.amplitude", _fmt(spec.amplitude)),
                  (f"{section}.mode", _fmt(spec.mode))]
    elif spec.kind == "spike":
        items += [(f"{section}.height", _fmt(spec.height)),
                  (f"{section}.width", _fmt(spec.width)),
                  (f"{section}.ramp", _fmt(spec.ramp))]
        if spec.center is not None:
            items.append((f"{section}.center", _fmt(spec.center)))
    elif spec.kind == "power_singularity":
        items.append((f"{section}.alpha", _fmt(spec.alpha)))
        if spec.cap is not None:
            items.append((f"{section}.cap", _fmt(spec.cap)))
    elif spec.kind == "random_amplitude":
        items += [(f"{section}.seed", _fmt(spec.seed)),
                  (f"{section}.amp_lo", _fmt(spec.amp_lo)),
                  (f"{section}.amp_hi", _fmt(spec.amp_hi))]
    return items


def config_echo(cfg: ExperimentConfig) -> dict[str, str]:
    """Every effective parameter as flat text keys; reparses to the same run."""
    items: list[tuple[str, str]] = [
        ("grid.n_cells", _fmt(cfg.grid.n_cells)),
        ("grid.length", _fmt(cfg.grid.length)),
        ("time.T", _fmt(cfg.T)),
        ("time.dt", _fmt(cfg.dt)),
        ("model.p", _fmt(cfg.p)),
        ("model.eps", "auto" if cfg.eps is None else _fmt(cfg.eps)),
        ("noise.kind", cfg.noise.kind),
        ("noise.L", _fmt(cfg.noise.L)),
        ("noise.M", _fmt(cfg.noise.M)),
    ]
    if cfg.noise.kind == "time_modulated":
        items += [("noise.modulation", cfg.noise.modulation),
                  ("noise.base_kind", cfg.noise.base_kind)]
    items += _initial_items("initial", cfg.initial)
    items += _initial_items("initial2", cfg.initial2)
    items += [
        ("mc.seed", _fmt(cfg.seed)),
        ("mc.n_paths", _fmt(cfg.n_paths)),
        ("mc.workers", _fmt(cfg.workers)),
        ("levels.k", ", ".join(_fmt(k) for k in cfg.k_levels)),
    ]
    for section, spec in (("S", cfg.S), ("H", cfg.H), ("Z", cfg.Z)):
        items.append((f"{section}.kind", spec.kind))
        items += [(f"{section}.{name}", _fmt(val)) for name, val in spec.params]
    items += [
        ("psi.kind", cfg.psi),
        ("contraction.slack_a", _fmt(cfg.contraction_slack_a)),
        ("contraction.slack_b", _fmt(cfg.contraction_slack_b)),
        ("contraction.deltas", ", ".join(_fmt(d) for d in cfg.contraction_deltas)),
        ("energy.slack", _fmt(cfg.energy_slack)),
        ("energy.stderr_mult", _fmt(cfg.energy_stderr_mult)),
        ("dissipation.levels", ", ".join(_fmt(k) for k in cfg.dissipation_levels)),
        ("dissipation.lo", _fmt(cfg.dissipation_lo)),
        ("dissipation.hi", _fmt(cfg.dissipation_hi)),
        ("dissipation.max_ratio", _fmt(cfg.dissipation_max_ratio)),
        ("renorm.dt_sweep", ", ".join(_fmt(d) for d in cfg.renorm_dt_sweep)),
        ("renorm.min_order", _fmt(cfg.renorm_min_order)),
        ("renorm.stderr_mult", _fmt(cfg.renorm_stderr_mult)),
        ("ito.dt_sweep", ", ".join(_fmt(d) for d in cfg.ito_dt_sweep)),
        ("ito.stderr_mult", _fmt(cfg.ito_stderr_mult)),
        ("cauchy.pairs", ", ".join(f"{_fmt(a)}:{_fmt(b)}" for a, b in cfg.cauchy_pairs)),
        ("cauchy.slack", _fmt(cfg.cauchy_slack)),
        ("cauchy.stderr_mult", _fmt(cfg.cauchy_stderr_mult)),
        ("mono.pairs", ", ".join(f"{_fmt(a)}:{_fmt(b)}" for a, b in cfg.mono_pairs)),
        ("mono.k", _fmt(cfg.mono_k)),
        ("hz.pairs", ", ".join(f"{_fmt(a)}:{_fmt(b)}" for a, b in cfg.hz_pairs)),
        ("heat.n_cells", _fmt(cfg.heat_n_cells)),
        ("heat.dt", _fmt(cfg.heat_dt)),
        ("heat.T", _fmt(cfg.heat_T)),
        ("heat.amplitude", _fmt(cfg.heat_amplitude)),
        ("heat.mode", _fmt(cfg.heat_mode)),
        ("heat.max_rel_err", _fmt(cfg.heat_max_rel_err)),
        ("heat.min_gain", _fmt(cfg.heat_min_gain)),
        ("simulate.path_index", _fmt(cfg.simulate_path_index)),
    ]
    return dict(items)


def resolve_renormalizer(spec: FuncSpec) -> PiecewiseC2:
    return spec.build()
