"""Closed-form truncation and renormalizer functions with weak derivatives.

Every function in the catalog is piecewise C2 with explicit breakpoints:
the clamp ``trunc`` and its primitive, the band difference ``theta``, the
mollified clamp ``smooth_trunc``, the plateau cutoff ``plateau`` and its
primitive, the coercive absolute-value approximation ``abs_smooth``, the
compact-support renormalizer ``hk_delta`` and the scaled sign
approximation ``sign_approx``.

Scalar entry points (``trunc(k, r)`` etc.) evaluate values directly and
accept numpy arrays.  The ``*_fn`` factories wrap the same closed forms
into :class:`PiecewiseC2` objects carrying value, first and second (weak)
derivative, which is what the estimator layer consumes.

Convention: at a breakpoint the second derivative takes its right-limit
value.  Tests should not assert d2 exactly at breakpoints.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "PiecewiseC2",
    "trunc",
    "trunc_primitive",
    "theta",
    "smooth_trunc",
    "plateau",
    "plateau_primitive",
    "abs_smooth",
    "hk_delta",
    "sign_approx",
    "trunc_fn",
    "trunc_primitive_fn",
    "theta_fn",
    "smooth_trunc_fn",
    "plateau_fn",
    "plateau_primitive_fn",
    "abs_smooth_fn",
    "hk_delta_fn",
    "sign_approx_fn",
    "catalog",
]

_CONTINUITY_TOL = 1e-12


def _require_positive(**params: float) -> None:
    for name, val in params.items():
        if not (val > 0.0) or not math.isfinite(val):
            raise ValueError(f"{name} must be a positive finite real, got {val!r}")


Piece = tuple[Callable, Callable, Callable]


@dataclass(frozen=True)
class PiecewiseC2:
    """A piecewise-C2 function given by per-piece closed forms.

    ``pieces[i]`` is a (value, d1, d2) triple of vectorized callables valid
    on the i-th interval; interval i is [breakpoints[i-1], breakpoints[i])
    with the outer intervals unbounded.  The value is continuous across
    breakpoints and d1 is continuous wherever ``c1`` declares it; d2 may
    jump and takes the right-limit value at a breakpoint.

    ``support_radius`` is the radius beyond which d1 vanishes identically
    (the function is constant there); ``math.inf`` when it never does.
    """

    breakpoints: tuple[float, ...]
    pieces: tuple[Piece, ...]
    support_radius: float = math.inf
    c1: bool = True
    name: str = "piecewise"
    params: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        bps = np.asarray(self.breakpoints, dtype=float)
        if bps.ndim != 1 or np.any(np.diff(bps) <= 0):
            raise ValueError("breakpoints must be strictly ascending")
        if len(self.pieces) != len(self.breakpoints) + 1:
            raise ValueError(
                f"{len(self.breakpoints)} breakpoints require "
                f"{len(self.breakpoints) + 1} pieces, got {len(self.pieces)}"
            )
        self._check_matching(0, _CONTINUITY_TOL)
        if self.c1:
            self._check_matching(1, 1e-9)

    def _check_matching(self, order: int, tol: float) -> None:
        for i, b in enumerate(self.breakpoints):
            left = float(np.asarray(self.pieces[i][order](np.float64(b))))
            right = float(np.asarray(self.pieces[i + 1][order](np.float64(b))))
            scale = max(1.0, abs(left), abs(right))
            if abs(left - right) > tol * scale:
                what = "value" if order == 0 else "d1"
                raise ValueError(
                    f"{self.name}: {what} jumps at breakpoint {b}: "
                    f"{left} vs {right}"
                )

    def _eval(self, order: int, r):
        arr = np.asarray(r, dtype=float)
        idx = np.searchsorted(self.breakpoints, arr, side="right")
        out = np.empty_like(arr)
        for i, piece in enumerate(self.pieces):
            mask = idx == i
            if np.any(mask):
                out[mask] = piece[order](arr[mask])
        return out if out.ndim else float(out)

    def value(self, r):
        return self._eval(0, r)

    def d1(self, r):
        return self._eval(1, r)

    def d2(self, r):
        return self._eval(2, r)

    def __call__(self, r):
        return self._eval(0, r)


# ---------------------------------------------------------------------------
# scalar/array closed forms
# ---------------------------------------------------------------------------

def trunc(k: float, r):
    """Clamp r to [-k, k]."""
    _require_positive(k=k)
    return np.clip(r, -k, k) if np.ndim(r) else float(np.clip(r, -k, k))


def trunc_primitive(k: float, r):
    """Primitive of the clamp: r^2/2 on |r| <= k, else k|r| - k^2/2."""
    _require_positive(k=k)
    a = np.abs(np.asarray(r, dtype=float))
    out = np.where(a <= k, a * a / 2.0, k * a - k * k / 2.0)
    return out if out.ndim else float(out)


def theta(k: float, kp: float, r):
    """Band clamp trunc(k + kp, r) - trunc(k, r); vanishes on |r| <= k."""
    _require_positive(k=k, kp=kp)
    out = np.clip(r, -(k + kp), k + kp) - np.clip(r, -k, k)
    return out if np.ndim(out) else float(out)


def smooth_trunc(s: float, sigma: float, r):
    """Mollified clamp with linearly decaying slope on s < |r| < s + sigma.

    Returns (value, d1, d2); d1 falls from 1 to 0 across the band and the
    value saturates at +-(s + sigma/2).
    """
    _require_positive(s=s, sigma=sigma)
    arr = np.asarray(r, dtype=float)
    a = np.abs(arr)
    sg = np.sign(arr)
    d1 = np.clip((s + sigma - a) / sigma, 0.0, 1.0)
    d2 = np.where((a > s) & (a < s + sigma), -sg / sigma, 0.0)
    band = np.clip(a, s, s + sigma)
    mid = ((s + sigma) * (band - s) - (band * band - s * s) / 2.0) / sigma
    val = sg * (np.minimum(a, s) + mid)
    if arr.ndim:
        return val, d1, d2
    return float(val), float(d1), float(d2)


def plateau(l: float, r):
    """Cutoff: 1 on |r| <= l, linear to 0 on l < |r| < l+1, 0 beyond."""
    _require_positive(l=l)
    a = np.abs(np.asarray(r, dtype=float))
    out = np.clip(l + 1.0 - a, 0.0, 1.0)
    return out if out.ndim else float(out)


def plateau_primitive(l: float, r):
    """Odd primitive of the plateau cutoff; saturates at +-(l + 1/2)."""
    _require_positive(l=l)
    arr = np.asarray(r, dtype=float)
    a = np.abs(arr)
    band = np.clip(a, l, l + 1.0)
    mid = (l + 1.0) * (band - l) - (band * band - l * l) / 2.0
    out = np.sign(arr) * (np.minimum(a, l) + mid)
    return out if out.ndim else float(out)


def abs_smooth(delta: float, r):
    """Coercive C1 approximation of |r|: parabola r^2/(2 delta) + delta/2
    inside |r| < delta, exactly |r| outside.

    Returns (value, d1, d2); 0 <= value - |r| <= delta/2 everywhere and
    d2 = (1/delta) * indicator(|r| < delta).
    """
    _require_positive(delta=delta)
    arr = np.asarray(r, dtype=float)
    a = np.abs(arr)
    inside = a < delta
    val = np.where(inside, arr * arr / (2.0 * delta) + delta / 2.0, a)
    d1 = np.where(inside, arr / delta, np.sign(arr))
    d2 = np.where(inside, 1.0 / delta, 0.0)
    if arr.ndim:
        return val, d1, d2
    return float(val), float(d1), float(d2)


def hk_delta(k: float, delta: float, r):
    """Renormalizer with d2 = 1 on |r| < k, -k*delta on the band of width
    1/delta, 0 beyond; integration constants d1(0) = 0, value(0) = 0.

    d1 is then odd with compact support [-(k + 1/delta), k + 1/delta] and
    d1(+-k) = +-k.  Returns (value, d1, d2).
    """
    _require_positive(k=k, delta=delta)
    arr = np.asarray(r, dtype=float)
    a = np.abs(arr)
    sg = np.sign(arr)
    width = 1.0 / delta
    inner = a < k
    band = (a >= k) & (a <= k + width)
    d2 = np.where(inner, 1.0, np.where(band, -k * delta, 0.0))
    b = np.clip(a - k, 0.0, width)
    d1 = sg * np.where(inner, a, np.maximum(k - k * delta * b, 0.0))
    val_inner = np.minimum(a, k) ** 2 / 2.0
    val_band = k * b - k * delta * b * b / 2.0
    val = val_inner + np.where(a > k, val_band, 0.0)
    if arr.ndim:
        return val, d1, d2
    return float(val), float(d1), float(d2)


def sign_approx(k: float, r):
    """trunc(k, r)/k: in [-1, 1], equal to sign(r) for |r| >= k."""
    _require_positive(k=k)
    out = np.clip(r, -k, k) / k
    return out if np.ndim(out) else float(out)


# ---------------------------------------------------------------------------
# PiecewiseC2 factories (catalog objects used as renormalizers S, H, Z)
# ---------------------------------------------------------------------------

def _const(c: float) -> Callable:
    return lambda r: np.full_like(np.asarray(r, dtype=float), c)


def trunc_fn(k: float) -> PiecewiseC2:
    _require_positive(k=k)
    return PiecewiseC2(
        breakpoints=(-k, k),
        pieces=(
            (_const(-k), _const(0.0), _const(0.0)),
            (lambda r: np.asarray(r, float), _const(1.0), _const(0.0)),
            (_const(k), _const(0.0), _const(0.0)),
        ),
        support_radius=k,
        c1=False,
        name="trunc",
        params={"k": k},
    )


def trunc_primitive_fn(k: float) -> PiecewiseC2:
    _require_positive(k=k)
    return PiecewiseC2(
        breakpoints=(-k, k),
        pieces=(
            (lambda r: -k * r - k * k / 2.0, _const(-k), _const(0.0)),
            (lambda r: r * r / 2.0, lambda r: np.asarray(r, float), _const(1.0)),
            (lambda r: k * r - k * k / 2.0, _const(k), _const(0.0)),
        ),
        support_radius=math.inf,
        c1=True,
        name="trunc_primitive",
        params={"k": k},
    )


def theta_fn(k: float, kp: float) -> PiecewiseC2:
    _require_positive(k=k, kp=kp)
    kk = k + kp
    return PiecewiseC2(
        breakpoints=(-kk, -k, k, kk),
        pieces=(
            (_const(-kp), _const(0.0), _const(0.0)),
            (lambda r: r + k, _const(1.0), _const(0.0)),
            (_const(0.0), _const(0.0), _const(0.0)),
            (lambda r: r - k, _const(1.0), _const(0.0)),
            (_const(kp), _const(0.0), _const(0.0)),
        ),
        support_radius=kk,
        c1=False,
        name="theta",
        params={"k": k, "kp": kp},
    )


def smooth_trunc_fn(s: float, sigma: float) -> PiecewiseC2:
    _require_positive(s=s, sigma=sigma)
    out = s + sigma

    def band_val(sg: float) -> Callable:
        def f(r):
            a = sg * np.asarray(r, float)
            return sg * (s + ((s + sigma) * (a - s) - (a * a - s * s) / 2.0) / sigma)
        return f

    return PiecewiseC2(
        breakpoints=(-out, -s, s, out),
        pieces=(
            (_const(-(s + sigma / 2.0)), _const(0.0), _const(0.0)),
            (band_val(-1.0), lambda r: (s + sigma + np.asarray(r, float)) / sigma,
             _const(1.0 / sigma)),
            (lambda r: np.asarray(r, float), _const(1.0), _const(0.0)),
            (band_val(1.0), lambda r: (s + sigma - np.asarray(r, float)) / sigma,
             _const(-1.0 / sigma)),
            (_const(s + sigma / 2.0), _const(0.0), _const(0.0)),
        ),
        support_radius=out,
        c1=True,
        name="smooth_trunc",
        params={"s": s, "sigma": sigma},
    )


def plateau_fn(l: float) -> PiecewiseC2:
    _require_positive(l=l)
    return PiecewiseC2(
        breakpoints=(-(l + 1.0), -l, l, l + 1.0),
        pieces=(
            (_const(0.0), _const(0.0), _const(0.0)),
            (lambda r: l + 1.0 + np.asarray(r, float), _const(1.0), _const(0.0)),
            (_const(1.0), _const(0.0), _const(0.0)),
            (lambda r: l + 1.0 - np.asarray(r, float), _const(-1.0), _const(0.0)),
            (_const(0.0), _const(0.0), _const(0.0)),
        ),
        support_radius=l + 1.0,
        c1=False,
        name="plateau",
        params={"l": l},
    )


def plateau_primitive_fn(l: float) -> PiecewiseC2:
    _require_positive(l=l)
    sat = l + 0.5

    def band_val(sg: float) -> Callable:
        def f(r):
            a = sg * np.asarray(r, float)
            return sg * (l + (l + 1.0) * (a - l) - (a * a - l * l) / 2.0)
        return f

    return PiecewiseC2(
        breakpoints=(-(l + 1.0), -l, l, l + 1.0),
        pieces=(
            (_const(-sat), _const(0.0), _const(0.0)),
            (band_val(-1.0), lambda r: l + 1.0 + np.asarray(r, float), _const(1.0)),
            (lambda r: np.asarray(r, float), _const(1.0), _const(0.0)),
            (band_val(1.0), lambda r: l + 1.0 - np.asarray(r, float), _const(-1.0)),
            (_const(sat), _const(0.0), _const(0.0)),
        ),
        support_radius=l + 1.0,
        c1=True,
        name="plateau_primitive",
        params={"l": l},
    )


def abs_smooth_fn(delta: float) -> PiecewiseC2:
    _require_positive(delta=delta)
    return PiecewiseC2(
        breakpoints=(-delta, delta),
        pieces=(
            (lambda r: -np.asarray(r, float), _const(-1.0), _const(0.0)),
            (lambda r: np.asarray(r, float) ** 2 / (2.0 * delta) + delta / 2.0,
             lambda r: np.asarray(r, float) / delta, _const(1.0 / delta)),
            (lambda r: np.asarray(r, float), _const(1.0), _const(0.0)),
        ),
        support_radius=math.inf,
        c1=True,
        name="abs_smooth",
        params={"delta": delta},
    )


def hk_delta_fn(k: float, delta: float) -> PiecewiseC2:
    _require_positive(k=k, delta=delta)
    width = 1.0 / delta
    out = k + width
    sat = k * k / 2.0 + k * width - k * delta * width * width / 2.0

    def band_val(sg: float) -> Callable:
        def f(r):
            b = sg * np.asarray(r, float) - k
            return k * k / 2.0 + k * b - k * delta * b * b / 2.0
        return f

    def band_d1(sg: float) -> Callable:
        def f(r):
            b = sg * np.asarray(r, float) - k
            return sg * (k - k * delta * b)
        return f

    return PiecewiseC2(
        breakpoints=(-out, -k, k, out),
        pieces=(
            (_const(sat), _const(0.0), _const(0.0)),
            (band_val(-1.0), band_d1(-1.0), _const(-k * delta)),
            (lambda r: np.asarray(r, float) ** 2 / 2.0,
             lambda r: np.asarray(r, float), _const(1.0)),
            (band_val(1.0), band_d1(1.0), _const(-k * delta)),
            (_const(sat), _const(0.0), _const(0.0)),
        ),
        support_radius=out,
        c1=True,
        name="hk_delta",
        params={"k": k, "delta": delta},
    )


def sign_approx_fn(k: float) -> PiecewiseC2:
    _require_positive(k=k)
    return PiecewiseC2(
        breakpoints=(-k, k),
        pieces=(
            (_const(-1.0), _const(0.0), _const(0.0)),
            (lambda r: np.asarray(r, float) / k, _const(1.0 / k), _const(0.0)),
            (_const(1.0), _const(0.0), _const(0.0)),
        ),
        support_radius=k,
        c1=False,
        name="sign_approx",
        params={"k": k},
    )


_CATALOG = {
    "trunc": trunc_fn,
    "trunc_primitive": trunc_primitive_fn,
    "theta": theta_fn,
    "smooth_trunc": smooth_trunc_fn,
    "plateau": plateau_fn,
    "plateau_primitive": plateau_primitive_fn,
    "abs_smooth": abs_smooth_fn,
    "hk_delta": hk_delta_fn,
    "sign_approx": sign_approx_fn,
}


def catalog(name: str, **params: float) -> PiecewiseC2:
    """Build a catalog renormalizer by name, e.g. catalog('hk_delta', k=2, delta=0.5)."""
    try:
        factory = _CATALOG[name]
    except KeyError:
        raise ValueError(
            f"unknown renormalizer {name!r}; available: {sorted(_CATALOG)}"
        ) from None
    return factory(**params)
