"""Closed-form checks and property sweeps for the renormalizer catalog."""

import math

import numpy as np
import pytest
from scipy.integrate import quad

from plaplab.truncations import (PiecewiseC2, abs_smooth, abs_smooth_fn, catalog,
                                 hk_delta, hk_delta_fn, plateau, plateau_fn,
                                 plateau_primitive, plateau_primitive_fn,
                                 sign_approx, sign_approx_fn, smooth_trunc,
                                 smooth_trunc_fn, theta, theta_fn, trunc,
                                 trunc_fn, trunc_primitive, trunc_primitive_fn)


def test_trunc_values():
    assert trunc(2, 3) == 2.0
    assert trunc(2, 0) == 0.0
    assert trunc(1, -0.5) == -0.5
    assert trunc(2, -3) == -2.0


def test_trunc_primitive_values():
    # oracle: piecewise integral of the clamp, r^2/2 inside, k|r| - k^2/2 outside
    assert trunc_primitive(1, 3) == pytest.approx(1 * 3 - 0.5, abs=1e-15)  # 2.5
    assert trunc_primitive(1, 0) == 0.0
    assert trunc_primitive(2, -2) == pytest.approx(2.0, abs=1e-15)  # r^2/2 at |r| = k
    # quadrature oracle on a few points
    for k, r in [(1.0, 3.0), (2.0, -2.0), (0.7, 0.3)]:
        oracle, err = quad(lambda s: trunc(k, s), 0.0, r)
        assert trunc_primitive(k, r) == pytest.approx(oracle, abs=1e-10)


def test_trunc_primitive_nonneg_convex_even():
    r = np.linspace(-10, 10, 2001)
    v = trunc_primitive(1.5, r)
    assert np.all(v >= 0)
    assert np.allclose(v, trunc_primitive(1.5, -r))
    assert np.all(np.diff(v, 2) >= -1e-12)  # discrete convexity


def test_theta_values():
    assert theta(1, 2, 2.5) == pytest.approx(1.5, abs=1e-15)
    assert theta(1, 2, 0.5) == 0.0
    assert theta(1, 2, 10) == pytest.approx(2.0, abs=1e-15)
    assert abs(theta(1, 2, -10)) <= 2.0


def test_theta_identity_against_piecewise_form():
    k, kp = 0.7, 1.3
    fn = theta_fn(k, kp)
    r = np.linspace(-5, 5, 100_001)
    direct = trunc(k + kp, r) - trunc(k, r)
    assert np.max(np.abs(fn.value(r) - direct)) <= 4e-16 * (1 + np.max(np.abs(r)))


def test_smooth_trunc_values():
    val, d1, d2 = smooth_trunc(1, 0.5, 1.25)
    assert d1 == pytest.approx(0.5, abs=1e-15)
    # oracle: quadrature of the slope profile over [0, 2]
    slope = lambda rr: np.clip((1 + 0.5 - abs(rr)) / 0.5, 0.0, 1.0)
    oracle, err = quad(slope, 0.0, 2.0)
    assert err < 1e-12
    val, d1, d2 = smooth_trunc(1, 0.5, 2.0)
    assert val == pytest.approx(oracle, abs=1e-10)
    assert val == pytest.approx(1.25, abs=1e-12)
    val, d1, d2 = smooth_trunc(1, 0.5, 0.0)
    assert val == 0.0 and d1 == 1.0


def test_smooth_trunc_band_second_derivative():
    val, d1, d2 = smooth_trunc(1, 0.5, 1.2)
    assert d2 == pytest.approx(-2.0, abs=1e-15)  # -sign(r)/sigma
    val, d1, d2 = smooth_trunc(1, 0.5, -1.2)
    assert d2 == pytest.approx(2.0, abs=1e-15)


def test_plateau_values():
    assert plateau(2, 2.5) == pytest.approx(0.5, abs=1e-15)
    assert plateau(2, 0) == 1.0
    assert plateau(2, 5) == 0.0


def test_plateau_primitive_values():
    # oracle: int_0^3.5 h_2 = 2 + int_2^3 (3 - r) dr = 2.5
    oracle, _ = quad(lambda rr: plateau(2, rr), 0.0, 3.5)
    assert plateau_primitive(2, 3.5) == pytest.approx(oracle, abs=1e-10)
    assert plateau_primitive(2, 3.5) == pytest.approx(2.5, abs=1e-14)
    assert plateau_primitive(2, 1) == 1.0
    assert plateau_primitive(2, -10) == pytest.approx(-2.5, abs=1e-14)


def test_plateau_primitive_saturation():
    for l in (0.5, 2.0, 7.0):
        sat = l + 0.5
        r = np.array([l + 1.0, l + 2.0, 50.0])
        assert np.allclose(plateau_primitive(l, r), sat, atol=1e-13)
        assert np.allclose(plateau_primitive(l, -r), -sat, atol=1e-13)


def test_abs_smooth_values():
    val, d1, d2 = abs_smooth(0.1, 0.0)
    assert val == pytest.approx(0.05, abs=1e-16)
    val, d1, d2 = abs_smooth(0.1, 1.0)
    assert val == 1.0 and d2 == 0.0
    val, d1, d2 = abs_smooth(0.1, 0.05)
    assert d2 == pytest.approx(10.0, abs=1e-12)


def test_abs_smooth_approximation_band():
    delta = 0.3
    r = np.linspace(-2, 2, 4001)
    val, d1, d2 = abs_smooth(delta, r)
    gap = val - np.abs(r)
    assert np.all(gap >= -1e-15)
    assert np.all(gap <= delta / 2 + 1e-15)
    assert np.all(d2 <= 1 / delta + 1e-15)
    assert np.all(d2[np.abs(r) > delta] == 0.0)


def test_hk_delta_values():
    val, d1, d2 = hk_delta(1, 0.5, 2.0)
    assert d2 == pytest.approx(-0.5, abs=1e-15)  # -k*delta on the band
    val, d1, d2 = hk_delta(1, 0.5, 0.5)
    assert d1 == pytest.approx(0.5, abs=1e-15)
    val, d1, d2 = hk_delta(1, 0.5, 3.0)
    assert d1 == pytest.approx(0.0, abs=1e-15)  # k - k*delta*(1/delta) = 0


def test_hk_delta_d1_support_and_hat():
    k, delta = 2.0, 0.25
    out = k + 1 / delta
    r = np.linspace(-1.5 * out, 1.5 * out, 8001)
    val, d1, d2 = hk_delta(k, delta, r)
    assert np.all(d1[np.abs(r) > out] == 0.0)
    inside = np.abs(r) < out - 1e-9
    assert np.count_nonzero(d1[inside] == 0.0) <= 1  # only the origin
    vk = hk_delta(k, delta, k)[1]
    assert vk == pytest.approx(k, abs=1e-14)
    assert hk_delta(k, delta, -k)[1] == pytest.approx(-k, abs=1e-14)


def test_sign_approx_values():
    assert sign_approx(0.1, 5) == 1.0
    assert sign_approx(0.1, 0) == 0.0
    assert sign_approx(2, 1) == 0.5
    r = np.linspace(-30, 30, 1001)
    v = sign_approx(0.3, r)
    assert np.all(np.abs(v) <= 1.0)
    assert np.all(v[r >= 0.3] == 1.0)


@pytest.mark.parametrize("bad", [0.0, -1.0, float("nan")])
def test_positive_parameters_required(bad):
    with pytest.raises(ValueError):
        trunc(bad, 1.0)
    with pytest.raises(ValueError):
        trunc_primitive(bad, 1.0)
    with pytest.raises(ValueError):
        theta(1.0, bad, 1.0)
    with pytest.raises(ValueError):
        smooth_trunc(bad, 0.5, 1.0)
    with pytest.raises(ValueError):
        plateau(bad, 1.0)
    with pytest.raises(ValueError):
        abs_smooth(bad, 1.0)
    with pytest.raises(ValueError):
        hk_delta(1.0, bad, 1.0)
    with pytest.raises(ValueError):
        sign_approx(bad, 1.0)


def _all_catalog_objects():
    return [
        trunc_fn(1.3), trunc_primitive_fn(0.8), theta_fn(0.6, 1.7),
        smooth_trunc_fn(1.1, 0.4), plateau_fn(1.9), plateau_primitive_fn(2.3),
        abs_smooth_fn(0.35), hk_delta_fn(1.4, 0.6), sign_approx_fn(0.9),
    ]


def test_catalog_scalar_and_factory_agree():
    scalar = {
        "trunc": lambda r: trunc(1.3, r),
        "trunc_primitive": lambda r: trunc_primitive(0.8, r),
        "theta": lambda r: theta(0.6, 1.7, r),
        "smooth_trunc": lambda r: smooth_trunc(1.1, 0.4, r)[0],
        "plateau": lambda r: plateau(1.9, r),
        "plateau_primitive": lambda r: plateau_primitive(2.3, r),
        "abs_smooth": lambda r: abs_smooth(0.35, r)[0],
        "hk_delta": lambda r: hk_delta(1.4, 0.6, r)[0],
        "sign_approx": lambda r: sign_approx(0.9, r),
    }
    r = np.linspace(-8, 8, 20_001)
    for obj in _all_catalog_objects():
        direct = scalar[obj.name](r)
        assert np.max(np.abs(obj.value(r) - direct)) <= 1e-13, obj.name


def test_lipschitz_bounds_sampled():
    rng = np.random.default_rng(7)
    a = rng.uniform(-20, 20, 20_000)
    b = rng.uniform(-20, 20, 20_000)
    gap = np.abs(a - b)
    ok = gap > 1e-12
    q = np.abs(trunc(1.7, a) - trunc(1.7, b))[ok] / gap[ok]
    assert np.all(q <= 1 + 1e-12)
    _, d1, _ = smooth_trunc(1.0, 0.5, np.linspace(-5, 5, 100_001))
    assert np.all(np.abs(d1) <= 1.0)


def test_pointwise_limit_bounds():
    r = np.linspace(-12, 12, 40_001)
    for s, sigma in [(1.0, 0.5), (2.5, 0.1), (0.4, 1.0)]:
        val = smooth_trunc(s, sigma, r)[0]
        assert np.max(np.abs(val - trunc(s, r))) <= sigma / 2 + 1e-14
    for delta in (0.5, 0.05):
        val = abs_smooth(delta, r)[0]
        assert np.max(np.abs(val - np.abs(r))) <= delta / 2 + 1e-14


def _fd_check(obj: PiecewiseC2, lo=-9.0, hi=9.0, n=3000, step=1e-5, tol=1e-6):
    rng = np.random.default_rng(int(1000 * obj.support_radius) % 100 + 1
                                if math.isfinite(obj.support_radius) else 5)
    r = rng.uniform(lo, hi, n)
    for b in obj.breakpoints:
        r = r[np.abs(r - b) > 1e-4]
    fd1 = (obj.value(r + step) - obj.value(r - step)) / (2 * step)
    assert np.max(np.abs(fd1 - obj.d1(r))) <= tol, obj.name
    fd2 = (obj.d1(r + step) - obj.d1(r - step)) / (2 * step)
    assert np.max(np.abs(fd2 - obj.d2(r))) <= tol, obj.name


@pytest.mark.parametrize("obj", _all_catalog_objects(), ids=lambda o: o.name)
def test_derivative_finite_difference_consistency(obj):
    _fd_check(obj)


def test_breakpoint_right_limit_convention():
    fn = trunc_fn(1.0)
    # at r = k the right piece (constant k) applies: d1 = 0
    assert float(np.asarray(fn.d1(1.0))) == 0.0
    assert float(np.asarray(fn.d1(-1.0))) == 1.0  # piece [-k, k) applies at -k
    hk = hk_delta_fn(1.0, 0.5)
    assert float(np.asarray(hk.d2(1.0))) == -0.5
    assert float(np.asarray(hk.d2(3.0))) == 0.0


def test_piecewise_constructor_rejects_value_jump():
    with pytest.raises(ValueError, match="jumps"):
        PiecewiseC2(
            breakpoints=(0.0,),
            pieces=(
                (lambda r: np.zeros_like(np.asarray(r, float)),
                 lambda r: np.zeros_like(np.asarray(r, float)),
                 lambda r: np.zeros_like(np.asarray(r, float))),
                (lambda r: np.ones_like(np.asarray(r, float)),
                 lambda r: np.zeros_like(np.asarray(r, float)),
                 lambda r: np.zeros_like(np.asarray(r, float))),
            ),
            name="broken",
        )


def test_piecewise_constructor_rejects_unsorted_breakpoints():
    c = lambda r: np.zeros_like(np.asarray(r, float))
    with pytest.raises(ValueError, match="ascending"):
        PiecewiseC2(breakpoints=(1.0, -1.0), pieces=((c, c, c),) * 3)


def test_catalog_dispatcher():
    obj = catalog("hk_delta", k=2.0, delta=0.5)
    assert obj.name == "hk_delta"
    with pytest.raises(ValueError, match="unknown renormalizer"):
        catalog("nope")
