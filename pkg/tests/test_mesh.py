"""Discrete operators: difference quotients, fluxes, quadrature, level sets."""

import numpy as np
import pytest

from plaplab.mesh import (Grid1D, GridFunction, default_eps, gradient, inner,
                          integrate, l1_norm, levelset_gradient_integral,
                          p_flux, p_flux_deriv, p_laplacian,
                          truncated_gradient_energy)


def gf(values, n_cells=None, length=1.0):
    values = np.asarray(values, dtype=float)
    n_cells = n_cells or values.size + 1
    return GridFunction(Grid1D(n_cells, length), values)


def test_grid_invariants():
    g = Grid1D(64, 2.0)
    assert g.h == pytest.approx(2.0 / 64)
    assert g.n_interior == 63
    with pytest.raises(ValueError):
        Grid1D(1)
    with pytest.raises(ValueError):
        Grid1D(8, -1.0)


def test_gridfunction_validation():
    g = Grid1D(4)
    with pytest.raises(ValueError):
        GridFunction(g, np.array([1.0, 2.0]))  # wrong count
    with pytest.raises(ValueError):
        GridFunction(g, np.array([1.0, np.inf, 0.0]))
    u = GridFunction(g, np.array([1.0, 2.0, 3.0]))
    with pytest.raises(ValueError):
        u.values[0] = 5.0  # immutable


def test_gradient_hat():
    u = gf([1.0])  # n_cells = 2, h = 0.5
    assert np.allclose(gradient(u), [2.0, -2.0])
    assert np.allclose(gradient(gf([0.0, 0.0, 0.0])), 0.0)


def test_gradient_hand_differences():
    u = gf([0.25, 0.5, 0.25])  # n_cells = 4, h = 0.25
    assert np.allclose(gradient(u), [1.0, 1.0, -1.0, -1.0])


def test_p_flux_values():
    assert p_flux(2.0, 3.0) == pytest.approx(4.0)
    assert p_flux(-2.0, 3.0) == pytest.approx(-4.0)
    # oracle: direct evaluation of (s^2 + eps^2)^((p-2)/2) * s
    expected = (1.0 + 1.0) ** ((1.5 - 2.0) / 2.0) * 1.0
    assert expected == pytest.approx(2.0 ** -0.25)
    assert p_flux(1.0, 1.5, 1.0) == pytest.approx(expected, abs=1e-15)
    assert p_flux(1.0, 1.5, 1.0) == pytest.approx(0.8408964152537145, abs=1e-12)


def test_p_flux_monotone_odd():
    s = np.linspace(-10, 10, 2001)
    for p, eps in [(2.0, 0.0), (3.0, 0.0), (1.5, 0.1), (4.0, 0.5)]:
        f = p_flux(s, p, eps)
        assert np.all(np.diff(f) >= -1e-14)
        assert np.allclose(f, -p_flux(-s, p, eps))


def test_p_flux_errors():
    with pytest.raises(ValueError):
        p_flux(1.0, 1.0)  # p must exceed 1
    with pytest.raises(ValueError):
        p_flux(1.0, 2.0, -0.5)
    with pytest.raises(ValueError, match="singular"):
        p_flux(0.0, 1.5, 0.0)
    # nonzero arguments are fine without regularization: |s|^(p-2) s = 2^(p-1)
    assert p_flux(2.0, 1.5, 0.0) == pytest.approx(2.0 ** 0.5, abs=1e-15)


def test_p_laplacian_second_difference():
    # p = 2 reduces to (u_{i-1} - 2 u_i + u_{i+1}) / h^2
    u = gf([1.0])  # single interior node, h = 0.5
    lap = p_laplacian(u, 2.0)
    assert lap.values[0] == pytest.approx((0.0 - 2.0 * 1.0 + 0.0) / 0.25)
    assert lap.values[0] == pytest.approx(-8.0)
    rng = np.random.default_rng(0)
    v = gf(rng.standard_normal(15), 16)
    lap2 = p_laplacian(v, 2.0).values
    pad = v.padded()
    expected = (pad[:-2] - 2 * pad[1:-1] + pad[2:]) / v.grid.h ** 2
    assert np.allclose(lap2, expected, atol=1e-10)
    assert np.allclose(p_laplacian(gf([0.0, 0.0]), 3.0).values, 0.0)


def test_integrate():
    u = gf([3.0] * 7, 8, 2.0)  # h = 0.25
    assert integrate(u) == pytest.approx(3.0 * 0.25 * 7)
    v = gf([1.0, -2.0], 3)  # h = 1/3
    assert integrate(v, np.abs) == pytest.approx(1.0)
    assert integrate(v, lambda x: np.zeros_like(x)) == 0.0
    assert l1_norm(v) == pytest.approx(1.0)


def test_levelset_gradient_integral():
    u = gf([1.0])  # h = 0.5, edge midpoints both 0.5, edge gradients +-2
    assert levelset_gradient_integral(u, 2.0, 0.3, 0.7) == pytest.approx(4.0)
    assert levelset_gradient_integral(u, 2.0, 0.6, 0.9) == 0.0
    assert levelset_gradient_integral(gf([0.0, 0.0]), 2.0, 0.0, 5.0) == 0.0
    # a huge band catches every nonzero-gradient edge
    rng = np.random.default_rng(3)
    w = gf(rng.uniform(0.5, 2.0, 31), 32)
    full = np.sum(np.abs(np.diff(w.padded()) / w.grid.h) ** 2) * w.grid.h
    assert levelset_gradient_integral(w, 2.0, 0.0, 1e9) == pytest.approx(full, rel=1e-12)
    with pytest.raises(ValueError):
        levelset_gradient_integral(u, 2.0, 0.7, 0.3)


def test_truncated_gradient_energy():
    u = gf([10.0])  # truncated hat of height 1 at k = 1, h = 0.5
    assert truncated_gradient_energy(u, 1.0, 2.0) == pytest.approx(0.5 * (4 + 4))
    rng = np.random.default_rng(5)
    w = gf(rng.uniform(-0.5, 0.5, 15), 16)
    full = np.sum(np.abs(np.diff(w.padded()) / w.grid.h) ** 3) * w.grid.h
    assert truncated_gradient_energy(w, 0.6, 3.0) == pytest.approx(full, rel=1e-12)
    assert truncated_gradient_energy(gf([0.0]), 1.0, 2.0) == 0.0


def test_truncated_energy_monotone_in_k():
    rng = np.random.default_rng(11)
    u = gf(rng.uniform(-3, 3, 31), 32)
    ks = [0.25, 0.5, 1.0, 2.0, 3.5, 10.0]
    energies = [truncated_gradient_energy(u, k, 2.0) for k in ks]
    assert np.all(np.diff(energies) >= -1e-12)
    assert energies[-1] == pytest.approx(
        truncated_gradient_energy(u, 100.0, 2.0), rel=1e-12)


def test_summation_by_parts():
    # integrate(v * p_laplacian(u)) == -h sum_e flux(D_e u) D_e v
    rng = np.random.default_rng(42)
    for p, eps in [(2.0, 0.0), (3.0, 0.0), (1.5, 0.2), (4.0, 0.0)]:
        for _ in range(5):
            u = gf(rng.standard_normal(23), 24, 1.5)
            v = gf(rng.standard_normal(23), 24, 1.5)
            lhs = inner(v, p_laplacian(u, p, eps))
            gu = gradient(u)
            gv = gradient(v)
            flux = np.sign(gu) * np.abs(gu) ** (p - 1) if eps == 0 else \
                (gu * gu + eps * eps) ** ((p - 2) / 2) * gu
            rhs = -u.grid.h * np.sum(flux * gv)
            assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-12)


def test_flux_monotonicity_pairing():
    rng = np.random.default_rng(9)
    for p, eps in [(2.0, 0.0), (3.0, 0.0), (1.5, 0.1)]:
        for _ in range(10):
            u = gf(rng.standard_normal(15) * 3, 16)
            v = gf(rng.standard_normal(15) * 3, 16)
            gu, gv = gradient(u), gradient(v)
            pairing = u.grid.h * np.sum(
                (p_flux(gu, p, eps) - p_flux(gv, p, eps)) * (gu - gv))
            assert pairing >= -1e-12


def test_p_flux_deriv_matches_fd():
    s = np.linspace(-4, 4, 801)
    s = s[np.abs(s) > 1e-3]
    for p, eps in [(2.0, 0.0), (3.0, 0.0), (1.5, 0.3), (4.0, 0.0)]:
        fd = (p_flux(s + 1e-6, p, eps) - p_flux(s - 1e-6, p, eps)) / 2e-6
        assert np.max(np.abs(fd - p_flux_deriv(s, p, eps))) < 1e-4


def test_default_eps_rule():
    assert default_eps(2.0) == 0.0
    assert default_eps(3.5) == 0.0
    assert default_eps(1.5, 10.0) == pytest.approx(1e-5)
    assert default_eps(1.5, 0.01) == pytest.approx(1e-6)
