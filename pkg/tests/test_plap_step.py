"""Implicit resolvent: hand solves, oracles, monotonicity properties."""

import numpy as np
import pytest
from scipy.linalg import solve_banded
from scipy.optimize import brentq

from plaplab.mesh import Grid1D, GridFunction, gradient, integrate, l1_norm
from plaplab.plap_step import (SolverFailure, SolverOptions, implicit_step,
                               step_residual)


def gf(values, n_cells=None, length=1.0):
    values = np.asarray(values, dtype=float)
    return GridFunction(Grid1D(n_cells or values.size + 1, length), values)


def test_linear_single_node_hand_solve():
    # one interior node, p = 2: w (1 + 2 dt/h^2) = g
    g = gf([1.0])  # h = 0.5
    dt = 0.125
    w = implicit_step(g, dt, 2.0)
    assert w.values[0] == pytest.approx(1.0 / (1.0 + 2.0 * dt / 0.25), rel=1e-12)
    assert w.values[0] == pytest.approx(0.5, rel=1e-12)


def test_p4_bisection_oracle():
    # p=4, one node, dt = h^4/2: the step equation reduces to w + w^3 = g
    g = gf([1.0])
    dt = 0.5 ** 4 / 2.0
    oracle = brentq(lambda w: w + w ** 3 - 1.0, 0.0, 1.0, xtol=1e-15)
    assert oracle == pytest.approx(0.682327803828019, abs=1e-12)
    w = implicit_step(g, dt, 4.0)
    assert w.values[0] == pytest.approx(oracle, abs=1e-9)


def test_zero_data_fixed_point():
    for p in (1.5, 2.0, 3.0, 4.0):
        eps = 0.1 if p < 2 else 0.0
        g = gf(np.zeros(15), 16)
        w = implicit_step(g, 0.01, p, eps)
        assert np.all(w.values == 0.0)


def test_step_residual_contract():
    rng = np.random.default_rng(1)
    g = gf(rng.standard_normal(31), 32)
    for p in (2.0, 3.0):
        w = implicit_step(g, 1e-3, p)
        tol = 1e-10 * (1.0 + np.sqrt(integrate(g, np.square)))
        assert step_residual(w, g, 1e-3, p) <= tol
    # an unsolved step has a visibly positive residual
    assert step_residual(g, g, 1e-3, 2.0) > 1e-3


def test_p2_matches_direct_tridiagonal_solve():
    rng = np.random.default_rng(2)
    n_cells = 32
    g = gf(rng.standard_normal(n_cells - 1), n_cells)
    dt, h = 2e-3, g.grid.h
    n = n_cells - 1
    # oracle: assemble (I + dt/h^2 K) w = g with K the Dirichlet Laplacian stencil
    a = dt / h ** 2
    ab = np.zeros((3, n))
    ab[0, 1:] = -a
    ab[1, :] = 1.0 + 2.0 * a
    ab[2, :-1] = -a
    direct = solve_banded((1, 1), ab, g.values)
    w = implicit_step(g, dt, 2.0)
    assert np.max(np.abs(w.values - direct)) <= 1e-10
    assert step_residual(gf(direct, n_cells), g, dt, 2.0) <= 1e-12


def test_l1_nonexpansive():
    rng = np.random.default_rng(3)
    opts = SolverOptions()
    for p in (2.0, 3.0, 1.5):
        eps = 0.05 if p < 2 else 0.0
        for _ in range(8):
            g1 = gf(rng.standard_normal(23) * 2, 24)
            g2 = gf(rng.standard_normal(23) * 2, 24)
            w1 = implicit_step(g1, 5e-3, p, eps, opts)
            w2 = implicit_step(g2, 5e-3, p, eps, opts)
            lhs = l1_norm(gf(w1.values - w2.values, 24))
            rhs = l1_norm(gf(g1.values - g2.values, 24))
            assert lhs <= rhs + 10 * opts.grad_tol


def test_order_preservation():
    rng = np.random.default_rng(4)
    for p in (2.0, 3.0):
        for _ in range(8):
            g1v = rng.standard_normal(15)
            g2v = g1v + rng.uniform(0.0, 1.0, 15)
            w1 = implicit_step(gf(g1v, 16), 2e-3, p)
            w2 = implicit_step(gf(g2v, 16), 2e-3, p)
            assert np.all(w2.values - w1.values >= -1e-9)


def _energy(wv, gv, dt, h, p, eps=0.0):
    e = np.diff(wv, prepend=0.0, append=0.0) / h
    return 0.5 * h * np.sum((wv - gv) ** 2) \
        + dt / p * h * np.sum((e * e + eps * eps) ** (p / 2))


def test_energy_decrease():
    rng = np.random.default_rng(5)
    for p in (2.0, 3.0, 4.0):
        g = gf(rng.standard_normal(31) * 3, 32)
        dt, h = 4e-3, g.grid.h
        w = implicit_step(g, dt, p)
        assert _energy(w.values, g.values, dt, h, p) \
            <= _energy(g.values, g.values, dt, h, p) + 1e-12


def test_objective_gradient_matches_finite_differences():
    rng = np.random.default_rng(6)
    g = rng.standard_normal(9)
    dt, h, p = 3e-3, 0.1, 3.0
    w = rng.standard_normal(9)
    # analytic gradient of J: h * (w - dt * p_laplacian(w) - g)
    e = np.diff(w, prepend=0.0, append=0.0) / h
    flux = np.sign(e) * np.abs(e) ** (p - 1)
    grad = h * (w - dt * np.diff(flux) / h - g)
    step = 1e-6
    for i in range(9):
        wp, wm = w.copy(), w.copy()
        wp[i] += step
        wm[i] -= step
        fd = (_energy(wp, g, dt, h, p) - _energy(wm, g, dt, h, p)) / (2 * step)
        assert fd == pytest.approx(grad[i], abs=1e-6)


def test_solver_failure_carries_state():
    rng = np.random.default_rng(7)
    g = gf(rng.standard_normal(31) * 50, 32)
    opts = SolverOptions(max_iter=1, grad_tol=1e-14)
    with pytest.raises(SolverFailure) as exc:
        implicit_step(g, 0.5, 4.0, 0.0, opts)
    assert exc.value.iterate.shape == (31,)
    assert exc.value.residual > 0


def test_input_validation():
    g = gf([1.0])
    with pytest.raises(ValueError):
        implicit_step(g, -1.0, 2.0)
    with pytest.raises(ValueError):
        implicit_step(g, 1e-3, 0.9)
    with pytest.raises(ValueError):
        implicit_step(g, 1e-3, 1.5, 0.0)  # p < 2 needs eps > 0
    with pytest.raises(ValueError):
        SolverOptions(armijo_c=2.0)
    with pytest.raises(ValueError):
        SolverOptions(backtrack=0.0)
