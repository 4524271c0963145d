"""Integrator order, divergence detection, and RHS decomposition tests."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mzrom.dynamics import (DivergenceError, FullOrderSystem, markovian_rhs,
                            n_steps, noise_initial, rk_integrate, rk_step)


def decaying_oscillator():
    a = np.array([[0.0, 1.0], [-4.0, -0.4]])
    return FullOrderSystem(2, 1, lambda x: x @ a.T), a


def test_linear_system_matches_matrix_exponential():
    from scipy.linalg import expm

    system, a = decaying_oscillator()
    x0 = np.array([1.0, 0.0])
    traj = rk_integrate(system, x0, 1e-3, 2.0)
    exact = expm(2.0 * a) @ x0
    np.testing.assert_allclose(traj.states[-1], exact, atol=1e-9)


def observed_order(scheme):
    # scalar nonlinear problem x' = x - x^3 with dense reference
    rhs = lambda x: x - x**3
    system = FullOrderSystem(1, 1, rhs)
    x0 = np.array([0.25])
    ref = rk_integrate(system, x0, 1e-5, 1.0).states[-1, 0]
    errs = []
    for dt in (0.02, 0.01):
        val = rk_integrate(system, x0, dt, 1.0, scheme=scheme).states[-1, 0]
        errs.append(abs(val - ref))
    return np.log2(errs[0] / errs[1])


def test_rk4_convergence_order():
    assert 3.8 <= observed_order("rk4") <= 4.2


def test_rk2_convergence_order():
    assert 1.8 <= observed_order("rk2") <= 2.2


def test_unknown_scheme_rejected():
    with pytest.raises(ValueError):
        rk_step(lambda x: x, np.zeros(1), 0.1, "euler")


def test_divergence_raises_with_time():
    system = FullOrderSystem(1, 1, lambda x: x**2)
    with pytest.raises(DivergenceError) as err:
        rk_integrate(system, np.array([5.0]), 0.05, 10.0)
    assert 0.0 < err.value.time <= 10.0


def test_n_steps_validates_divisibility():
    assert n_steps(1e-3, 2.0) == 2000
    with pytest.raises(ValueError):
        n_steps(0.3, 1.0)


def test_trajectory_grid_is_uniform():
    system, _ = decaying_oscillator()
    traj = rk_integrate(system, np.array([1.0, 1.0]), 0.1, 1.0)
    np.testing.assert_allclose(np.diff(traj.times), 0.1)
    assert traj.dt == pytest.approx(0.1)


def coupled_cubic():
    def rhs(x):
        x1, x2 = x[..., 0], x[..., 1]
        return np.stack([x2 - x1**3, -x1 - 0.5 * x2], axis=-1)

    return FullOrderSystem(2, 1, rhs)


@given(st.floats(-3.0, 3.0))
def test_noise_vanishes_when_unresolved_part_is_zero(x1):
    system = coupled_cubic()
    np.testing.assert_allclose(noise_initial(system, np.array([x1, 0.0])), 0.0,
                               atol=1e-14)


@given(st.floats(-3.0, 3.0), st.floats(-3.0, 3.0))
def test_rhs_decomposition_is_exact(x1, x2):
    system = coupled_cubic()
    x = np.array([x1, x2])
    total = np.asarray(system.rhs(x))[:1]
    parts = markovian_rhs(system, x[:1]) + noise_initial(system, x)
    np.testing.assert_allclose(parts, total, rtol=1e-12, atol=1e-12)


def test_markovian_rhs_is_batched():
    system = coupled_cubic()
    xs = np.linspace(-1, 1, 5)[:, None]
    batch = markovian_rhs(system, xs)
    singles = np.stack([markovian_rhs(system, row) for row in xs])
    np.testing.assert_array_equal(batch, singles)


def test_system_validates_resolved_count():
    with pytest.raises(ValueError):
        FullOrderSystem(2, 3, lambda x: x)
