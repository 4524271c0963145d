"""Reduced-order model integration: Markovian term plus memory convolution."""

import numpy as np

from .dynamics import DivergenceError, Trajectory, n_steps
from .hermite import basis_eval_batch


def memory_term(history, kernels, n, dt):
    """Trapezoidal memory convolution at step n.

    history: (>= n+1, J) values h_j(phi_hat(t_m)); kernels: (>= n+1, J, N_rom).
    Returns sum_j int_0^{t_n} h_j(phi_hat(s)) K_j(t_n - s) ds, component-wise.
    """
    if kernels.shape[0] < n + 1:
        raise ValueError(f"kernel table covers {kernels.shape[0] - 1} lags, need {n}")
    if n == 0:
        return np.zeros(kernels.shape[2])
    w = np.full(n + 1, dt)
    w[0] = w[-1] = 0.5 * dt
    return np.einsum("m,mj,mjk->k", w, history[: n + 1], kernels[n::-1][: n + 1])


def integrate_rom(markovian, basis, scaling, kernels, xhat0, dt, t_final):
    """Midpoint-RK2 integration of the memory-augmented ROM.

    The memory term at t_n is computed once from the completed history and
    held fixed across both stages; the history record for t_{n+1} is appended
    after the step completes. ``dt`` must match the kernel-table grid.
    """
    if abs(dt - kernels.dt) > 1e-12 * max(dt, kernels.dt):
        raise ValueError(f"ROM dt {dt} must equal kernel-table dt {kernels.dt}")
    steps = n_steps(dt, t_final)
    ktab = kernels.kernels
    if ktab.shape[0] < steps + 1:
        raise ValueError("kernel table shorter than the requested horizon")
    xhat0 = np.asarray(xhat0, dtype=float)
    n_rom = xhat0.shape[0]
    n_basis = basis.size
    states = np.empty((steps + 1, n_rom))
    states[0] = xhat0
    history = np.empty((steps + 1, n_basis))
    history[0], _ = _basis_values(basis, xhat0, scaling)
    # Time-reversed history buffer: hist_rev[steps - m] = h(t_m). The slice
    # hist_rev[steps - n : steps + 1] then lists history by kernel lag, so the
    # convolution sum is one matrix-vector product against the kernel table
    # flattened along (lag, basis); trapezoid endpoints are corrected after.
    hist_rev = np.zeros((steps + 1, n_basis))
    hist_rev[steps] = history[0]
    k_flat = np.ascontiguousarray(ktab[: steps + 1]).reshape((steps + 1) * n_basis, n_rom)
    x = xhat0
    with np.errstate(over="ignore", invalid="ignore"):
        for n in range(steps):
            if n == 0:
                mem = np.zeros(n_rom)
            else:
                mem = dt * (hist_rev[steps - n:].reshape(-1) @ k_flat[: (n + 1) * n_basis])
                mem -= 0.5 * dt * (history[0] @ ktab[n] + history[n] @ ktab[0])
            k1 = markovian(x) + mem
            k2 = markovian(x + 0.5 * dt * k1) + mem
            x = x + dt * k2
            if not np.all(np.isfinite(x)):
                raise DivergenceError((n + 1) * dt)
            states[n + 1] = x
            history[n + 1], _ = _basis_values(basis, x, scaling)
            hist_rev[steps - n - 1] = history[n + 1]
    return Trajectory(dt * np.arange(steps + 1), states)


def _basis_values(basis, xhat, scaling):
    vals, grads = basis_eval_batch(basis, np.asarray(xhat)[None, :], scaling)
    return vals[0], grads[0]
