"""Full-order ODE systems, explicit Runge-Kutta integration, RHS decomposition.

Resolved variables occupy the first ``n_resolved`` components of the state
vector. RHS callables must accept batched input of shape (..., N).
"""

from dataclasses import dataclass, field
from typing import Callable

import numpy as np


class DivergenceError(RuntimeError):
    """Trajectory left the finite range; carries the blow-up time."""

    def __init__(self, time, member=None):
        self.time = time
        self.member = member
        where = f" (ensemble member {member})" if member is not None else ""
        super().__init__(f"non-finite state at t = {time:.6g}{where}")


class NumericalFailureError(RuntimeError):
    """Linear-algebra failure (singular or ill-conditioned step matrix)."""


@dataclass(frozen=True)
class FullOrderSystem:
    dimension: int
    n_resolved: int
    rhs: Callable = field(compare=False)

    def __post_init__(self):
        if not 1 <= self.n_resolved <= self.dimension:
            raise ValueError("need 1 <= n_resolved <= dimension")


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray   # (N_t+1,), uniform
    states: np.ndarray  # (N_t+1, N)

    @property
    def dt(self):
        return self.times[1] - self.times[0] if len(self.times) > 1 else 0.0


def n_steps(dt, t_final):
    steps = int(round(t_final / dt))
    if abs(steps * dt - t_final) > 1e-9 * max(1.0, t_final):
        raise ValueError(f"T = {t_final} is not an integer multiple of dt = {dt}")
    return steps


def rk_step(rhs, x, dt, scheme):
    """One explicit step; 'rk2' is the midpoint rule, 'rk4' is classical."""
    if scheme == "rk4":
        k1 = rhs(x)
        k2 = rhs(x + 0.5 * dt * k1)
        k3 = rhs(x + 0.5 * dt * k2)
        k4 = rhs(x + dt * k3)
        return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if scheme == "rk2":
        k1 = rhs(x)
        k2 = rhs(x + 0.5 * dt * k1)
        return x + dt * k2
    raise ValueError(f"unknown scheme {scheme!r}")


def rk_integrate(system, x0, dt, t_final, scheme="rk4"):
    """Integrate and record every step on the uniform grid 0..T."""
    x0 = np.asarray(x0, dtype=float)
    if not np.all(np.isfinite(x0)):
        raise ValueError("initial condition must be finite")
    if dt <= 0 or t_final <= 0:
        raise ValueError("dt and T must be positive")
    steps = n_steps(dt, t_final)
    states = np.empty((steps + 1, x0.shape[-1]))
    states[0] = x0
    x = x0
    with np.errstate(over="ignore", invalid="ignore"):
        for n in range(1, steps + 1):
            x = rk_step(system.rhs, x, dt, scheme)
            if not np.all(np.isfinite(x)):
                raise DivergenceError(n * dt)
            states[n] = x
    return Trajectory(dt * np.arange(steps + 1), states)


def markovian_rhs(system, xhat):
    """Resolved RHS with unresolved variables set to zero: Rcheck(xhat) = R(xhat, 0)."""
    xhat = np.asarray(xhat, dtype=float)
    full = np.zeros(xhat.shape[:-1] + (system.dimension,))
    full[..., : system.n_resolved] = xhat
    return np.asarray(system.rhs(full))[..., : system.n_resolved]


def noise_initial(system, x):
    """Initial noise value: resolved RHS minus its Markovian part."""
    x = np.asarray(x, dtype=float)
    xhat = x[..., : system.n_resolved]
    return np.asarray(system.rhs(x))[..., : system.n_resolved] - markovian_rhs(system, xhat)
