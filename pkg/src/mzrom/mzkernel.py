"""Ensemble generation, correlation tables f/g, and the Volterra kernel solve.

The memory kernels K_{jk}(t) solve
    K(t) = f(t) - int_0^t G(t-s) K(s) ds,
with f_{lk}(t) = <h_l, e^{tL} L A_k(0)> and g_{lj}(t) = <h_l, e^{tL} L h_j>,
the inner products taken over the Gaussian ensemble of initial conditions
(unresolved variables zero) via tensor Gauss-Hermite quadrature.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .dynamics import DivergenceError, NumericalFailureError, n_steps, rk_step
from .hermite import PolyBasis, QuadratureRule, ScalingParams, basis_eval_batch


@dataclass(frozen=True)
class EnsembleGrid:
    rule: QuadratureRule
    scaling: ScalingParams
    member_ics: np.ndarray      # (E, N), unresolved entries zero
    member_weights: np.ndarray  # (E,), sums to 1
    n_resolved: int


@dataclass(frozen=True)
class CorrelationTables:
    dt: float
    f: np.ndarray  # (N_t+1, J, N_rom)
    g: np.ndarray  # (N_t+1, J, J)
    gram: np.ndarray = None  # (J, J) empirical basis Gram matrix, or None


@dataclass(frozen=True)
class KernelTable:
    dt: float
    kernels: np.ndarray  # (N_t+1, J, N_rom)
    basis: PolyBasis
    scaling: ScalingParams


def ensemble_grid(rule, scaling, n_resolved, dimension):
    """Tensor-product quadrature grid of initial conditions.

    Member k of the tensor index gets resolved component i equal to
    mu_i + sigma_i * node, unresolved components zero. Member order is the
    C-order walk of the tensor index (first variable slowest), which fixes
    the reduction order everywhere downstream.
    """
    if dimension < n_resolved:
        raise ValueError("dimension must be >= n_resolved")
    if len(scaling.mu) != n_resolved:
        raise ValueError("scaling length must equal n_resolved")
    n_members = rule.order**n_resolved
    if n_members > 10**7:
        raise ValueError(f"ensemble size {rule.order}^{n_resolved} = {n_members} too large")
    grids = np.meshgrid(*([rule.nodes] * n_resolved), indexing="ij")
    nodes = np.stack([grid.reshape(-1) for grid in grids], axis=1)  # (E, n_rom)
    wgrids = np.meshgrid(*([rule.weights] * n_resolved), indexing="ij")
    weights = np.ones(n_members)
    for wgrid in wgrids:
        weights = weights * wgrid.reshape(-1)
    ics = np.zeros((n_members, dimension))
    ics[:, :n_resolved] = scaling.mu + scaling.sigma * nodes
    return EnsembleGrid(rule, scaling, ics, weights, n_resolved)


def compute_correlations(system, ensemble, basis, la0_observable, dt, t_final,
                         scheme="rk4", sample_stride=1):
    """Correlation tables f_{lk}(t_n), g_{lj}(t_n) along ensemble trajectories.

    All members are advanced together as one batched state (E, N) with step
    ``dt``; observables are accumulated every ``sample_stride`` steps, so the
    tables live on the coarser grid dt * sample_stride and no trajectory
    history is stored. ``la0_observable`` evaluates L A_k(0; .) on full states,
    batched: (E, N) -> (E, N_rom).
    """
    steps = n_steps(dt, t_final)
    if steps % sample_stride != 0:
        raise ValueError("sample_stride must divide the step count")
    n_rom = ensemble.n_resolved
    n_samples = steps // sample_stride
    dt_table = dt * sample_stride

    x = ensemble.member_ics.copy()
    h0, _ = basis_eval_batch(basis, x[:, :n_rom], ensemble.scaling)  # (E, J)
    h0w = h0 * ensemble.member_weights[:, None]                      # (E, J)

    f = np.empty((n_samples + 1, basis.size, n_rom))
    g = np.empty((n_samples + 1, basis.size, basis.size))

    def accumulate(n, state):
        la0 = np.asarray(la0_observable(state))                       # (E, n_rom)
        rhat = np.asarray(system.rhs(state))[:, :n_rom]               # (E, n_rom)
        _, grads = basis_eval_batch(basis, state[:, :n_rom], ensemble.scaling)
        gdot = np.einsum("eji,ei->ej", grads, rhat)                   # (E, J)
        f[n] = h0w.T @ la0
        g[n] = h0w.T @ gdot

    accumulate(0, x)
    with np.errstate(over="ignore", invalid="ignore"):
        for step in range(1, steps + 1):
            x = rk_step(system.rhs, x, dt, scheme)
            if step % sample_stride == 0:
                bad = ~np.all(np.isfinite(x), axis=1)
                if np.any(bad):
                    raise DivergenceError(step * dt, member=int(np.argmax(bad)))
                accumulate(step // sample_stride, x)
    return CorrelationTables(dt_table, f, g, h0w.T @ h0)


def solve_volterra(tables):
    """Solve the trapezoidal discretization of the kernel Volterra equation.

    Gamma K(t_0) = f(t_0); for n >= 1,
        (Gamma + dt/2 G(0)) K(t_n) = f(t_n) - dt/2 G(t_n) K(t_0)
                                      - dt sum_{m=1}^{n-1} G(t_n - t_m) K(t_m),
    where Gamma is the empirical Gram matrix of the basis under the quadrature
    measure. For resolved quadrature Gamma is the identity and this is the
    textbook second-kind equation; for under-resolved quadrature the basis is
    not empirically orthonormal (Gamma can even be rank-deficient), and using
    Gamma keeps the projection consistent with the measure that produced the
    tables. Rank deficiency is handled by solving inside the resolvable
    subspace and mapping back.
    """
    if tables.gram is not None:
        deviation = np.abs(tables.gram - np.eye(tables.gram.shape[0])).max()
        if deviation > 1e-8:
            return _solve_volterra_gram(tables)
    f, g, dt = tables.f, tables.g, tables.dt
    n_t, n_basis, n_rom = f.shape[0] - 1, f.shape[1], f.shape[2]
    lhs = np.eye(n_basis) + 0.5 * dt * g[0]
    cond = np.linalg.cond(lhs)
    if not np.isfinite(cond) or cond > 1e12:
        raise NumericalFailureError(f"step matrix condition {cond:.3g} exceeds 1e12 at n=0")
    lu = lu_factor(lhs)
    kernels = np.empty_like(f)
    kernels[0] = f[0]
    # The step-n convolution sum pairs G(t_n - t_m) with K(t_m). Laying G out
    # as (l, m, j) and K time-reversed makes both per-step operands contiguous
    # views, so the whole sum is one matrix product:
    #   sum_{m=1}^{n-1} G[n-m] K[m] = G_t[:, 1:n, :] . K_rev[n_t-n+1 : n_t]
    g_t = np.ascontiguousarray(np.transpose(g, (1, 0, 2)))
    k_rev = np.zeros((n_t, n_basis, n_rom))
    for n in range(1, n_t + 1):
        rhs = f[n] - 0.5 * dt * g[n] @ kernels[0]
        if n > 1:
            conv = g_t[:, 1:n, :].reshape(n_basis, (n - 1) * n_basis) @ \
                k_rev[n_t - n + 1:n_t].reshape((n - 1) * n_basis, n_rom)
            rhs -= dt * conv
        kernels[n] = lu_solve(lu, rhs)
        if not np.all(np.isfinite(kernels[n])):
            raise NumericalFailureError(f"non-finite kernel values at step {n}")
        if n < n_t:
            k_rev[n_t - n] = kernels[n]
    return kernels


def _solve_volterra_gram(tables):
    """Gram-weighted Volterra solve inside the resolvable subspace.

    The Gram eigenvectors with non-negligible eigenvalues span the polynomials
    the quadrature ensemble can distinguish; the equation is solved in that
    subspace with the Gram as the leading operator and the solution is mapped
    back to full basis coordinates (components outside the span are zero).
    """
    evals, evecs = np.linalg.eigh(tables.gram)
    keep = evals > 1e-10 * evals.max()
    p = evecs[:, keep]
    reduced = CorrelationTables(
        tables.dt,
        np.einsum("jr,njk->nrk", p, tables.f),
        np.einsum("jr,njl,ls->nrs", p, tables.g, p),
    )
    f, g, dt = reduced.f, reduced.g, reduced.dt
    gram = p.T @ tables.gram @ p
    n_t, n_basis, n_rom = f.shape[0] - 1, f.shape[1], f.shape[2]
    lhs = gram + 0.5 * dt * g[0]
    cond = np.linalg.cond(lhs)
    if not np.isfinite(cond) or cond > 1e12:
        raise NumericalFailureError(f"step matrix condition {cond:.3g} exceeds 1e12 at n=0")
    lu = lu_factor(lhs)
    kernels = np.empty_like(f)
    kernels[0] = np.linalg.solve(gram, f[0])
    g_t = np.ascontiguousarray(np.transpose(g, (1, 0, 2)))
    k_rev = np.zeros((n_t, n_basis, n_rom))
    for n in range(1, n_t + 1):
        rhs = f[n] - 0.5 * dt * g[n] @ kernels[0]
        if n > 1:
            conv = g_t[:, 1:n, :].reshape(n_basis, (n - 1) * n_basis) @ \
                k_rev[n_t - n + 1:n_t].reshape((n - 1) * n_basis, n_rom)
            rhs -= dt * conv
        kernels[n] = lu_solve(lu, rhs)
        if not np.all(np.isfinite(kernels[n])):
            raise NumericalFailureError(f"non-finite kernel values at step {n}")
        if n < n_t:
            k_rev[n_t - n] = kernels[n]
    return np.einsum("jr,nrk->njk", p, kernels)


def compute_kernels(tables, basis, scaling):
    """Convenience wrapper returning a provenance-carrying KernelTable."""
    return KernelTable(tables.dt, solve_volterra(tables), basis, scaling)


def subtable(tables, n_basis):
    """Restrict correlation tables to the leading n_basis basis functions.

    Valid because graded-lex ordering makes every lower-degree basis a prefix
    of a higher-degree one over the same variables.
    """
    gram = None if tables.gram is None else tables.gram[:n_basis, :n_basis]
    return CorrelationTables(tables.dt, tables.f[:, :n_basis, :],
                             tables.g[:, :n_basis, :n_basis], gram)


def save_kernel_table(path, table):
    """Write a kernel table as a self-describing .npz archive."""
    np.savez(
        path,
        format_version=np.int64(1),
        dt=np.float64(table.dt),
        kernels=table.kernels,
        n_vars=np.int64(table.basis.n_vars),
        max_degree=np.int64(table.basis.max_degree),
        multi_indices=table.basis.multi_indices,
        mu=table.scaling.mu,
        sigma=table.scaling.sigma,
    )


def load_kernel_table(path):
    with np.load(path) as data:
        basis = PolyBasis(int(data["n_vars"]), int(data["max_degree"]),
                          data["multi_indices"])
        scaling = ScalingParams(data["mu"], data["sigma"])
        return KernelTable(float(data["dt"]), data["kernels"], basis, scaling)
