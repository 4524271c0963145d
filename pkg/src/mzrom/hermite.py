"""Probabilists' Gauss-Hermite quadrature and orthonormal tensor-product bases.

Conventions: weight function is the standard normal density
e^{-z^2/2} / sqrt(2*pi), polynomials are the probabilists' Hermite family
He_j normalized to unit norm, hhat_j = He_j / sqrt(j!).
"""

import math
from dataclasses import dataclass
from itertools import combinations_with_replacement

import numpy as np
from scipy.linalg import eigh_tridiagonal


@dataclass(frozen=True)
class QuadratureRule:
    """1-D Gauss-Hermite rule: probability weights, standard-normal nodes."""

    order: int
    nodes: np.ndarray
    weights: np.ndarray


@dataclass(frozen=True)
class ScalingParams:
    """Per-variable affine map x -> (x - mu) / sigma used by basis and ensembles."""

    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        mu = np.atleast_1d(np.asarray(self.mu, dtype=float))
        sigma = np.atleast_1d(np.asarray(self.sigma, dtype=float))
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)
        if mu.shape != sigma.shape:
            raise ValueError("mu and sigma must have the same length")
        if np.any(sigma <= 0):
            raise ValueError("all sigma entries must be strictly positive")


@dataclass(frozen=True)
class PolyBasis:
    """Orthonormal tensor-product Hermite basis, multi-indices in graded-lex order."""

    n_vars: int
    max_degree: int
    multi_indices: np.ndarray  # shape (J, n_vars), int

    @property
    def size(self):
        return self.multi_indices.shape[0]


def gauss_hermite_rule(n_q):
    """Nodes/weights of the N_q-point probabilists' Gauss-Hermite rule.

    Built from the symmetric tridiagonal Jacobi matrix of the three-term
    recurrence He_{j+1} = z He_j - j He_{j-1} (Golub-Welsch). Weights are
    probability weights (they sum to 1).
    """
    if n_q < 1:
        raise ValueError(f"quadrature order must be >= 1, got {n_q}")
    if n_q == 1:
        return QuadratureRule(1, np.zeros(1), np.ones(1))
    diag = np.zeros(n_q)
    offdiag = np.sqrt(np.arange(1, n_q, dtype=float))
    nodes, vecs = eigh_tridiagonal(diag, offdiag)
    weights = vecs[0, :] ** 2
    # enforce exact symmetry about the origin
    nodes = 0.5 * (nodes - nodes[::-1])
    weights = 0.5 * (weights + weights[::-1])
    weights /= weights.sum()
    return QuadratureRule(n_q, nodes, weights)


def hermite_poly(j, z):
    """Orthonormal probabilists' Hermite hhat_j at z: (value, derivative).

    Accepts scalar or array z. Derivative uses hhat_j'(z) = sqrt(j) hhat_{j-1}(z).
    """
    if j < 0:
        raise ValueError("degree must be non-negative")
    z = np.asarray(z, dtype=float)
    prev = np.ones_like(z)       # hhat_0
    if j == 0:
        return prev, np.zeros_like(z)
    cur = z.copy()               # hhat_1
    for m in range(1, j):
        prev, cur = cur, (z * cur - math.sqrt(m) * prev) / math.sqrt(m + 1)
    return cur, math.sqrt(j) * prev


def hermite_table(z, max_degree):
    """Values and derivatives of hhat_0..hhat_d at z, stacked on a new last axis.

    z: array of shape S. Returns (vals, ders) of shape S + (d+1,).
    """
    z = np.asarray(z, dtype=float)
    vals = np.empty(z.shape + (max_degree + 1,))
    ders = np.empty_like(vals)
    vals[..., 0] = 1.0
    ders[..., 0] = 0.0
    if max_degree >= 1:
        vals[..., 1] = z
        ders[..., 1] = 1.0
    for m in range(1, max_degree):
        vals[..., m + 1] = (z * vals[..., m] - math.sqrt(m) * vals[..., m - 1]) / math.sqrt(m + 1)
    for m in range(2, max_degree + 1):
        ders[..., m] = math.sqrt(m) * vals[..., m - 1]
    return vals, ders


def build_basis(n_vars, max_degree):
    """All multi-indices of total degree <= d in graded-lexicographic order."""
    if n_vars < 1:
        raise ValueError("n_vars must be >= 1")
    if max_degree < 0:
        raise ValueError("max_degree must be >= 0")
    count = math.comb(n_vars + max_degree, max_degree)
    if count > 10**7:
        raise ValueError(
            f"basis size C({n_vars}+{max_degree},{max_degree}) = {count} is too large"
        )
    indices = []
    for deg in range(max_degree + 1):
        # compositions of `deg` into n_vars parts, lexicographically by index tuple
        layer = []
        for combo in combinations_with_replacement(range(n_vars), deg):
            alpha = [0] * n_vars
            for pos in combo:
                alpha[pos] += 1
            layer.append(tuple(alpha))
        layer.sort(reverse=True)
        indices.extend(layer)
    out = np.array(indices, dtype=int).reshape(len(indices), n_vars)
    assert out.shape[0] == count
    return PolyBasis(n_vars, max_degree, out)


def basis_eval(basis, j, xhat, scaling):
    """Value and gradient of tensor basis function j at a single point xhat.

    Gradient carries the 1/sigma_i chain-rule factors of the affine argument map.
    """
    if not 0 <= j < basis.size:
        raise ValueError(f"basis index {j} out of range [0, {basis.size})")
    xhat = np.asarray(xhat, dtype=float)
    vals, grads = basis_eval_batch(basis, xhat[None, :], scaling)
    return vals[0, j], grads[0, j]


def basis_eval_batch(basis, xhat, scaling):
    """Evaluate all J basis functions and gradients at a batch of points.

    xhat: (E, n_vars). Returns values (E, J) and gradients (E, J, n_vars).
    """
    xhat = np.asarray(xhat, dtype=float)
    if not np.all(np.isfinite(xhat)):
        raise ValueError("non-finite evaluation point")
    z = (xhat - scaling.mu) / scaling.sigma  # (E, n)
    vals1d, ders1d = hermite_table(z, basis.max_degree)  # (E, n, d+1)
    alpha = basis.multi_indices  # (J, n)
    e_idx = np.arange(xhat.shape[0])[:, None, None]
    v_idx = np.arange(basis.n_vars)[None, None, :]
    factors = vals1d[e_idx, v_idx, alpha[None, :, :]]  # (E, J, n)
    values = factors.prod(axis=2)
    dfactors = ders1d[e_idx, v_idx, alpha[None, :, :]] / scaling.sigma  # (E, J, n)
    grads = np.empty_like(factors)
    for i in range(basis.n_vars):
        others = np.delete(factors, i, axis=2).prod(axis=2)
        grads[:, :, i] = dfactors[:, :, i] * others
    return values, grads
