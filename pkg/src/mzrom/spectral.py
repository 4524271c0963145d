"""Fourier pseudospectral viscous Burgers' solver and spectral utilities.

Convention: a real periodic field on [0, 2*pi) is represented by its
non-negative Fourier coefficients theta_k, u(z) = sum_k theta_k e^{ikz} with
theta_{-k} = conj(theta_k); numerically theta = rfft(u) / n_grid. All array
operations are batched over leading axes.
"""

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import DivergenceError, n_steps


@dataclass(frozen=True)
class SpectralState:
    """Reality-constrained spectral snapshot of a periodic field."""

    theta: np.ndarray  # complex, length n_grid // 2 + 1
    n_grid: int

    def __post_init__(self):
        if self.n_grid & (self.n_grid - 1):
            raise ValueError("grid size must be a power of two")
        if self.theta.shape[-1] != self.n_grid // 2 + 1:
            raise ValueError("coefficient count must be n_grid // 2 + 1")

    @classmethod
    def from_field(cls, u):
        u = np.asarray(u, dtype=float)
        return cls(to_spectral(u), u.shape[-1])

    def field(self):
        return to_physical(self.theta, self.n_grid)


def grid(n_grid):
    return 2.0 * np.pi * np.arange(n_grid) / n_grid


def to_spectral(u):
    return np.fft.rfft(u, axis=-1) / u.shape[-1]


def to_physical(theta, n_grid):
    return np.fft.irfft(theta * n_grid, n=n_grid, axis=-1)


def dealias_filter(n_coeff, alpha=36.0, p=36.0):
    """Exponential spectral filter exp(-alpha (|k|/k_max)^p) on rfft modes."""
    k = np.arange(n_coeff, dtype=float)
    return np.exp(-alpha * (k / k[-1]) ** p)


def burgers_rhs(theta, nu, filt=None):
    """Pseudospectral RHS of viscous Burgers': -(ik/2) [u^2]_k - nu k^2 theta_k.

    The quadratic product is formed on the physical grid and passed through
    the dealiasing filter (identity when filt is None).
    """
    n_coeff = theta.shape[-1]
    n_grid = 2 * (n_coeff - 1)
    k = np.arange(n_coeff, dtype=float)
    u = to_physical(theta, n_grid)
    usq_hat = to_spectral(u * u)
    if filt is not None:
        usq_hat = usq_hat * filt
    out = -0.5j * k * usq_hat - nu * k**2 * theta
    out[..., -1] = out[..., -1].real  # Nyquist stays real
    return out


def alias_free_product(theta_a, theta_b, n_out):
    """Exact Fourier coefficients of a pointwise product via zero padding.

    Returns the first n_out coefficients of a*b; exact because the padded
    grid resolves the combined band of the factors.
    """
    band = (theta_a.shape[-1] - 1) + (theta_b.shape[-1] - 1)
    n_pad = 2 * band + 2
    ua = to_physical(_pad(theta_a, n_pad // 2 + 1), n_pad)
    ub = to_physical(_pad(theta_b, n_pad // 2 + 1), n_pad)
    return to_spectral(ua * ub)[..., :n_out]


def _pad(theta, n_coeff):
    out = np.zeros(theta.shape[:-1] + (n_coeff,), dtype=complex)
    out[..., : theta.shape[-1]] = theta
    return out


def burgers_rhs_exact(theta, nu, n_out=None):
    """Alias-free Burgers' RHS (padded convolution); oracle-grade, unfiltered."""
    n_coeff = theta.shape[-1]
    n_out = n_coeff if n_out is None else n_out
    usq_hat = alias_free_product(theta, theta, n_out)
    k = np.arange(n_out, dtype=float)
    return -0.5j * k * usq_hat - nu * k**2 * theta[..., :n_out]


def project_lowpass(theta, cutoff):
    """Zero all coefficients with |k| > cutoff."""
    if cutoff < 0 or cutoff > theta.shape[-1] - 1:
        raise ValueError(f"cutoff {cutoff} outside [0, {theta.shape[-1] - 1}]")
    out = theta.copy()
    out[..., cutoff + 1 :] = 0.0
    return out


def sample_initial_condition(band_limit, seed, n_grid=256):
    """Random trigonometric initial condition with 1/(1+l^2) coefficient decay.

    u0(z) = sum_{l<=L} a_l cos(lz) + b_l sin(lz), a_l, b_l ~ unif(-1,1)/(1+l^2),
    drawn from a seeded generator; deterministic given (band_limit, seed).
    """
    if band_limit > n_grid // 2:
        raise ValueError("band limit exceeds the grid Nyquist mode")
    rng = np.random.default_rng(seed)
    ls = np.arange(band_limit + 1, dtype=float)
    a = rng.uniform(-1.0, 1.0, band_limit + 1) / (1.0 + ls**2)
    b = rng.uniform(-1.0, 1.0, band_limit + 1) / (1.0 + ls**2)
    theta = np.zeros(n_grid // 2 + 1, dtype=complex)
    theta[0] = a[0]
    theta[1 : band_limit + 1] = 0.5 * (a[1:] - 1j * b[1:])
    return SpectralState(theta, n_grid)


def reduce_zero_mode(theta):
    """Split off the (conserved) mean: returns (mean, zero-mean coefficients)."""
    mean = float(theta[..., 0].real)
    w = theta.copy()
    w[..., 0] = 0.0
    return mean, w


def reconstruct_with_mean(mean, w_theta, t):
    """Undo the zero-mode reduction: u(t,z) = mean + w(t, z - t*mean)."""
    k = np.arange(w_theta.shape[-1], dtype=float)
    out = w_theta * np.exp(-1j * k * t * mean)
    out[..., 0] = mean
    return out


def solve_burgers(theta0, nu, dt, t_final, scheme="rk4", sample_stride=1, filt=None):
    """Integrate the pseudospectral system, recording every sample_stride steps.

    Returns (times, thetas) with thetas of shape (n_samples+1, ..., n_coeff).
    """
    from .dynamics import rk_step

    steps = n_steps(dt, t_final)
    if steps % sample_stride != 0:
        raise ValueError("sample_stride must divide the step count")
    if filt is None:
        filt = dealias_filter(theta0.shape[-1])

    def rhs(th):
        return burgers_rhs(th, nu, filt)

    theta = np.array(theta0, dtype=complex)
    out = np.empty((steps // sample_stride + 1,) + theta.shape, dtype=complex)
    out[0] = theta
    with np.errstate(over="ignore", invalid="ignore"):
        for step in range(1, steps + 1):
            theta = rk_step(rhs, theta, dt, scheme)
            if step % sample_stride == 0:
                if not np.all(np.isfinite(theta)):
                    raise DivergenceError(step * dt)
                out[step // sample_stride] = theta
    times = dt * sample_stride * np.arange(out.shape[0])
    return times, out


def l2_norm(theta):
    """L2([0, 2*pi)) norm of the field from its coefficients (Parseval)."""
    sq = np.abs(theta[..., 0]) ** 2 + 2.0 * np.sum(np.abs(theta[..., 1:]) ** 2, axis=-1)
    return np.sqrt(2.0 * np.pi * sq)


def real_imag_rhs(phi, psi, nu, cutoff=None):
    """Direct convolution-sum RHS for the real/imag mode amplitudes.

    phi, psi: arrays (..., B) holding modes 1..B with the zero mode excluded
    (phi_{-k} = phi_k, psi_{-k} = -psi_k implied). With cutoff=M the pair sums
    are restricted to |p|, |q| <= M, giving the truncated Markovian terms;
    cutoff=None keeps all pairs. Returns (dphi, dpsi) for modes 1..B.
    """
    phi = np.asarray(phi, dtype=float)
    psi = np.asarray(psi, dtype=float)
    band = phi.shape[-1]
    lim = band if cutoff is None else min(cutoff, band)
    # signed-index extensions on p = -band .. band
    x = np.concatenate([phi[..., ::-1], np.zeros(phi.shape[:-1] + (1,)), phi], axis=-1)
    y = np.concatenate([-psi[..., ::-1], np.zeros(psi.shape[:-1] + (1,)), psi], axis=-1)
    if lim < band:
        mask = np.abs(np.arange(-band, band + 1)) <= lim
        x = np.where(mask, x, 0.0)
        y = np.where(mask, y, 0.0)
    dphi = np.empty_like(phi)
    dpsi = np.empty_like(psi)
    for k in range(1, band + 1):
        ps = np.arange(max(-lim, k - lim), min(lim, k + lim) + 1)
        xp = x[..., ps + band]
        yp = y[..., ps + band]
        xq = x[..., (k - ps) + band]
        yq = y[..., (k - ps) + band]
        conv_xy = np.sum(xp * yq, axis=-1)
        conv_xx_yy = np.sum(xp * xq - yp * yq, axis=-1)
        dphi[..., k - 1] = k * conv_xy - nu * k**2 * phi[..., k - 1]
        dpsi[..., k - 1] = -0.5 * k * conv_xx_yy - nu * k**2 * psi[..., k - 1]
    return dphi, dpsi


def theta_from_parts(phi, psi, n_coeff):
    """Assemble rfft coefficients from positive-mode real/imag parts (zero mean)."""
    band = phi.shape[-1]
    theta = np.zeros(phi.shape[:-1] + (n_coeff,), dtype=complex)
    theta[..., 1 : band + 1] = phi + 1j * psi
    return theta


def parts_from_theta(theta, band):
    """Extract (phi, psi) for modes 1..band from rfft coefficients."""
    block = theta[..., 1 : band + 1]
    return block.real.copy(), block.imag.copy()
