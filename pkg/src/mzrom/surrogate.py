"""Coupled PDE-ML system: dense surrogate for the diffusion term, rollout
training with a hand-written adjoint, and the low-pass stability experiment.

The surrogate network N[w] maps grid values to grid values through one hidden
tanh layer (two weight layers). The coupled dynamics are
    w_t   = d/dz(-w^2/2 + nu N[w])                   (unfiltered)
    phi_t = d/dz(-P_M[phi^2]/2 + nu P_M[N[phi]])     (low-pass stabilized)
with the spectral derivative carrying the usual exponential dealiasing filter.
Training minimizes the squared rollout error of midpoint-RK2 steps against
reference snapshots; gradients are reverse-mode through the unrolled steps.
The derivative-with-multiplier operator is a real circulant, so its transpose
is the operator with the conjugate multiplier (= its negative here), which is
what the backward passes use.
"""

from dataclasses import dataclass, replace

import numpy as np

from .dynamics import n_steps
from .spectral import dealias_filter, sample_initial_condition, solve_burgers, to_physical


@dataclass
class SurrogateNet:
    w1: np.ndarray  # (hidden, n_grid)
    b1: np.ndarray
    w2: np.ndarray  # (n_grid, hidden)
    b2: np.ndarray
    activation: str = "tanh"
    seed: int = 0

    @property
    def n_grid(self):
        return self.w1.shape[1]

    def params(self):
        return [self.w1, self.b1, self.w2, self.b2]


def init_net(n_grid=256, hidden=512, seed=0, scale=1.0):
    """Random net; ``scale`` < 1 shrinks the input layer (and grows the output
    layer to compensate) so the tanh units start near their linear regime."""
    rng = np.random.default_rng(seed)
    w1 = rng.normal(0.0, scale / np.sqrt(n_grid), (hidden, n_grid))
    w2 = rng.normal(0.0, 1.0 / (scale * np.sqrt(hidden)), (n_grid, hidden))
    return SurrogateNet(w1, np.zeros(hidden), w2, np.zeros(n_grid), seed=seed)


def zero_net(n_grid=256, hidden=512):
    return SurrogateNet(np.zeros((hidden, n_grid)), np.zeros(hidden),
                        np.zeros((n_grid, hidden)), np.zeros(n_grid))


def net_apply(net, w):
    """N[w] on grid values; batched over leading axes of w."""
    h = np.tanh(w @ net.w1.T + net.b1)
    return h @ net.w2.T + net.b2


def deriv_multiplier(n_grid, cutoff=None):
    """rfft multiplier of the (filtered, optionally band-limited) d/dz."""
    n_coeff = n_grid // 2 + 1
    m = 1j * np.arange(n_coeff) * dealias_filter(n_coeff)
    if cutoff is not None:
        m = m.copy()
        m[cutoff + 1 :] = 0.0
    m[-1] = 0.0  # Nyquist derivative is ambiguous; drop it
    return m


def apply_multiplier(v, mult):
    n_grid = 2 * (mult.shape[0] - 1)
    return np.fft.irfft(mult * np.fft.rfft(v, axis=-1), n=n_grid, axis=-1)


def surrogate_rhs(w, net, nu, mult=None):
    """w_t = d/dz(-w^2/2 + nu N[w]) on grid values (divergence form)."""
    if mult is None:
        mult = deriv_multiplier(w.shape[-1])
    return apply_multiplier(-0.5 * w * w + nu * net_apply(net, w), mult)


def filtered_surrogate_rhs(w, net, nu, cutoff, mult=None):
    """Low-pass stabilized variant: both bracket terms projected to |k| <= M."""
    if mult is None:
        mult = deriv_multiplier(w.shape[-1], cutoff)
    return apply_multiplier(-0.5 * w * w + nu * net_apply(net, w), mult)


# ---------------------------------------------------------------------------
# hand-written adjoint of the unrolled RK2 rollout


def _rhs_fwd(net, nu, mult, w):
    h = np.tanh(w @ net.w1.T + net.b1)
    bracket = -0.5 * w * w + nu * (h @ net.w2.T + net.b2)
    return apply_multiplier(bracket, mult), h


def _rhs_bwd(net, nu, mult, w, h, gbar, grads):
    """Accumulate parameter gradients; return the input cotangent."""
    bbar = apply_multiplier(gbar, -mult)          # transpose of the derivative op
    nwbar = nu * bbar
    grads[3] += nwbar.sum(axis=0)
    grads[2] += nwbar.T @ h
    hbar = nwbar @ net.w2
    abar = (1.0 - h * h) * hbar
    grads[1] += abar.sum(axis=0)
    grads[0] += abar.T @ w
    return -w * bbar + abar @ net.w1


def _step_fwd(net, nu, mult, w, dt):
    k1, h1 = _rhs_fwd(net, nu, mult, w)
    mid = w + 0.5 * dt * k1
    k2, h2 = _rhs_fwd(net, nu, mult, mid)
    return w + dt * k2, (w, h1, mid, h2)


def _step_bwd(net, nu, mult, cache, dt, wbar_next, grads):
    w, h1, mid, h2 = cache
    midbar = _rhs_bwd(net, nu, mult, mid, h2, dt * wbar_next, grads)
    wbar = wbar_next + midbar
    wbar += _rhs_bwd(net, nu, mult, w, h1, 0.5 * dt * midbar, grads)
    return wbar


def rollout_loss_and_grad(net, nu, windows, dt, mult=None, rollout_steps=None):
    """Mean-squared rollout error and its gradient w.r.t. the net parameters.

    windows: (W, n_snap, n_grid) reference snapshots spaced dt apart; each
    window is advanced n_snap-1 RK2 steps from its first snapshot (or
    rollout_steps, for the teacher-forcing-style short rollout).
    """
    if mult is None:
        mult = deriv_multiplier(windows.shape[-1])
    steps = windows.shape[1] - 1 if rollout_steps is None else rollout_steps
    grads = [np.zeros_like(p) for p in net.params()]
    if windows.shape[0] == 0 or steps == 0:
        return 0.0, grads
    scale = 1.0 / (windows.shape[0] * steps * windows.shape[2])
    state = windows[:, 0, :]
    caches, resids = [], []
    loss = 0.0
    for n in range(1, steps + 1):
        state, cache = _step_fwd(net, nu, mult, state, dt)
        caches.append(cache)
        resid = state - windows[:, n, :]
        resids.append(resid)
        loss += scale * np.sum(resid * resid)
    wbar = np.zeros_like(state)
    for n in range(steps, 0, -1):
        wbar = wbar + 2.0 * scale * resids[n - 1]
        wbar = _step_bwd(net, nu, mult, caches[n - 1], dt, wbar, grads)
    return loss, grads


# ---------------------------------------------------------------------------
# training


@dataclass
class TrainConfig:
    n_ics: int = 8
    n_windows: int = 32          # per initial condition
    band_limit: int = 24
    window_span: float = 4.0     # window start times lie in [0, span]
    dt_snap: float = 1e-3
    n_snap: int = 11
    dt_ref: float = 1e-4
    n_grid: int = 256
    n_grid_ref: int = 512
    hidden: int = 512
    nu: float = 0.1
    iterations: int = 150
    learning_rate: float = 2e-3
    batch_size: int = 0          # 0 -> full batch
    lr_decay: bool = False       # cosine decay of the step size to zero
    rollout_steps: int = 0       # 0 -> full window rollout
    init_scale: float = 1.0      # < 1 starts the tanh units near-linear
    ls_init: bool = False        # least-squares output-layer initialization
    seed: int = 0


def build_training_set(config):
    """Reference-solver snapshot windows: (n_ics * n_windows, n_snap, n_grid).

    All initial conditions are advanced together by the high-resolution
    reference solver; snapshots are spectrally truncated to the surrogate grid.
    """
    rng = np.random.default_rng(config.seed)
    ic_seeds = rng.integers(0, 2**31 - 1, config.n_ics)
    theta0 = np.stack([
        sample_initial_condition(config.band_limit, int(s), config.n_grid_ref).theta
        for s in ic_seeds
    ])
    stride = int(round(config.dt_snap / config.dt_ref))
    horizon = config.window_span + (config.n_snap - 1) * config.dt_snap
    horizon = round(horizon / config.dt_snap) * config.dt_snap
    _, thetas = solve_burgers(theta0, config.nu, config.dt_ref, horizon,
                              scheme="rk4", sample_stride=stride)
    # (n_samples+1, n_ics, n_coeff) -> physical snapshots on the coarse grid
    n_coeff = config.n_grid // 2 + 1
    fields = to_physical(thetas[:, :, :n_coeff], config.n_grid)
    n_starts = int(round(config.window_span / config.dt_snap))
    windows = np.empty((config.n_ics * config.n_windows, config.n_snap, config.n_grid))
    idx = 0
    for i in range(config.n_ics):
        starts = rng.integers(0, n_starts + 1, config.n_windows)
        for s in starts:
            windows[idx] = fields[s : s + config.n_snap, i, :]
            idx += 1
    return windows


class TrainingFailureError(RuntimeError):
    pass


def _ls_output_init(net, windows):
    """Initialize the output layer by ridge regression of the hidden features
    onto the snapshots' derivative flux.

    In divergence form the diffusion enters as d/dz(nu N[w]), so the ideal
    surrogate output on the data manifold is w_z, which is computable from the
    snapshots themselves. Fitting only the output layer is a closed-form,
    well-conditioned problem, whereas first-order steps on the rollout loss
    stall orders of magnitude short of the representable accuracy.
    """
    snaps = windows.reshape(-1, windows.shape[-1])
    targets = apply_multiplier(snaps, deriv_multiplier(snaps.shape[-1]))
    h = np.tanh(snaps @ net.w1.T + net.b1)
    feats = np.concatenate([h, np.ones((h.shape[0], 1))], axis=1)
    normal = feats.T @ feats
    ridge = 1e-10 * np.trace(normal) / normal.shape[0]
    normal[np.diag_indices_from(normal)] += ridge
    coef = np.linalg.solve(normal, feats.T @ targets)
    return replace(net, w2=coef[:-1].T.copy(), b2=coef[-1].copy())


def train_surrogate(windows, config):
    """Adam on the rollout loss; returns (net, loss_curve)."""
    net = init_net(config.n_grid, config.hidden, config.seed, config.init_scale)
    if config.ls_init and windows.shape[0] > 0:
        net = _ls_output_init(net, windows)
    params = [p.copy() for p in net.params()]
    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    # Per-layer step sizes proportional to each layer's initialization scale;
    # with init_scale < 1 this keeps the steps commensurate with the shrunken
    # input layer and the grown output layer (equivalent to running the
    # optimizer in a reparameterized space where all layers are unit-scale).
    a = config.init_scale
    lr_scale = [a, a, 1.0 / a, 1.0]
    mult = deriv_multiplier(config.n_grid)
    rollout = None if config.rollout_steps == 0 else config.rollout_steps
    batch_rng = np.random.default_rng(config.seed + 10**6)
    losses = np.empty(config.iterations)
    for it in range(config.iterations):
        net = replace(net, w1=params[0], b1=params[1], w2=params[2], b2=params[3])
        if 0 < config.batch_size < windows.shape[0]:
            idx = batch_rng.choice(windows.shape[0], config.batch_size, replace=False)
            batch = windows[idx]
        else:
            batch = windows
        loss, grads = rollout_loss_and_grad(net, config.nu, batch,
                                            config.dt_snap, mult, rollout)
        if not np.isfinite(loss):
            raise TrainingFailureError(f"non-finite loss at iteration {it}")
        losses[it] = loss
        lr = config.learning_rate
        if config.lr_decay:
            lr *= 0.5 * (1.0 + np.cos(np.pi * it / config.iterations))
        t = it + 1
        for j in range(4):
            m[j] = beta1 * m[j] + (1 - beta1) * grads[j]
            v[j] = beta2 * v[j] + (1 - beta2) * grads[j] ** 2
            mhat = m[j] / (1 - beta1**t)
            vhat = v[j] / (1 - beta2**t)
            params[j] = params[j] - lr * lr_scale[j] * mhat / (np.sqrt(vhat) + eps)
    net = replace(net, w1=params[0], b1=params[1], w2=params[2], b2=params[3])
    return net, losses


# ---------------------------------------------------------------------------
# stability experiment (low-pass cutoff sweep)


def named_initial_field(name, n_grid):
    z = 2.0 * np.pi * np.arange(n_grid) / n_grid
    if name == "sin":
        return np.sin(z)
    if name == "expsin":
        return np.exp(np.sin(z))
    raise ValueError(f"unknown initial condition {name!r}")


def stability_experiment(net, cutoffs, ic_names, nu=0.1, t_final=4.0, dt=1e-3,
                         n_grid_ref=512, dt_ref=1e-4, sample_stride=10,
                         ref_cache=None):
    """Integrate the stabilized coupled system for each cutoff and record
    ||u_ref - phi||_{L2}(t); divergence is recorded as an event, not raised.

    Returns {ic: {"t", "err_M<cutoff>"..., "events": [...], "sup": {...}}}
    where error entries are NaN after a blow-up and "sup" maps each cutoff to
    the trajectory's sup-norm (inf when diverged). ``ref_cache`` (a dict)
    memoizes the reference solves so repeated runs (e.g. across training
    seeds) reuse them.
    """
    n_grid = net.n_grid
    n_coeff = n_grid // 2 + 1
    steps = n_steps(dt, t_final)
    n_samples = steps // sample_stride
    results = {}
    for name in ic_names:
        key = (name, nu, t_final, dt, n_grid_ref, dt_ref, sample_stride, n_coeff)
        if ref_cache is not None and key in ref_cache:
            ref_times, ref = ref_cache[key]
        else:
            u0_ref = named_initial_field(name, n_grid_ref)
            theta0 = np.fft.rfft(u0_ref) / n_grid_ref
            ref_times, ref = solve_burgers(
                theta0, nu, dt_ref, t_final, scheme="rk4",
                sample_stride=int(round(dt * sample_stride / dt_ref)))
            ref = ref[:, :n_coeff]
            if ref_cache is not None:
                ref_cache[key] = (ref_times, ref)
        curves = {"t": ref_times, "events": [], "sup": {}}
        for cutoff in cutoffs:
            mult = deriv_multiplier(n_grid, cutoff)
            w = named_initial_field(name, n_grid)
            errs = np.full(n_samples + 1, np.nan)
            errs[0] = _l2_err(w, ref[0])
            sup = float(np.max(np.abs(w)))
            diverged_at = None
            with np.errstate(over="ignore", invalid="ignore"):
                for step in range(1, steps + 1):
                    k1 = filtered_surrogate_rhs(w, net, nu, cutoff, mult)
                    k2 = filtered_surrogate_rhs(w + 0.5 * dt * k1, net, nu, cutoff, mult)
                    w = w + dt * k2
                    if not np.all(np.isfinite(w)):
                        diverged_at = step * dt
                        sup = np.inf
                        break
                    sup = max(sup, float(np.max(np.abs(w))))
                    if step % sample_stride == 0:
                        errs[step // sample_stride] = _l2_err(w, ref[step // sample_stride])
            curves[f"err_M{cutoff}"] = errs
            curves["sup"][cutoff] = sup
            if diverged_at is not None:
                curves["events"].append({"cutoff": cutoff, "ic": name,
                                         "blowup_time": diverged_at})
        results[name] = curves
    return results


def _l2_err(w_grid, theta_ref):
    from .spectral import l2_norm, to_spectral

    diff = to_spectral(w_grid) - theta_ref
    return float(l2_norm(diff))


def save_checkpoint(path, net):
    np.savez(path, w1=net.w1, b1=net.b1, w2=net.w2, b2=net.b2,
             activation=net.activation, seed=np.int64(net.seed))


def load_checkpoint(path):
    with np.load(path) as data:
        return SurrogateNet(data["w1"], data["b1"], data["w2"], data["b2"],
                            str(data["activation"]), int(data["seed"]))
