"""Surrogate network, adjoint gradients, training, and stability sweep tests."""

import dataclasses

import numpy as np
import pytest

from mzrom.spectral import grid, to_physical, to_spectral
from mzrom.surrogate import (SurrogateNet, TrainConfig, build_training_set,
                             deriv_multiplier, apply_multiplier, init_net,
                             load_checkpoint, named_initial_field, net_apply,
                             rollout_loss_and_grad, save_checkpoint,
                             stability_experiment, surrogate_rhs,
                             train_surrogate, zero_net)


def test_derivative_multiplier_on_low_modes():
    n_grid = 64
    z = grid(n_grid)
    mult = deriv_multiplier(n_grid)
    # low modes are essentially untouched by the high-order filter
    np.testing.assert_allclose(apply_multiplier(np.sin(2 * z), mult),
                               2 * np.cos(2 * z), atol=1e-10)


def test_derivative_multiplier_band_limiting():
    mult = deriv_multiplier(64, cutoff=5)
    assert np.all(mult[6:] == 0.0)
    assert mult[-1] == 0.0  # Nyquist always dropped


def test_zero_network_gives_inviscid_dynamics():
    n_grid = 64
    w = np.sin(grid(n_grid))
    rhs = surrogate_rhs(w, zero_net(n_grid, 8), nu=0.1)
    mult = deriv_multiplier(n_grid)
    np.testing.assert_allclose(rhs, apply_multiplier(-0.5 * w * w, mult), atol=1e-14)


def test_network_apply_batched():
    net = init_net(16, 8, seed=1)
    rng = np.random.default_rng(0)
    w = rng.normal(size=(5, 16))
    batch = net_apply(net, w)
    singles = np.stack([net_apply(net, row) for row in w])
    np.testing.assert_allclose(batch, singles, atol=1e-14)


def test_gradient_matches_finite_differences_per_parameter():
    rng = np.random.default_rng(1)
    net = init_net(32, 16, seed=7)
    mult = deriv_multiplier(32)
    windows = 0.3 * rng.standard_normal((3, 5, 32))
    dt, nu = 1e-2, 0.1
    _, grads = rollout_loss_and_grad(net, nu, windows, dt, mult)
    for j, name in enumerate(("w1", "b1", "w2", "b2")):
        arr = getattr(net, name)
        idx = tuple(rng.integers(0, s) for s in arr.shape)
        eps = 1e-6
        perturbed = {}
        for sign in (+1, -1):
            mod = arr.copy()
            mod[idx] += sign * eps
            loss, _ = rollout_loss_and_grad(
                dataclasses.replace(net, **{name: mod}), nu, windows, dt, mult)
            perturbed[sign] = loss
        fd = (perturbed[+1] - perturbed[-1]) / (2 * eps)
        assert grads[j][idx] == pytest.approx(fd, rel=1e-5, abs=1e-12)


def test_gradient_matches_finite_differences_along_directions():
    rng = np.random.default_rng(2)
    net = init_net(32, 16, seed=3)
    mult = deriv_multiplier(32)
    windows = 0.3 * rng.standard_normal((2, 6, 32))
    dt, nu = 1e-2, 0.1
    _, grads = rollout_loss_and_grad(net, nu, windows, dt, mult)
    for _ in range(5):
        direction = [rng.standard_normal(p.shape) for p in net.params()]
        norm = np.sqrt(sum(np.sum(d * d) for d in direction))
        direction = [d / norm for d in direction]
        eps = 1e-6
        losses = {}
        for sign in (+1, -1):
            mod = dataclasses.replace(
                net, w1=net.w1 + sign * eps * direction[0],
                b1=net.b1 + sign * eps * direction[1],
                w2=net.w2 + sign * eps * direction[2],
                b2=net.b2 + sign * eps * direction[3])
            losses[sign], _ = rollout_loss_and_grad(mod, nu, windows, dt, mult)
        fd = (losses[+1] - losses[-1]) / (2 * eps)
        analytic = sum(np.sum(g * d) for g, d in zip(grads, direction))
        assert analytic == pytest.approx(fd, rel=1e-4, abs=1e-12)


def test_rollout_loss_vanishes_on_self_generated_windows():
    from mzrom.dynamics import rk_step

    net = init_net(32, 16, seed=5)
    mult = deriv_multiplier(32)
    dt, nu = 1e-3, 0.1
    w = 0.4 * np.sin(2 * grid(32))
    snaps = [w]
    for _ in range(4):
        w = rk_step(lambda v: surrogate_rhs(v, net, nu, mult), w, dt, "rk2")
        snaps.append(w)
    windows = np.stack(snaps)[None, :, :]
    loss, grads = rollout_loss_and_grad(net, nu, windows, dt, mult)
    assert loss < 1e-28
    for g in grads:
        np.testing.assert_allclose(g, 0.0, atol=1e-12)


def test_training_set_shapes_and_determinism():
    cfg = TrainConfig(n_ics=2, n_windows=3, n_grid=64, n_grid_ref=128,
                      window_span=0.02, dt_snap=1e-3, n_snap=4, dt_ref=1e-4,
                      band_limit=8)
    a = build_training_set(cfg)
    b = build_training_set(cfg)
    assert a.shape == (6, 4, 64)
    np.testing.assert_array_equal(a, b)


def test_training_reduces_loss_and_is_deterministic():
    cfg = TrainConfig(n_ics=2, n_windows=4, n_grid=64, n_grid_ref=128,
                      window_span=0.02, dt_snap=1e-3, n_snap=4, dt_ref=1e-4,
                      band_limit=8, hidden=32, iterations=40,
                      learning_rate=2e-3, seed=1)
    windows = build_training_set(cfg)
    net_a, losses_a = train_surrogate(windows, cfg)
    net_b, losses_b = train_surrogate(windows, cfg)
    assert losses_a[-1] < losses_a[0]
    np.testing.assert_array_equal(losses_a, losses_b)
    np.testing.assert_array_equal(net_a.w1, net_b.w1)


def test_checkpoint_round_trip(tmp_path):
    net = init_net(16, 8, seed=9)
    path = tmp_path / "net.npz"
    save_checkpoint(path, net)
    loaded = load_checkpoint(path)
    for a, b in zip(net.params(), loaded.params()):
        np.testing.assert_array_equal(a, b)
    assert loaded.activation == net.activation
    assert loaded.seed == net.seed


def test_named_initial_fields():
    z = grid(32)
    np.testing.assert_allclose(named_initial_field("sin", 32), np.sin(z))
    np.testing.assert_allclose(named_initial_field("expsin", 32), np.exp(np.sin(z)))
    with pytest.raises(ValueError):
        named_initial_field("cos", 32)


def test_stability_experiment_records_blowups_as_events():
    # an untrained network with large weights destabilizes the unfiltered run
    rng = np.random.default_rng(0)
    net = SurrogateNet(5.0 * rng.standard_normal((16, 64)), np.zeros(16),
                       5.0 * rng.standard_normal((64, 16)), np.zeros(64))
    res = stability_experiment(net, (31,), ("sin",), t_final=0.5, dt=1e-3,
                               n_grid_ref=128, dt_ref=1e-3, sample_stride=10)
    curves = res["sin"]
    assert "err_M31" in curves
    if curves["events"]:
        assert curves["events"][0]["cutoff"] == 31
        assert np.isnan(curves["err_M31"][-1])


def test_stability_reference_cache_is_reused():
    net = zero_net(64, 8)
    cache = {}
    a = stability_experiment(net, (3,), ("sin",), t_final=0.1, dt=1e-3,
                             n_grid_ref=128, dt_ref=1e-3, ref_cache=cache)
    assert len(cache) == 1
    b = stability_experiment(net, (3,), ("sin",), t_final=0.1, dt=1e-3,
                             n_grid_ref=128, dt_ref=1e-3, ref_cache=cache)
    np.testing.assert_array_equal(a["sin"]["err_M3"], b["sin"]["err_M3"])


def test_least_squares_output_init_fits_the_derivative():
    """With ls_init the net starts as an accurate spectral-derivative model:
    its output on a training snapshot matches the snapshot's derivative far
    better than any gradient-trained start, and training from it stays low."""
    from mzrom.surrogate import _ls_output_init

    rng = np.random.default_rng(8)
    n_grid = 64
    n_coeff = n_grid // 2 + 1
    k = np.arange(1, n_coeff)
    windows = np.stack([
        np.fft.irfft(np.concatenate(
            [[0.0], (rng.normal(size=n_coeff - 1)
                     + 1j * rng.normal(size=n_coeff - 1)) / (1.0 + k**2)]) * 16.0,
            n=n_grid)
        for _ in range(36)
    ]).reshape(6, 6, n_grid)
    net = _ls_output_init(init_net(n_grid, 96, seed=2), windows)
    snaps = windows.reshape(-1, n_grid)
    target = apply_multiplier(snaps, deriv_multiplier(n_grid))
    resid = net_apply(net, snaps) - target
    assert np.sqrt(np.mean(resid**2)) < 1e-6 * np.sqrt(np.mean(target**2))


def test_training_with_ls_init_is_deterministic_and_low_loss():
    config = TrainConfig(n_ics=2, n_windows=4, iterations=3, ls_init=True,
                         learning_rate=1e-4, lr_decay=True, seed=0)
    windows = build_training_set(config)
    net_a, losses_a = train_surrogate(windows, config)
    net_b, losses_b = train_surrogate(windows, config)
    np.testing.assert_array_equal(losses_a, losses_b)
    np.testing.assert_array_equal(net_a.w2, net_b.w2)
    # the closed-form start is orders of magnitude below a gradient-only run
    plain = dataclasses.replace(config, ls_init=False)
    _, losses_plain = train_surrogate(windows, plain)
    assert losses_a[0] < 1e-6 * losses_plain[0]
