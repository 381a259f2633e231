"""Schedule tests: closed forms against finite differences and endpoint algebra."""

from __future__ import annotations

import numpy as np
import pytest

from ensfkit.diffusion import DiffusionSchedule
from ensfkit.errors import ConfigError, DimensionError, DomainError

DEFAULT = DiffusionSchedule(eps_alpha=0.5, eps_beta=0.025, pseudo_steps=500)


def central_diff(f, t, h=1e-6):
    return (f(t + h) - f(t - h)) / (2.0 * h)


def test_validation_rejects_endpoint_values():
    for bad in (0.0, 1.0, -0.2, 1.3):
        with pytest.raises(ConfigError):
            DiffusionSchedule(eps_alpha=bad)
        with pytest.raises(ConfigError):
            DiffusionSchedule(eps_beta=bad)
    with pytest.raises(ConfigError):
        DiffusionSchedule(pseudo_steps=0)


def test_validation_collects_all_problems():
    with pytest.raises(ConfigError) as exc:
        DiffusionSchedule(eps_alpha=0.0, eps_beta=2.0, pseudo_steps=-5)
    assert len(exc.value.problems) == 3


def test_schedule_endpoints():
    s = DEFAULT
    assert np.isclose(s.alpha_bar(0.0), 1.0, rtol=0, atol=1e-15)
    assert np.isclose(s.alpha_bar(1.0), s.eps_alpha, rtol=1e-12)
    assert np.isclose(s.beta_bar_sq(0.0), s.eps_beta, rtol=1e-12)
    assert np.isclose(s.beta_bar_sq(1.0), 1.0, rtol=1e-12)


def test_schedule_midpoint_values():
    s = DEFAULT
    assert np.isclose(s.alpha_bar(0.5), 0.75, rtol=1e-12)
    assert np.isclose(s.beta_bar_sq(0.5), 0.5125, rtol=1e-12)


def test_drift_values():
    s = DEFAULT
    assert np.isclose(s.drift_coef(0.0), -0.5, rtol=1e-12)
    assert np.isclose(s.drift_coef(1.0), -1.0, rtol=1e-12)


def test_diffusion_sq_values():
    s = DEFAULT
    assert np.isclose(s.diffusion_sq(0.0), 1.0, rtol=1e-12)
    # at tau=1: (1 - eps_beta) + 2 (1 - eps_alpha) * 1 / eps_alpha
    assert np.isclose(s.diffusion_sq(1.0), 0.975 + 2.0 * 0.5 / 0.5, rtol=1e-12)


@pytest.mark.parametrize(
    "schedule",
    [
        DEFAULT,
        DiffusionSchedule(eps_alpha=0.9, eps_beta=0.5, pseudo_steps=10),
        DiffusionSchedule(eps_alpha=0.05, eps_beta=0.001, pseudo_steps=100),
    ],
)
def test_coefficients_match_finite_differences(schedule):
    # drift is the log-derivative of alpha_bar; diffusion_sq is
    # d(beta_bar_sq)/dtau - 2 * drift * beta_bar_sq
    taus = np.linspace(0.01, 0.99, 50)
    for t in taus:
        fd_drift = central_diff(lambda u: np.log(schedule.alpha_bar(u)), t)
        assert np.isclose(schedule.drift_coef(t), fd_drift, rtol=1e-8)
        fd_beta = central_diff(schedule.beta_bar_sq, t)
        expect = fd_beta - 2.0 * schedule.drift_coef(t) * schedule.beta_bar_sq(t)
        assert np.isclose(schedule.diffusion_sq(t), expect, rtol=1e-8)


def test_monotonicity_and_positivity_on_partition():
    s = DEFAULT
    taus = s.partition()
    alphas = s.alpha_bar(taus)
    betas = s.beta_bar_sq(taus)
    assert np.all(np.diff(alphas) < 0)
    assert np.all(np.diff(betas) > 0)
    assert np.all(alphas >= s.eps_alpha)
    assert np.all(betas >= s.eps_beta)
    assert np.all(s.drift_coef(taus) < 0)
    assert np.all(s.diffusion_sq(taus) > 0)


def test_domain_errors():
    s = DEFAULT
    for bad in (-0.1, 1.1, np.nan):
        with pytest.raises(DomainError):
            s.alpha_bar(bad)
        with pytest.raises(DomainError):
            s.beta_bar_sq(bad)
    with pytest.raises(DomainError):
        s.drift_coef(np.array([0.2, 1.5]))


def test_array_tau_matches_scalar():
    s = DEFAULT
    taus = np.linspace(0.0, 1.0, 11)
    vec = s.diffusion_sq(taus)
    for i, t in enumerate(taus):
        assert np.isclose(vec[i], s.diffusion_sq(float(t)), rtol=1e-15)


def test_partition_uniform():
    s = DiffusionSchedule(pseudo_steps=4)
    taus = s.partition()
    assert np.allclose(taus, [0.0, 0.25, 0.5, 0.75, 1.0], atol=1e-15)
    big = DEFAULT.partition()
    assert len(big) == 501
    assert big[0] == 0.0 and big[-1] == 1.0
    assert np.allclose(np.diff(big), 1.0 / 500.0, rtol=1e-12)


def test_log_kernel_zero_at_center():
    s = DEFAULT
    z0 = np.array([1.5, -2.0, 0.3])
    tau = 0.4
    z = s.alpha_bar(tau) * z0
    assert np.isclose(s.gaussian_log_kernel(z, z0, tau), 0.0, atol=1e-14)


def test_log_kernel_unit_offset_value():
    # tau=0: alpha_bar=1, beta_bar_sq=eps_beta, so a unit offset in one
    # component gives -1 / (2 * 0.025) = -20
    s = DEFAULT
    z0 = np.array([0.7, -0.1])
    z = z0 + np.array([1.0, 0.0])
    assert np.isclose(s.gaussian_log_kernel(z, z0, 0.0), -20.0, rtol=1e-12)


def test_log_kernel_batch_shape():
    s = DEFAULT
    rng = np.random.default_rng(0)
    z = rng.standard_normal(4)
    z0s = rng.standard_normal((6, 4))
    vals = s.gaussian_log_kernel(z, z0s, 0.3)
    assert vals.shape == (6,)
    for n in range(6):
        assert np.isclose(vals[n], s.gaussian_log_kernel(z, z0s[n], 0.3), rtol=1e-14)


def test_log_kernel_dimension_mismatch():
    with pytest.raises(DimensionError):
        DEFAULT.gaussian_log_kernel(np.zeros(3), np.zeros(4), 0.5)


def test_log_kernel_forgets_origin_at_tau_one_small_eps():
    s = DiffusionSchedule(eps_alpha=1e-3, eps_beta=1e-3)
    z = np.array([0.4, -1.1])
    a = s.gaussian_log_kernel(z, np.array([2.0, 2.0]), 1.0)
    b = s.gaussian_log_kernel(z, np.array([-2.0, 1.0]), 1.0)
    assert abs(a - b) < 0.02


def test_forward_transport_to_standard_normal():
    # pushing any spread-out cloud through the closed-form kernel at tau=1
    # with near-zero endpoints lands on the standard normal
    s = DiffusionSchedule(eps_alpha=1e-3, eps_beta=1e-3)
    rng = np.random.default_rng(77)
    z0 = 3.0 + 2.0 * rng.standard_normal((100_000, 3))
    z1 = s.sample_conditional(z0, 1.0, rng)
    mean = z1.mean(axis=0)
    var = z1.var(axis=0)
    assert np.all(np.abs(mean) < 0.05)
    assert np.all(np.abs(var - 1.0) < 0.05)


def test_sample_conditional_deterministic():
    s = DEFAULT
    z0 = np.linspace(-1.0, 1.0, 12)
    a = s.sample_conditional(z0, 0.6, np.random.default_rng(5))
    b = s.sample_conditional(z0, 0.6, np.random.default_rng(5))
    assert np.array_equal(a, b)
