"""End-to-end acceptance gates, one test per numbered criterion.

Run ``pytest tests/test_acceptance.py -s`` to see one verdict line per
criterion. The whole module needs roughly six minutes on one core; the
heavyweight pieces are the d=100 tracking run, the two hyper-parameter
grids, and the scaling timer.
"""

import time
from dataclasses import replace

import numpy as np
import pytest

from ensfkit import (
    DiffusionSchedule,
    EnSFConfig,
    LETKFConfig,
    Lorenz96Params,
    ObservationModel,
    ShockEvent,
    ShockModel,
    backward_sample,
    crps,
    letkf_analysis,
    rk4_step,
)
from ensfkit.harness import (
    KIND_ASSIMILATION,
    STATUS_OK,
    ExperimentConfig,
    ScalingConfig,
    SweepAxis,
    SweepConfig,
    aggregate_rmse,
    generate_truth,
    run_experiment,
    run_scaling,
    run_sweep,
    time_assimilation_cycles,
    write_metrics_csv,
)
from ensfkit.rng import ROLE_FILTER, substream
from ensfkit.score import ScoreContext, prior_score_rows

pytestmark = pytest.mark.acceptance


def check(num, name, ok, detail):
    print(f"criterion {num} ({name}): {'PASS' if ok else 'FAIL'} - {detail}")
    assert ok, f"criterion {num} ({name}) failed: {detail}"


def tracking_config(**overrides):
    """The d=100 twin-experiment setup shared by criteria 4, 7, and 10."""
    defaults = dict(
        model=Lorenz96Params(dimension=100),
        obs=ObservationModel(operator="arctan", sigma_obs=0.05),
        method="ensf",
        ensf=EnSFConfig(),
        total_steps=1000,
        steps_between_assimilation=10,
        repetitions=10,
        master_seed=2024,
        compute_crps=False,
    )
    defaults.update(overrides)
    return ExperimentConfig(**defaults)


def grid_base(method, mcfg, sigma_obs=0.05):
    kwargs = {"ensf": mcfg} if method == "ensf" else {"letkf": mcfg}
    return ExperimentConfig(
        model=Lorenz96Params(dimension=100),
        obs=ObservationModel(operator="arctan", sigma_obs=sigma_obs),
        method=method,
        total_steps=500,
        steps_between_assimilation=10,
        repetitions=2,
        master_seed=77,
        compute_crps=False,
        **kwargs,
    )


# A no-skill filter plateaus at the climatological error level (~3.5-3.6
# at d=100 under +/-50 clipping), far above any converged aggregate
# (<=1.1 on both grids), so 3.0 separates the two regimes cleanly.
DIVERGENCE_CAP = 3.0


@pytest.fixture(scope="module")
def grid_results():
    ensf_sweep = SweepConfig(
        base=grid_base("ensf", EnSFConfig()),
        axis1=SweepAxis("eps_alpha", (0.4, 0.5, 0.6, 0.7)),
        axis2=SweepAxis("eps_beta", (0.0125, 0.025, 0.05, 0.1)),
        window="last-50",
        divergence_cap=DIVERGENCE_CAP,
    )
    letkf_sweep = SweepConfig(
        base=grid_base("letkf", LETKFConfig()),
        axis1=SweepAxis("inflation", (0.9, 1.2, 1.5, 1.8)),
        axis2=SweepAxis("localization", (0.0001, 1.0, 4.0, 9.0)),
        window="last-50",
        divergence_cap=DIVERGENCE_CAP,
    )
    return run_sweep(ensf_sweep), run_sweep(letkf_sweep)


def test_criterion_1_score_estimator_oracle():
    rng = np.random.default_rng(2024)
    d, members, s = 10, 10_000, 0.1
    # s = 0.1 keeps the effective sample size of the weighted estimator in
    # the thousands at every tau; at s = 1 the tau=0.1 kernel is so much
    # narrower than the cloud that the check would measure Monte Carlo
    # noise instead of the estimator.
    mu = rng.uniform(-1.0, 1.0, size=d)
    preds = mu + s * rng.standard_normal((members, d))
    schedule = DiffusionSchedule()
    ctx = ScoreContext(predictions=preds, schedule=schedule, batch_size=members)
    full_batch = np.broadcast_to(np.arange(members), (100, members))

    start = time.perf_counter()
    errors = {}
    for tau in (0.1, 0.5, 0.9):
        a = schedule.alpha_bar(tau)
        var = a**2 * s**2 + schedule.beta_bar_sq(tau)
        queries = a * mu + np.sqrt(var) * rng.standard_normal((100, d))
        estimate = prior_score_rows(queries, tau, ctx, full_batch)
        exact = -(queries - a * mu) / var
        errors[tau] = np.linalg.norm(estimate - exact) / np.linalg.norm(exact)
    elapsed = time.perf_counter() - start

    worst = max(errors.values())
    detail = (
        "rel L2 " + ", ".join(f"{e:.4f}@tau={t}" for t, e in errors.items())
        + f" (gate 0.05), {elapsed:.1f}s (gate 30s)"
    )
    check(1, "score estimator oracle", worst < 0.05 and elapsed < 30.0, detail)


def test_criterion_2_backward_sampler_fidelity():
    rng = np.random.default_rng(2024)
    d, members, s = 10, 10_000, 1.0
    mu = np.full(d, 0.1)
    schedule = DiffusionSchedule(eps_alpha=0.5, eps_beta=0.025, pseudo_steps=500)
    cfg = EnSFConfig(ensemble_size=members, schedule=schedule)

    def gaussian_score(z, tau):
        a = schedule.alpha_bar(tau)
        return -(z - a * mu) / (a**2 * s**2 + schedule.beta_bar_sq(tau))

    start = time.perf_counter()
    # predictions only fix the state dimension; the analytic score replaces
    # the estimator entirely.
    sample = backward_sample(np.zeros((1, d)), None, None, cfg, rng,
                             score_fn=gaussian_score)
    elapsed = time.perf_counter() - start

    mean_err = np.max(np.abs(sample.mean(axis=0) - mu))
    variances = sample.var(axis=0, ddof=1)
    detail = (
        f"max |mean err| {mean_err:.4f} (gate {0.05 * s}), "
        f"var in [{variances.min():.4f}, {variances.max():.4f}] "
        f"(gate [0.9, 1.1]), {elapsed:.1f}s (gate 60s)"
    )
    ok = (
        mean_err < 0.05 * s
        and variances.min() > 0.9 * s**2
        and variances.max() < 1.1 * s**2
        and elapsed < 60.0
    )
    check(2, "backward sampler fidelity", ok, detail)


def test_criterion_3_linear_gaussian_oracle():
    rng = np.random.default_rng(321)
    theta = 0.5
    rot = np.array([
        [np.cos(theta), -np.sin(theta)],
        [np.sin(theta), np.cos(theta)],
    ])
    sigma = 1.0
    obs = ObservationModel(operator="linear-identity", sigma_obs=sigma)
    n_steps, d = 50, 2

    truth = rng.standard_normal(d)
    truths, ys = [], []
    for _ in range(n_steps):
        truth = rot @ truth
        truths.append(truth.copy())
        ys.append(truth + sigma * rng.standard_normal(d))
    truths = np.array(truths)

    # exact Kalman recursion; the rotation is orthogonal and noise-free, so
    # this is the optimal filter for the system
    kf_mean, kf_cov = np.zeros(d), np.eye(d)
    kf_means, kf_stds = [], []
    for y in ys:
        kf_mean = rot @ kf_mean
        kf_cov = rot @ kf_cov @ rot.T
        gain = kf_cov @ np.linalg.inv(kf_cov + sigma**2 * np.eye(d))
        kf_mean = kf_mean + gain @ (y - kf_mean)
        kf_cov = (np.eye(d) - gain) @ kf_cov
        kf_means.append(kf_mean.copy())
        kf_stds.append(np.sqrt(np.trace(kf_cov) / d))
    kf_means = np.array(kf_means)
    avg_kf_std = float(np.mean(kf_stds))

    ensf_cfg = EnSFConfig(ensemble_size=200, batch_size=200,
                          schedule=DiffusionSchedule(pseudo_steps=500))
    rng_ensf = np.random.default_rng(7)
    ensemble = rng_ensf.standard_normal((200, d))
    ensf_means = []
    for y in ys:
        ensemble = ensemble @ rot.T
        ensemble = backward_sample(ensemble, y, obs, ensf_cfg, rng_ensf)
        ensf_means.append(ensemble.mean(axis=0))
    ensf_means = np.array(ensf_means)

    rmse_kf = np.sqrt(np.mean((kf_means - truths) ** 2, axis=1)).mean()
    rmse_ensf = np.sqrt(np.mean((ensf_means - truths) ** 2, axis=1)).mean()
    additional = rmse_ensf - rmse_kf
    gate = 0.5 * avg_kf_std

    # LETKF members start with sample moments exactly equal to the Kalman
    # prior (anomalies orthogonalized against the ones vector), so the
    # transform reproduces the Kalman recursion and any mismatch is a bug.
    j_letkf = 60
    rng_letkf = np.random.default_rng(11)
    raw = np.column_stack([np.ones(j_letkf), rng_letkf.standard_normal((j_letkf, d))])
    q, _ = np.linalg.qr(raw)
    members = q[:, 1:] * np.sqrt(j_letkf - 1)
    letkf_cfg = LETKFConfig(ensemble_size=j_letkf, inflation=1.0, localization=1e9)
    rel_errors = []
    for k, y in enumerate(ys):
        members = members @ rot.T
        members = letkf_analysis(members, y, obs, letkf_cfg)
        mean = members.mean(axis=0)
        rel_errors.append(
            np.linalg.norm(mean - kf_means[k]) / np.linalg.norm(kf_means[k])
        )
    worst_rel = max(rel_errors)

    detail = (
        f"EnSF additional RMSE {additional:.4f} (gate {gate:.4f}), "
        f"LETKF max rel mean err {worst_rel:.2e} (gate 1e-3)"
    )
    check(3, "linear-Gaussian oracle", additional <= gate and worst_rel <= 1e-3, detail)


def test_criterion_4_lorenz96_tracking():
    cfg = tracking_config()
    start = time.perf_counter()
    output = run_experiment(cfg)
    elapsed = time.perf_counter() - start

    per_rep = []
    for rep in output.repetitions:
        assert not rep.diverged
        rows = [r for r in rep.records if r.kind == KIND_ASSIMILATION]
        rows.sort(key=lambda r: r.time_index)
        per_rep.append([r.rmse for r in rows])
    pooled = np.mean(np.array(per_rep), axis=0)
    assert pooled.shape == (100,)

    # free run: same truth, same initial ensemble, never assimilates
    free_last50 = []
    between = cfg.steps_between_assimilation
    for rep in range(cfg.repetitions):
        trajectory, _ = generate_truth(cfg, rep)
        rng_filter = substream(cfg.master_seed, rep, ROLE_FILTER)
        ensemble = rng_filter.standard_normal(
            (cfg.ensf.ensemble_size, cfg.model.dimension)
        )
        series = []
        for t in range(1, cfg.total_steps + 1):
            ensemble = rk4_step(ensemble, cfg.model)
            if t % between == 0:
                err = ensemble.mean(axis=0) - trajectory[t]
                series.append(np.sqrt(np.mean(err**2)))
        free_last50.append(np.mean(series[-50:]))

    tracked = float(np.mean(pooled[-50:]))
    free = float(np.mean(free_last50))
    ratio = free / tracked
    decayed = pooled[49] < 0.5 * pooled[0]
    bounded = pooled[50:].max() < 2.0 * pooled[50:].mean()
    per_rep_seconds = elapsed / cfg.repetitions

    detail = (
        f"last-50 RMSE {tracked:.4f} vs free-run {free:.4f} = {ratio:.1f}x "
        f"(gate 5x); first window {pooled[0]:.2f} -> window 50 {pooled[49]:.3f}; "
        f"max after window 50 {pooled[50:].max():.3f}; {per_rep_seconds:.1f}s/rep"
    )
    ok = ratio >= 5.0 and decayed and bounded and per_rep_seconds < 180.0
    check(4, "Lorenz-96 tracking at d=100", ok, detail)


def test_criterion_5_hyperparameter_robustness(grid_results):
    ensf_res, letkf_res = grid_results

    def capped_cov(result):
        vals = np.minimum([c.aggregate for c in result.cells], DIVERGENCE_CAP)
        return float(np.std(vals) / np.mean(vals))

    cov_ensf = capped_cov(ensf_res)
    cov_letkf = capped_cov(letkf_res)
    div_ensf = sum(c.status != STATUS_OK for c in ensf_res.cells)
    div_letkf = sum(c.status != STATUS_OK for c in letkf_res.cells)

    detail = (
        f"EnSF CoV {cov_ensf:.3f} ({div_ensf}/16 divergent) vs "
        f"LETKF CoV {cov_letkf:.3f} ({div_letkf}/16 divergent)"
    )
    ok = cov_ensf < cov_letkf and div_ensf == 0 and div_letkf >= 1
    check(5, "hyper-parameter robustness", ok, detail)


def test_criterion_6_reduced_noise_stress(grid_results):
    ensf_res, letkf_res = grid_results
    top3 = ensf_res.top3
    assert len(top3) == 3

    parts, worst = [], 0.0
    for cell in top3:
        schedule = DiffusionSchedule(eps_alpha=cell.value1, eps_beta=cell.value2)
        mcfg = EnSFConfig(schedule=schedule)
        base = aggregate_rmse(run_experiment(grid_base("ensf", mcfg, 0.05)), "last-50")
        low = aggregate_rmse(run_experiment(grid_base("ensf", mcfg, 0.03)), "last-50")
        ratio = low / base
        worst = max(worst, ratio)
        parts.append(f"eps=({cell.value1},{cell.value2}): {base:.3f}->{low:.3f}")

    best_letkf = letkf_res.top3[0]
    lcfg = LETKFConfig(inflation=best_letkf.value1, localization=best_letkf.value2)
    l_base = aggregate_rmse(run_experiment(grid_base("letkf", lcfg, 0.05)), "last-50")
    l_low = aggregate_rmse(run_experiment(grid_base("letkf", lcfg, 0.03)), "last-50")

    detail = (
        "; ".join(parts) + f"; worst ratio {worst:.3f} (gate 2.0); "
        f"LETKF ({best_letkf.value1},{best_letkf.value2}) recorded "
        f"{l_base:.3f}->{l_low:.3f}, not gated"
    )
    check(6, "reduced-noise stress", worst <= 2.0, detail)


def test_criterion_7_shock_recovery():
    cfg = tracking_config(
        total_steps=1500,
        repetitions=4,
        shock=ShockModel(events=(
            ShockEvent(probability=0.02, size=0.05),
            ShockEvent(probability=0.01, size=0.20),
            ShockEvent(probability=0.005, size=0.50),
        )),
    )
    output = run_experiment(cfg)
    between = cfg.steps_between_assimilation

    evaluated = skipped = 0
    worst_windows = 0
    failures = []
    for rep in output.repetitions:
        assert not rep.diverged
        assim = sorted(
            (r for r in rep.records if r.kind == KIND_ASSIMILATION),
            key=lambda r: r.time_index,
        )
        windows = [r.time_index for r in assim]
        level = {r.time_index: r.rmse for r in assim}
        for row in rep.records:
            if not row.shock_flag:
                continue
            first_analysis = -(-row.time_index // between) * between
            idx = windows.index(first_analysis)
            # need a 10-window pre-shock level and 20 windows of headroom
            if idx < 10 or len(windows) - idx < 20:
                skipped += 1
                continue
            evaluated += 1
            pre = np.mean([level[w] for w in windows[idx - 10:idx]])
            post = [level[w] for w in windows[idx:idx + 20]]
            recovered_at = next(
                (k for k, v in enumerate(post) if v <= 2.0 * pre), None
            )
            if recovered_at is None:
                failures.append((rep.repetition, row.time_index))
            else:
                worst_windows = max(worst_windows, recovered_at)

    detail = (
        f"{evaluated} shocks evaluated across 4 repetitions ({skipped} too "
        f"close to the end), {len(failures)} unrecovered, worst recovery "
        f"{worst_windows} windows (gate 20)"
    )
    ok = evaluated >= 4 and not failures
    check(7, "shock recovery", ok, detail)


def crps_quadrature(members, value):
    """Exact integral of the squared CDF gap, piecewise-constant segments."""
    members = np.sort(np.asarray(members, dtype=float))
    points = np.unique(np.concatenate([members, [value]]))
    total = 0.0
    for left, right in zip(points[:-1], points[1:]):
        mid = 0.5 * (left + right)
        cdf = np.searchsorted(members, mid, side="right") / members.size
        step = 1.0 if mid >= value else 0.0
        total += (cdf - step) ** 2 * (right - left)
    return total


def test_criterion_8_crps_exactness():
    rng = np.random.default_rng(8)
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(1, 41))
        members = rng.normal(rng.uniform(-2, 2), rng.uniform(0.1, 3.0), size=n)
        value = rng.normal(0.0, 2.0)
        worst = max(worst, abs(crps(members, value) - crps_quadrature(members, value)))

    single = crps(np.array([1.7]), 1.7)
    binary = crps(np.array([0.0, 1.0]), 0.0)

    detail = (
        f"max |closed form - quadrature| {worst:.2e} (gate 1e-6); "
        f"single-member-at-truth {single}; binary case {binary}"
    )
    ok = worst <= 1e-6 and single == 0.0 and abs(binary - 0.25) < 1e-15
    check(8, "CRPS exactness", ok, detail)


def test_criterion_9_complexity_scaling():
    base = tracking_config(total_steps=10, repetitions=1, master_seed=9)
    start = time.perf_counter()

    rows = run_scaling(
        ScalingConfig(base=base, dimensions=(100, 1000, 10000),
                      repetitions=5, warmup=1)
    )
    dim_ratios = [
        rows[k + 1].mean_step_seconds / rows[k].mean_step_seconds
        for k in range(len(rows) - 1)
    ]

    def mean_cycle(cfg):
        return float(np.mean(time_assimilation_cycles(cfg, repetitions=5, warmup=1)))

    def with_sampler(**kw):
        return replace(base, ensf=EnSFConfig(schedule=DiffusionSchedule(**kw)))

    k_ratio = mean_cycle(with_sampler(pseudo_steps=5000)) / mean_cycle(
        with_sampler(pseudo_steps=500)
    )
    big_j = replace(base, ensf=EnSFConfig(ensemble_size=200))
    j_ratio = mean_cycle(big_j) / mean_cycle(base)
    elapsed = time.perf_counter() - start

    # every 10x sweep must stay within 2x of linear growth
    detail = (
        f"d ratios {dim_ratios[0]:.1f}x, {dim_ratios[1]:.1f}x per 10x "
        f"(gate 20x); K ratio {k_ratio:.1f}x; J ratio {j_ratio:.1f}x "
        f"(gate 20x); suite {elapsed:.0f}s (gate 1800s)"
    )
    ok = (
        all(r <= 20.0 for r in dim_ratios)
        and k_ratio <= 20.0
        and j_ratio <= 20.0
        and elapsed < 1800.0
    )
    check(9, "complexity scaling", ok, detail)


def test_criterion_10_determinism(tmp_path):
    cfg = tracking_config(repetitions=1)
    first = tmp_path / "first.csv"
    second = tmp_path / "second.csv"
    write_metrics_csv(run_experiment(cfg).records, first)
    write_metrics_csv(run_experiment(cfg).records, second)
    same = first.read_bytes() == second.read_bytes()
    detail = f"two runs, {first.stat().st_size} CSV bytes, identical: {same}"
    check(10, "determinism", same, detail)
