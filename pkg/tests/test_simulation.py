import math
from dataclasses import replace

import numpy as np
import pytest
from scipy import stats

from robust_alpha.alpha_tests import Method
from robust_alpha.errors import DataError, NumericalError
from robust_alpha.regression import Panel, fit_ols
from robust_alpha import simulation as sim
from robust_alpha.simulation import ErrorModel, ScenarioSpec


def test_factor_fixed_points_without_shocks():
    F = sim.generate_factors(5, burn_in=200, shocks=np.zeros((205, 3)))
    assert F[-1, 0] == pytest.approx(0.53 / (1 - 0.06), abs=1e-10)
    assert F[-1, 0] == pytest.approx(0.56383, abs=1e-5)
    assert F[-1, 1] == pytest.approx(0.19 / (1 - 0.19), abs=1e-10)


def test_variance_recursion_fixed_point():
    # with zero shocks the conditional variance drifts to omega / (1 - persistence)
    n = 300
    shocks = np.zeros((n, 3))
    shocks[-1] = 1.0  # the last innovation is scaled by sqrt(h) at its fixed point
    F = sim.generate_factors(1, burn_in=n - 1, shocks=shocks)
    f_prev = 0.53 / (1 - 0.06)
    h_inf = 0.89 / (1 - 0.85)
    assert h_inf == pytest.approx(5.9333, abs=1e-4)
    assert F[0, 0] - (0.53 + 0.06 * f_prev) == pytest.approx(math.sqrt(h_inf), rel=1e-9)


def test_factors_deterministic():
    a = sim.generate_factors(60, rng=np.random.default_rng(3))
    b = sim.generate_factors(60, rng=np.random.default_rng(3))
    assert a.shape == (60, 3) and np.array_equal(a, b)


def test_ar1_scatter():
    assert np.array_equal(sim.ar1_scatter(1), [[1.0]])
    assert np.allclose(sim.ar1_scatter(3), [[1, 0.5, 0.25], [0.5, 1, 0.5], [0.25, 0.5, 1]])
    S, L = sim.ar1_scatter(50, with_root=True)
    assert np.linalg.norm(L @ L.T - S) <= 1e-10


def test_normal_errors_covariance():
    rng = np.random.default_rng(11)
    E = sim.generate_errors(ErrorModel.NORMAL, np.eye(5), 100_000, rng)
    assert np.max(np.abs(np.cov(E, rowvar=False) - np.eye(5))) <= 0.03


def test_multivariate_t_unit_variance():
    rng = np.random.default_rng(12)
    S = sim.ar1_scatter(4)
    E = sim.generate_errors(ErrorModel.MULTI_T3, S, 200_000, rng)
    assert np.allclose(E.var(axis=0), 1.0, rtol=0.1)


def test_mixture_collapses_to_normal():
    rng = np.random.default_rng(13)
    E = sim.generate_errors(ErrorModel.MIXTURE, np.eye(2), 100_000, rng, kappa=1.0)
    assert stats.kstest(E[:, 0], "norm").statistic <= 0.01


def test_mixture_and_independent_t_scales():
    rng = np.random.default_rng(14)
    S = sim.ar1_scatter(3)
    E = sim.generate_errors(ErrorModel.MIXTURE, S, 200_000, rng)
    assert np.allclose(E.var(axis=0), 1.0, rtol=0.05)
    # scenario IV is unstandardized: undoing the scatter root leaves raw iid t3 coordinates
    E = sim.generate_errors(ErrorModel.INDEP_T3, S, 100_000, rng)
    raw = E @ np.linalg.inv(sim.ar1_scatter(3, with_root=True)[1])
    assert stats.kstest(raw[:, 1], stats.t(3).cdf).statistic <= 0.01


def test_non_pd_sigma_rejected():
    with pytest.raises(NumericalError):
        sim.generate_errors(ErrorModel.NORMAL, np.array([[1.0, 2.0], [2.0, 1.0]]), 5, np.random.default_rng(0))


def test_build_alpha():
    assert np.allclose(sim.build_alpha(4, 2, 0.5), [0.5, 0.5, 0, 0])
    assert np.array_equal(sim.build_alpha(5, 0, 3.0), np.zeros(5))
    for s in (1, 3, 7):
        assert np.sum(sim.build_alpha(7, s, 2.5) ** 2) == pytest.approx(2.5)
    with pytest.raises(DataError):
        sim.build_alpha(3, 4, 1.0)


def test_spec_validation():
    with pytest.raises(DataError):
        ScenarioSpec(N=5, s=6)
    with pytest.raises(DataError):
        ScenarioSpec(delta=-1.0)
    with pytest.raises(DataError):
        ScenarioSpec(reps=0)


def test_simulate_panel_deterministic_and_consistent():
    spec = ScenarioSpec(T=120, N=20)
    p1 = sim.simulate_panel(spec, sim.child_rng(1, 0))
    p2 = sim.simulate_panel(spec, sim.child_rng(1, 0))
    assert np.array_equal(p1.returns, p2.returns) and np.array_equal(p1.factors, p2.factors)
    ok = 0
    for k in range(100):
        rng = sim.child_rng(99, k)
        F = sim.generate_factors(120, rng=rng)
        beta = rng.uniform(0.5, 1.5, (20, 3))
        eps = sim.generate_errors(ErrorModel.NORMAL, sim.ar1_scatter(20), 120, rng)
        fit = fit_ols(Panel(F @ beta.T + eps, F))
        ok += np.max(np.abs(fit.beta - beta)) <= 0.5
    assert ok >= 95


def test_zero_beta_reduces_to_alpha_plus_noise():
    spec = ScenarioSpec(T=400, N=5, s=5, delta=5.0, beta_low=0.0, beta_high=0.0)
    panel = sim.simulate_panel(spec, sim.child_rng(5, 0))
    fit = fit_ols(panel)
    assert np.allclose(fit.alpha_hat, 1.0, atol=0.35)


def test_gamma_one_rejects_everything():
    spec = ScenarioSpec(T=30, N=10, reps=5, gamma=1.0)
    table = sim.run_study(spec, (Method.SS, Method.SM, Method.CC, Method.PY, Method.MAX, Method.COM))
    assert all(row.reject_rate == 1.0 for row in table.rows)


def test_study_deterministic_across_parallelism():
    spec = ScenarioSpec(T=30, N=15, reps=12, master_seed=77)
    serial = sim.simulate_study(spec, (Method.SS, Method.SM, Method.CC))
    parallel = sim.simulate_study(spec, (Method.SS, Method.SM, Method.CC), n_jobs=2)
    assert serial.table == parallel.table
    for m in serial.p_values:
        assert np.array_equal(serial.p_values[m], parallel.p_values[m])


def test_rate_and_stderr_consistent():
    spec = ScenarioSpec(T=30, N=15, reps=20, master_seed=5, s=3, delta=1.0)
    table = sim.run_study(spec)
    for row in table.rows:
        assert 0 <= row.reject_rate <= 1
        assert row.mc_stderr == pytest.approx(math.sqrt(row.reject_rate * (1 - row.reject_rate) / row.reps))


def test_failure_threshold(monkeypatch):
    calls = {"n": 0}
    real = sim.run_tests

    def flaky(panel, methods, config):
        calls["n"] += 1
        if calls["n"] % 10 == 0:
            raise NumericalError("synthetic failure")
        return real(panel, methods, config)

    monkeypatch.setattr(sim, "run_tests", flaky)
    with pytest.raises(NumericalError, match="replications failed"):
        sim.run_study(ScenarioSpec(T=30, N=10, reps=20), (Method.MAX,))


def test_power_monotone_in_delta():
    base = ScenarioSpec(ErrorModel.MULTI_T3, T=60, N=100, s=10, reps=150, master_seed=2024)
    methods = (Method.PY, Method.MAX, Method.COM, Method.SS, Method.SM, Method.CC)
    tables = [sim.run_study(replace(base, delta=d), methods) for d in (0.25, 0.5, 1.0)]
    for m in methods:
        rates = [t.rate(m) for t in tables]
        se = [math.sqrt(max(r * (1 - r), 0.01) / base.reps) for r in rates]
        for k in range(2):
            assert rates[k + 1] >= rates[k] - 2 * max(se[k], se[k + 1]), (m, rates)


def test_dense_ss_beats_max_under_heavy_tails():
    spec = ScenarioSpec(ErrorModel.MULTI_T3, T=60, N=100, s=50, delta=0.5, reps=200, master_seed=31)
    table = sim.run_study(spec, (Method.SS, Method.MAX))
    assert table.rate(Method.SS) > table.rate(Method.MAX)


def test_calibration_modes():
    spec = ScenarioSpec(T=40, N=20, reps=10)
    mean_dq = sim.calibrate_delta_q(spec, reps=40, mode="mean")
    level_dq = sim.calibrate_delta_q(spec, reps=40, mode="level")
    assert np.isfinite(mean_dq) and np.isfinite(level_dq)
    with pytest.raises(ValueError):
        sim.calibrate_delta_q(spec, reps=5, mode="median")
