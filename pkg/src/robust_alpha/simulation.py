"""Monte Carlo data-generating processes and size/power studies.

Factors follow AR(1) means with GARCH(1,1)-type variance recursions mimicking
the Fama-French market, size and value factors.  Errors come from one of four
scenarios sharing the AR(1) scatter ``Sigma_ij = 0.5^{|i-j|}``.
"""

from __future__ import annotations

import enum
import functools
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .alpha_tests import Method, TestConfig, run_tests
from .errors import AlphaTestError, DataError, NumericalError
from .regression import Panel

logger = logging.getLogger(__name__)

# (intercept, AR coefficient) of the factor means and (omega, persistence, shock)
# of the variance recursion: market, SMB, HML
FACTOR_MEAN = np.array([[0.53, 0.06], [0.19, 0.19], [0.19, 0.05]])
FACTOR_VAR = np.array([[0.89, 0.85, 0.11], [0.62, 0.74, 0.19], [0.80, 0.76, 0.15]])

MIXTURE_KAPPA = 0.8
MIXTURE_INFLATION = 9.0
MAX_FAILURE_RATE = 0.01


class ErrorModel(str, enum.Enum):
    NORMAL = "I"
    MULTI_T3 = "II"
    MIXTURE = "III"
    INDEP_T3 = "IV"


@dataclass(frozen=True)
class ScenarioSpec:
    error_model: ErrorModel = ErrorModel.NORMAL
    T: int = 60
    N: int = 100
    s: int = 0
    delta: float = 0.0
    gamma: float = 0.05
    reps: int = 1000
    master_seed: int = 20240101
    rho: float = 0.5
    beta_low: float = 0.5
    beta_high: float = 1.5
    burn_in: int = 50
    kappa: float = MIXTURE_KAPPA
    spike: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "error_model", ErrorModel(self.error_model))
        if not 0 <= self.s <= self.N:
            raise DataError(f"sparsity s={self.s} must lie in [0, N={self.N}]")
        if self.delta < 0:
            raise DataError("signal energy delta must be non-negative")
        if self.reps < 1:
            raise DataError("reps must be at least 1")
        if not 0 < self.gamma <= 1:
            raise DataError("gamma must lie in (0, 1]")

    def label(self) -> str:
        return self.error_model.value


@dataclass
class RejectionRow:
    method: str
    scenario: str
    T: int
    N: int
    s: int
    delta: float
    gamma: float
    reps: int
    reject_rate: float
    mc_stderr: float


@dataclass
class RejectionTable:
    rows: list[RejectionRow] = field(default_factory=list)
    failures: int = 0

    def rate(self, method, **match) -> float:
        method = Method(method).value
        for row in self.rows:
            if row.method == method and all(getattr(row, k) == v for k, v in match.items()):
                return row.reject_rate
        raise KeyError(method)

    def sorted(self) -> "RejectionTable":
        order = {m.value: i for i, m in enumerate(Method)}
        key = lambda r: (order.get(r.method, 99), r.scenario, r.T, r.N, r.delta, r.s)
        return RejectionTable(sorted(self.rows, key=key), self.failures)


@dataclass
class StudyOutcome:
    """Per-replication statistics and p-values kept alongside the rate table."""

    table: RejectionTable
    p_values: dict[str, np.ndarray]
    statistics: dict[str, np.ndarray]
    diagnostics: dict[str, np.ndarray]


def child_rng(master_seed: int, index: int) -> np.random.Generator:
    """Independent stream for replication ``index`` derived from the master seed."""
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(index,)))


def generate_factors(T: int, burn_in: int = 50, rng: np.random.Generator | None = None, shocks=None) -> np.ndarray:
    """Simulate the three factors for periods ``-burn_in+1 .. T`` and return rows ``1..T``.

    Recursion starts from ``f = 0`` and ``h = 1`` at period ``-burn_in``.  ``shocks``
    (``(burn_in + T) x 3``) overrides the standard-normal innovations.
    """
    if T < 1:
        raise DataError("T must be positive")
    n = burn_in + T
    if shocks is None:
        rng = rng if rng is not None else np.random.default_rng()
        shocks = rng.standard_normal((n, 3))
    shocks = np.asarray(shocks, dtype=float)
    f = np.zeros(3)
    hv = np.ones(3)
    z_prev = np.zeros(3)
    out = np.empty((n, 3))
    for t in range(n):
        hv = FACTOR_VAR[:, 0] + FACTOR_VAR[:, 1] * hv + FACTOR_VAR[:, 2] * z_prev**2
        f = FACTOR_MEAN[:, 0] + FACTOR_MEAN[:, 1] * f + np.sqrt(hv) * shocks[t]
        out[t] = f
        z_prev = shocks[t]
    return out[burn_in:]


@functools.lru_cache(maxsize=16)
def _ar1_cached(N: int, rho: float):
    idx = np.arange(N)
    S = rho ** np.abs(idx[:, None] - idx[None, :])
    w, V = np.linalg.eigh(S)
    if w[0] <= 0:
        raise NumericalError("scatter matrix is not positive definite")
    root = (V * np.sqrt(w)) @ V.T
    S.flags.writeable = False
    root.flags.writeable = False
    return S, root


def ar1_scatter(N: int, rho: float = 0.5, with_root: bool = False):
    """``Sigma_ij = rho^{|i-j|}``; optionally also its symmetric square root."""
    if N < 1 or not abs(rho) < 1:
        raise DataError("need N >= 1 and |rho| < 1")
    S, root = _ar1_cached(int(N), float(rho))
    return (S, root) if with_root else S


def _sqrt_psd(Sigma: np.ndarray) -> np.ndarray:
    w, V = np.linalg.eigh(Sigma)
    if w[0] <= 1e-12 * max(w[-1], 1.0):
        raise NumericalError("Sigma is not positive definite")
    return (V * np.sqrt(w)) @ V.T


def generate_errors(model, Sigma, T: int, rng: np.random.Generator, root=None, kappa: float = MIXTURE_KAPPA) -> np.ndarray:
    """Draw T error rows from the chosen scenario with scatter ``Sigma``."""
    model = ErrorModel(model)
    L = _sqrt_psd(np.asarray(Sigma, dtype=float)) if root is None else np.asarray(root)
    N = L.shape[0]
    if model is ErrorModel.NORMAL:
        return rng.standard_normal((T, N)) @ L
    if model is ErrorModel.MULTI_T3:
        # t_3 with scatter Sigma, then / sqrt(3) for unit-variance margins
        w = np.sqrt(rng.chisquare(3, size=T) / 3.0)
        return (rng.standard_normal((T, N)) @ L) / w[:, None] / math.sqrt(3.0)
    if model is ErrorModel.MIXTURE:
        wide = rng.random(T) >= kappa
        scale = np.where(wide, math.sqrt(MIXTURE_INFLATION), 1.0)
        norm = math.sqrt(kappa + MIXTURE_INFLATION * (1.0 - kappa))
        return (rng.standard_normal((T, N)) @ L) * scale[:, None] / norm
    return rng.standard_t(3, size=(T, N)) @ L


def build_alpha(N: int, s: int, delta: float) -> np.ndarray:
    if not 0 <= s <= N or delta < 0:
        raise DataError("need 0 <= s <= N and delta >= 0")
    alpha = np.zeros(N)
    if s > 0:
        alpha[:s] = math.sqrt(delta / s)
    return alpha


def simulate_panel(spec: ScenarioSpec, rng: np.random.Generator) -> Panel:
    """One replication of ``Y_it = alpha_i + beta_i' f_t + eps_it``."""
    F = generate_factors(spec.T, spec.burn_in, rng)
    beta = rng.uniform(spec.beta_low, spec.beta_high, size=(spec.N, 3))
    _, root = ar1_scatter(spec.N, spec.rho, with_root=True)
    eps = generate_errors(spec.error_model, None, spec.T, rng, root=root, kappa=spec.kappa)
    if spec.spike is not None:
        alpha = np.zeros(spec.N)
        alpha[0] = spec.spike
    else:
        alpha = build_alpha(spec.N, spec.s, spec.delta)
    Y = alpha[None, :] + F @ beta.T + eps
    return Panel(Y, F)



def _replicate(spec: ScenarioSpec, methods, config: TestConfig, index: int):
    rng = child_rng(spec.master_seed, index)
    panel = simulate_panel(spec, rng)
    try:
        results = run_tests(panel, methods, config)
    except AlphaTestError as exc:
        return index, None, f"{type(exc).__name__}: {exc}"
    return index, results, None


def _run_block(spec, methods, config, indices):
    return [_replicate(spec, methods, config, i) for i in indices]


def simulate_study(
    spec: ScenarioSpec,
    methods=(Method.SS, Method.SM, Method.CC),
    config: TestConfig | None = None,
    n_jobs: int = 1,
) -> StudyOutcome:
    """Run ``spec.reps`` replications and keep every p-value and statistic.

    Replication ``k`` always uses the stream ``child_rng(master_seed, k)``, so
    the outcome does not depend on ``n_jobs`` or on scheduling order.
    """
    config = config or TestConfig()
    methods = tuple(Method(m) for m in methods)
    indices = np.arange(spec.reps)
    if n_jobs == 1:
        records = _run_block(spec, methods, config, indices)
    else:
        from joblib import Parallel, delayed

        blocks = np.array_split(indices, max(1, min(spec.reps, 8 * abs(n_jobs))))
        parts = Parallel(n_jobs=n_jobs)(delayed(_run_block)(spec, methods, config, b) for b in blocks if b.size)
        records = [rec for part in parts for rec in part]
    records.sort(key=lambda rec: rec[0])

    failed = [(i, msg) for i, res, msg in records if res is None]
    if failed:
        logger.warning("%d of %d replications failed; first: %s", len(failed), spec.reps, failed[0][1])
    if len(failed) > MAX_FAILURE_RATE * spec.reps:
        raise NumericalError(
            f"{len(failed)} of {spec.reps} replications failed (limit {MAX_FAILURE_RATE:.0%}); first: {failed[0][1]}"
        )

    ok = [res for _, res, _ in records if res is not None]
    p_values, statistics, diagnostics = {}, {}, {}
    for m in methods:
        p_values[m.value] = np.array([res[m].p_value for res in ok])
        statistics[m.value] = np.array([np.nan if res[m].statistic is None else res[m].statistic for res in ok])
        keys = ok[0][m].diagnostics.keys() if ok else ()
        for k in keys:
            diagnostics[f"{m.value}.{k}"] = np.array([res[m].diagnostics[k] for res in ok])

    table = RejectionTable(failures=len(failed))
    n_ok = len(ok)
    for m in methods:
        rate = float(np.mean(p_values[m.value] <= spec.gamma)) if n_ok else float("nan")
        table.rows.append(
            RejectionRow(
                method=m.value,
                scenario=spec.label(),
                T=spec.T,
                N=spec.N,
                s=spec.s,
                delta=spec.delta,
                gamma=spec.gamma,
                reps=n_ok,
                reject_rate=rate,
                mc_stderr=math.sqrt(rate * (1.0 - rate) / n_ok) if n_ok else float("nan"),
            )
        )
    return StudyOutcome(table, p_values, statistics, diagnostics)


def run_study(spec: ScenarioSpec, methods=(Method.SS, Method.SM, Method.CC), config: TestConfig | None = None, n_jobs: int = 1) -> RejectionTable:
    return simulate_study(spec, methods, config, n_jobs).table


CALIBRATION_SEED_OFFSET = 0x5EED


def calibrate_delta_q(
    spec: ScenarioSpec,
    reps: int = 500,
    mode: str = "mean",
    config: TestConfig | None = None,
    n_jobs: int = 1,
) -> float:
    """Null centring constant for the sum-type statistic, estimated by simulation.

    ``mode="mean"`` returns the Monte Carlo null mean of Q.  ``mode="level"``
    returns the shift that makes the calibration runs reject at exactly
    ``spec.gamma``: the ``1 - gamma`` quantile of ``Q - z_{1-gamma} sqrt(2 trR2)``.
    Calibration replications use a seed disjoint from the study's own and are
    always drawn under the null.
    """
    null = replace(
        spec, s=0, delta=0.0, spike=None, reps=reps,
        master_seed=spec.master_seed + CALIBRATION_SEED_OFFSET,
    )
    cfg = replace(config or TestConfig(), delta_q=0.0)
    out = simulate_study(null, (Method.SS,), cfg, n_jobs)
    Q = out.diagnostics["SS.Q"]
    if mode == "mean":
        return float(np.mean(Q))
    if mode == "level":
        from scipy.special import ndtri

        if not 0 < spec.gamma < 1:
            raise DataError("level calibration needs 0 < gamma < 1")
        z = float(ndtri(1.0 - spec.gamma))
        w = Q - z * np.sqrt(2.0 * out.diagnostics["SS.trR2_hat"])
        return float(np.quantile(w, 1.0 - spec.gamma))
    raise ValueError(f"unknown calibration mode {mode!r}")
