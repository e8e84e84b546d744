"""Robust alpha tests for high-dimensional linear factor pricing models."""

from .alpha_tests import (
    ALL_METHODS,
    Method,
    TestConfig,
    TestResult,
    TrR2Estimate,
    grs_test,
    py_statistic,
    q_statistic,
    run_tests,
    tr_r2_hat,
)
from .data import RollingReport, emit_tables, load_panel, rolling_pvalues
from .errors import (
    AlphaTestError,
    ConvergenceError,
    DataError,
    DegenerateError,
    NumericalError,
    RankDeficientError,
)
from .regression import FactorFit, Panel, annihilator_weights, fit_ols, leave_out_ols, studentized_t
from .simulation import (
    ErrorModel,
    RejectionRow,
    RejectionTable,
    ScenarioSpec,
    calibrate_delta_q,
    run_study,
    simulate_panel,
    simulate_study,
)
from .spatial import MedianScaleEstimate, median_scale_fixpoint, scale_only_fixpoint, spatial_sign, zeta_hat

__version__ = "0.1.0"
