"""OLS on the factor matrix, annihilator weights and leave-out refits.

Conventions: ``returns`` is T x N (rows are periods, columns assets) and
``factors`` is T x p.  The regression has no intercept column; the intercept
is recovered through the annihilator weights ``h = M_X 1_T``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, DegenerateError, RankDeficientError

COND_LIMIT = 1e12
OMEGA_FLOOR = 1e-8


@dataclass
class Panel:
    """Excess returns paired with factor realizations over the same periods."""

    returns: np.ndarray
    factors: np.ndarray
    dates: list[str] | None = None
    assets: list[str] | None = None

    def __post_init__(self):
        self.returns = np.asarray(self.returns, dtype=float)
        self.factors = np.asarray(self.factors, dtype=float)
        if self.returns.ndim == 1:
            self.returns = self.returns[:, None]
        if self.factors.ndim == 1:
            self.factors = self.factors[:, None]
        if self.returns.ndim != 2 or self.factors.ndim != 2:
            raise DataError("returns and factors must be 2-d arrays")
        T, N = self.returns.shape
        if self.factors.shape[0] != T:
            raise DataError(
                f"returns have {T} periods but factors have {self.factors.shape[0]}"
            )
        p = self.factors.shape[1]
        if N < 1 or p < 1:
            raise DataError("panel needs at least one asset and one factor")
        if T < 1:
            raise DataError("panel has no periods")
        if not (np.all(np.isfinite(self.returns)) and np.all(np.isfinite(self.factors))):
            raise DataError("panel contains non-finite entries")
        if self.dates is not None and len(self.dates) != T:
            raise DataError("dates length does not match the number of periods")
        if self.assets is not None and len(self.assets) != N:
            raise DataError("asset labels do not match the number of columns")

    @property
    def T(self) -> int:
        return self.returns.shape[0]

    @property
    def N(self) -> int:
        return self.returns.shape[1]

    @property
    def p(self) -> int:
        return self.factors.shape[1]

    def rows(self, idx) -> "Panel":
        """Sub-panel restricted to the given periods (order preserved)."""
        idx = np.asarray(idx)
        dates = None if self.dates is None else [self.dates[i] for i in idx]
        return Panel(self.returns[idx], self.factors[idx], dates, self.assets)

    def columns(self, idx) -> "Panel":
        idx = np.asarray(idx)
        assets = None if self.assets is None else [self.assets[i] for i in idx]
        return Panel(self.returns[:, idx], self.factors, self.dates, assets)


@dataclass
class FactorFit:
    beta: np.ndarray  # N x p
    alpha_hat: np.ndarray  # N
    residuals: np.ndarray  # Z = Y - X beta', T x N
    h: np.ndarray  # T
    omega_T: float
    gram_inv: np.ndarray = field(repr=False)  # (X'X)^{-1}

    @property
    def Z(self) -> np.ndarray:
        return self.residuals

    def centered_residuals(self) -> np.ndarray:
        """``P_X (Y - alpha_hat 1')``: residuals with the intercept removed."""
        return self.residuals - np.outer(self.h, self.alpha_hat)


@dataclass
class TStatVector:
    t_sq: np.ndarray
    dof: int


def _gram_inverse(X: np.ndarray, what: str = "factors") -> np.ndarray:
    G = X.T @ X
    s = np.linalg.svd(G, compute_uv=False)
    if s[-1] <= 0 or s[0] / s[-1] > COND_LIMIT:
        _, _, vt = np.linalg.svd(X, full_matrices=False)
        null = vt[-1]
        cols = [int(k) for k in np.argsort(-np.abs(null)) if abs(null[k]) > 1e-3]
        raise RankDeficientError(
            f"rank-deficient {what}: near-dependent span of factor columns {sorted(cols)}"
        )
    return np.linalg.inv(G)


def annihilator_weights(factors) -> tuple[np.ndarray, float]:
    """Return ``h = (I - X(X'X)^{-1}X') 1_T`` and ``omega_T = h'h``."""
    X = np.asarray(factors, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    T = X.shape[0]
    Ginv = _gram_inverse(X)
    ones = np.ones(T)
    h = ones - X @ (Ginv @ (X.T @ ones))
    omega = float(h @ h)
    if omega / T <= 1e-14:
        raise DegenerateError("degenerate: factors span the intercept")
    return h, omega


def fit_ols(panel: Panel) -> FactorFit:
    X, Y = panel.factors, panel.returns
    Ginv = _gram_inverse(X)
    beta = (Ginv @ (X.T @ Y)).T
    h, omega = annihilator_weights(X)
    if omega / panel.T <= OMEGA_FLOOR:
        raise DegenerateError("intercept not identifiable: omega_T below floor")
    alpha_hat = Y.T @ h / omega
    Z = Y - X @ beta.T
    return FactorFit(beta, alpha_hat, Z, h, omega, Ginv)


def leave_out_ols(panel: Panel, keep) -> np.ndarray:
    """OLS slopes (N x p) estimated on the periods listed in ``keep`` only."""
    keep = np.unique(np.asarray(keep, dtype=int))
    if keep.size < panel.p + 1:
        raise RankDeficientError(
            f"leave-out fit needs at least p + 1 = {panel.p + 1} rows, |keep| = {keep.size}"
        )
    X, Y = panel.factors[keep], panel.returns[keep]
    try:
        Ginv = _gram_inverse(X, what=f"factors on {keep.size} retained rows")
    except RankDeficientError as exc:
        raise RankDeficientError(f"{exc} (|keep| = {keep.size})") from None
    return (Ginv @ (X.T @ Y)).T


def studentized_t(panel: Panel, fit: FactorFit | None = None) -> TStatVector:
    """Squared intercept t-statistics with ``v = T - p - 1`` degrees of freedom."""
    if fit is None:
        fit = fit_ols(panel)
    v = panel.T - panel.p - 1
    if v < 1:
        raise DataError(f"need T - p - 1 >= 1, got {v}")
    eps = fit.centered_residuals()
    rss = np.einsum("ti,ti->i", eps, eps)
    scale = np.einsum("ti,ti->i", panel.returns, panel.returns)
    bad = np.flatnonzero(rss <= 1e-24 * np.maximum(scale, 1e-300))
    if bad.size:
        raise DegenerateError(f"degenerate asset {int(bad[0])}: zero residual variance", int(bad[0]))
    t_sq = fit.alpha_hat**2 * fit.omega_T * v / rss
    return TStatVector(t_sq, v)


def half_sample_cut(T: int, a: int, b: int) -> int:
    """First original index belonging to the second half once rows a, b are dropped.

    The retained ``T - 2`` rows are split in time order; the first half takes
    ``ceil((T - 2) / 2)`` of them.
    """
    c = -(-(T - 2) // 2)
    for r in sorted((a, b)):
        if r <= c:
            c += 1
    return c


def half_sample_predictions(X: np.ndarray, Y: np.ndarray, pairs: np.ndarray):
    """Fitted values at the left-out rows from the two half-sample regressions.

    For each unordered pair ``(a, b)`` (``a < b``) the rows a, b are removed and
    the remainder split into a first and second half.  Returns four N-vectors
    per pair: fitted value at ``a`` and at ``b`` using the first-half slopes,
    then at ``a`` and at ``b`` using the second-half slopes.  Gram matrices and
    cross-products come from prefix sums downdated by the two dropped rows,
    which is equivalent to refitting on each half.
    """
    T, p = X.shape
    a, b = pairs[:, 0], pairs[:, 1]
    half = -(-(T - 2) // 2)
    cut = half + (a <= half)
    cut = cut + (b <= cut)

    xx = np.einsum("tk,tl->tkl", X, X)
    pre_xx = np.concatenate([np.zeros((1, p, p)), np.cumsum(xx, axis=0)])
    pre_xy = np.concatenate([np.zeros((1, p, Y.shape[1])), np.cumsum(X[:, :, None] * Y[:, None, :], axis=0)])

    a_first = (a < cut)[:, None, None]
    b_first = (b < cut)[:, None, None]
    xa, xb = X[a], X[b]
    xxa, xxb = xx[a], xx[b]
    xya = xa[:, :, None] * Y[a][:, None, :]
    xyb = xb[:, :, None] * Y[b][:, None, :]

    G1 = pre_xx[cut] - xxa * a_first - xxb * b_first
    C1 = pre_xy[cut] - xya * a_first - xyb * b_first
    G2 = pre_xx[T] - pre_xx[cut] - xxa * ~a_first - xxb * ~b_first
    C2 = pre_xy[T] - pre_xy[cut] - xya * ~a_first - xyb * ~b_first

    for G, label in ((G1, "first"), (G2, "second")):
        s = np.linalg.svd(G, compute_uv=False)
        bad = np.flatnonzero((s[:, -1] <= 0) | (s[:, 0] > COND_LIMIT * s[:, -1]))
        if bad.size:
            i, j = pairs[bad[0]]
            raise RankDeficientError(
                f"rank-deficient {label}-half regression for pair ({int(i)}, {int(j)})"
            )

    rhs = np.stack([xa, xb], axis=2)  # M x p x 2
    w1 = np.linalg.solve(G1, rhs)
    w2 = np.linalg.solve(G2, rhs)
    fa1 = np.einsum("mk,mkn->mn", w1[:, :, 0], C1)
    fb1 = np.einsum("mk,mkn->mn", w1[:, :, 1], C1)
    fa2 = np.einsum("mk,mkn->mn", w2[:, :, 0], C2)
    fb2 = np.einsum("mk,mkn->mn", w2[:, :, 1], C2)
    return fa1, fb1, fa2, fb2
