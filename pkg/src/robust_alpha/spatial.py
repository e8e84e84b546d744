"""Spatial signs and the fixed-point estimators of location and diagonal scale."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, DegenerateError

DEFAULT_TOL = 1e-6
DEFAULT_MAX_ITER = 200
MAX_STEP_FACTOR = 100.0
MAD_CONSISTENCY = 0.6745
D_FLOOR = 1e-12


@dataclass
class MedianScaleEstimate:
    theta: np.ndarray
    D: np.ndarray
    U: np.ndarray
    r: np.ndarray
    iterations: int
    residual_location: float
    residual_scale: float


@dataclass
class ZetaHat:
    e_r2: float
    e_rinv: float
    zeta: float


def spatial_sign(v) -> np.ndarray:
    """``v / ||v||``, with the zero vector mapped to itself."""
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    return v / n if n > 0 else np.zeros_like(v)


def _row_signs(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    norms = np.sqrt(np.einsum("ti,ti->t", X, X))
    safe = np.where(norms > 0, norms, 1.0)
    return X / safe[:, None], norms


def signs_and_radii(Z, theta, D) -> tuple[np.ndarray, np.ndarray]:
    """Rowwise ``U(D^{-1/2}(Z_t - theta))`` and the radii ``||D^{-1/2}(Z_t - theta)||``."""
    Z = np.asarray(Z, dtype=float)
    D = np.asarray(D, dtype=float)
    xi = (Z - np.asarray(theta, dtype=float)) / np.sqrt(D)
    return _row_signs(xi)


def _scale_residual(U: np.ndarray) -> tuple[np.ndarray, float]:
    N = U.shape[1]
    m = np.einsum("ti,ti->i", U, U) / U.shape[0]
    return m, float(np.max(np.abs(m - 1.0 / N)))


def _scale_update(D: np.ndarray, m: np.ndarray) -> np.ndarray:
    # D <- N D^{1/2} diag(mean U U') D^{1/2}, with the per-step factor clamped
    factor = np.clip(D.size * m, 1.0 / MAX_STEP_FACTOR, MAX_STEP_FACTOR)
    return np.maximum(D * factor, D_FLOOR)


def _normalize_scale(D: np.ndarray, r: np.ndarray) -> np.ndarray:
    # the estimating equations leave the overall level of D free; pin it so
    # that the mean squared radius equals N
    return D * (np.mean(r**2) / D.size)


def scale_only_fixpoint(residuals, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> np.ndarray:
    """Diagonal scale D solving ``mean_t diag(U(xi_t) U(xi_t)') = I / N`` with ``xi_t = D^{-1/2} e_t``.

    Starts from the column mean squares and alternates the two update steps.
    The returned D is normalized so that the mean squared radius equals N.
    """
    E = np.asarray(residuals, dtype=float)
    T, N = E.shape
    if T < 2:
        raise DegenerateError("scale fixpoint needs at least two observations")
    zero = np.flatnonzero(~np.any(E != 0, axis=1))
    if zero.size:
        raise DegenerateError(f"degenerate observation: residual row {int(zero[0])} is zero", int(zero[0]))
    D = np.maximum(np.mean(E**2, axis=0), D_FLOOR)
    for it in range(1, max_iter + 1):
        U, r = _row_signs(E / np.sqrt(D))
        m, res = _scale_residual(U)
        if res <= tol:
            return _normalize_scale(D, r)
        D = _scale_update(D, m)
    raise ConvergenceError(
        f"scale fixpoint did not converge in {max_iter} iterations (residual {res:.3g})",
        residuals={"scale": res},
        iterations=max_iter,
    )


def median_scale_fixpoint(Z, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> MedianScaleEstimate:
    """Joint spatial median and diagonal scale of the rows of ``Z``.

    Each sweep computes ``xi_t = D^{-1/2}(Z_t - theta)`` and then applies a
    Weiszfeld-type location step and the multiplicative scale step, both from
    the same ``xi``.  Iteration stops as soon as the two estimating-equation
    residuals at the current ``(theta, D)`` are within ``tol``; that pair is
    returned, so the residuals reported are those of the output itself.
    Observations sitting exactly on ``theta`` are left out of the location
    step for that sweep.
    """
    Z = np.asarray(Z, dtype=float)
    T, N = Z.shape
    if T < 3:
        raise DegenerateError("median/scale fixpoint needs T >= 3")
    if np.all(Z == Z[0]):
        raise DegenerateError("all observations are identical")
    theta = np.median(Z, axis=0)
    mad = np.median(np.abs(Z - theta), axis=0) / MAD_CONSISTENCY
    D = np.maximum(mad**2, D_FLOOR)
    for it in range(1, max_iter + 1):
        sqrtD = np.sqrt(D)
        U, r = _row_signs((Z - theta) / sqrtD)
        res_loc = float(np.max(np.abs(U.sum(axis=0)))) / T
        m, res_scale = _scale_residual(U)
        if max(res_loc, res_scale) <= tol:
            D = _normalize_scale(D, r)
            U, r = signs_and_radii(Z, theta, D)
            return MedianScaleEstimate(theta, D, U, r, it, res_loc, res_scale)
        live = r > 0
        theta = theta + sqrtD * U[live].sum(axis=0) / np.sum(1.0 / r[live])
        D = _scale_update(D, m)
    raise ConvergenceError(
        f"median/scale fixpoint did not converge in {max_iter} iterations "
        f"(location {res_loc:.3g}, scale {res_scale:.3g})",
        residuals={"location": res_loc, "scale": res_scale},
        iterations=max_iter,
    )


def zeta_hat(r) -> ZetaHat:
    """Moment estimate of ``E(r^2) {E(r^{-1})}^2`` from the radii."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise DegenerateError("degenerate radius: zero distance to the centre", int(np.argmin(r)))
    e_r2 = float(np.mean(r**2))
    e_rinv = float(np.mean(1.0 / r))
    return ZetaHat(e_r2, e_rinv, e_r2 * e_rinv**2)
