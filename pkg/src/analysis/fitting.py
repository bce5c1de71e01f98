"""
Saturating Exponential Fits

MODEL:
    y = B - A * exp(-C * x)

JACOBIAN:
    dy/dA = -exp(-C x),  dy/dB = 1,  dy/dC = A x exp(-C x)

SOLVER (damped Gauss-Newton, Levenberg-Marquardt style):
    (J^T W J + lam * D) delta = J^T W r,   r = y - model,  D = diag(J^T W J)
    accepted step  -> lam / 10
    rejected step  -> lam * 10
Stops when the relative parameter change drops below 1e-8 or after 200
iterations. Standard errors come from (J^T W J)^-1 scaled by the reduced
chi-square.
"""

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from src.errors import FitError, ParameterError


LOG_FLOOR = 1e-6
MAX_ITERATIONS = 200
STEP_TOLERANCE = 1e-8
LAMBDA_START = 1e-3
LAMBDA_MAX = 1e12


@dataclass(eq=False)
class FitResult:
    """Fitted (A, B, C) with uncertainties and solver diagnostics"""

    A: float
    B: float
    C: float
    std_errs: Tuple[float, float, float]
    residual_rms: float
    converged: bool
    iterations: int
    cost_history: List[float] = field(default_factory=list)

    @property
    def params(self) -> np.ndarray:
        return np.array([self.A, self.B, self.C])

    def to_row(self) -> dict:
        return {
            'A': self.A, 'B': self.B, 'C': self.C,
            'A_err': self.std_errs[0], 'B_err': self.std_errs[1], 'C_err': self.std_errs[2],
            'residual_rms': self.residual_rms,
            'converged': self.converged,
            'iterations': self.iterations
        }


def sat_exp_eval(A: float, B: float, C: float, x):
    """
    B - A * exp(-C * x)

    Example:
        sat_exp_eval(0.32, 0.48, 93.78, 0.0)  # -> 0.16
    """
    return B - A * np.exp(-C * np.asarray(x, dtype=np.float64))


def sat_exp_jacobian(A: float, B: float, C: float, x) -> np.ndarray:
    """(M, 3) partial derivatives with respect to A, B, C"""
    x = np.asarray(x, dtype=np.float64)
    decay = np.exp(-C * x)
    return np.column_stack([-decay, np.ones_like(x), A * x * decay])


def _check_xs(xs: np.ndarray, ys: np.ndarray, minimum: int) -> None:
    if xs.shape != ys.shape or xs.ndim != 1:
        raise ParameterError("xs and ys must be 1-D and of equal length")
    if len(xs) < minimum:
        raise ParameterError(f"need at least {minimum} points, got {len(xs)}")
    if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(ys))):
        raise ParameterError("xs and ys must be finite")
    if np.any(np.diff(xs) <= 0):
        raise ParameterError("xs must be strictly increasing")


def initial_guess(xs: Sequence[float], ys: Sequence[float]) -> Tuple[float, float, float]:
    """
    Starting point from the data shape

    B0 = max(y), A0 = B0 - min(y), C0 from a straight-line fit of
    ln(max(B0 - y, 1e-6)) against x; all-equal ys give (0, B0, 1).
    """
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    _check_xs(xs, ys, minimum=3)

    b0 = float(np.max(ys))
    a0 = b0 - float(np.min(ys))
    if a0 == 0:
        return 0.0, b0, 1.0

    logs = np.log(np.maximum(b0 - ys, LOG_FLOOR))
    slope = np.polyfit(xs, logs, 1)[0]
    c0 = -float(slope)
    if not np.isfinite(c0) or c0 <= 0:
        c0 = LOG_FLOOR
    return a0, b0, c0


def _weighted_cost(params: np.ndarray, xs: np.ndarray, ys: np.ndarray, weights: np.ndarray) -> float:
    residual = ys - sat_exp_eval(*params, xs)
    return float(np.sum(weights * residual ** 2))


def fit_sat_exp(
    xs: Sequence[float],
    ys: Sequence[float],
    weights: Optional[Sequence[float]] = None,
    max_iterations: int = MAX_ITERATIONS,
    tolerance: float = STEP_TOLERANCE
) -> FitResult:
    """
    Least-squares fit of y = B - A exp(-C x)

    Args:
        xs: At least 4 strictly increasing x values
        ys: Observations
        weights: Optional non-negative per-point weights (default 1)
        max_iterations: Iteration cap
        tolerance: Relative parameter-change threshold

    Returns:
        FitResult; converged=False keeps the best iterate

    Example:
        fit = fit_sat_exp(sigmas, mu_inter)
        print(f"B = {fit.B:.2f} +/- {fit.std_errs[1]:.2f}")
    """
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    _check_xs(xs, ys, minimum=4)

    if weights is None:
        w = np.ones_like(xs)
    else:
        w = np.asarray(weights, dtype=np.float64)
        if w.shape != xs.shape or np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ParameterError("weights must be finite, non-negative and match xs")

    params = np.array(initial_guess(xs, ys), dtype=np.float64)
    cost = _weighted_cost(params, xs, ys, w)
    history = [cost]
    lam = LAMBDA_START
    converged = False
    iterations = 0

    while iterations < max_iterations and not converged:
        iterations += 1
        jac = sat_exp_jacobian(*params, xs)
        residual = ys - sat_exp_eval(*params, xs)
        normal = jac.T @ (w[:, None] * jac)
        gradient = jac.T @ (w * residual)

        scale = np.diag(normal).copy()
        scale = np.maximum(scale, 1e-12 * max(1.0, float(scale.max())))

        accepted = False
        while not accepted:
            if lam > LAMBDA_MAX:
                raise FitError(f"damping exceeded {LAMBDA_MAX:g} without an acceptable step")
            try:
                delta = np.linalg.solve(normal + lam * np.diag(scale), gradient)
            except np.linalg.LinAlgError:
                lam *= 10
                continue

            step_size = np.linalg.norm(delta) / (np.linalg.norm(params) + tolerance)
            trial = params + delta
            trial_cost = _weighted_cost(trial, xs, ys, w)

            if np.isfinite(trial_cost) and trial_cost <= cost:
                params, cost = trial, trial_cost
                history.append(cost)
                lam = max(lam / 10, 1e-15)
                accepted = True
            else:
                lam *= 10

            if step_size < tolerance:
                converged = True
                break

    jac = sat_exp_jacobian(*params, xs)
    residual = ys - sat_exp_eval(*params, xs)
    dof = max(len(xs) - 3, 1)
    reduced_chi2 = float(np.sum(w * residual ** 2)) / dof
    try:
        covariance = np.linalg.inv(jac.T @ (w[:, None] * jac)) * reduced_chi2
        std_errs = tuple(float(v) for v in np.sqrt(np.abs(np.diag(covariance))))
    except np.linalg.LinAlgError:
        std_errs = (float('nan'),) * 3

    return FitResult(
        A=float(params[0]),
        B=float(params[1]),
        C=float(params[2]),
        std_errs=std_errs,
        residual_rms=float(np.sqrt(np.mean(residual ** 2))),
        converged=converged,
        iterations=iterations,
        cost_history=history
    )


def sample_fit_curve(fit: FitResult, xs: Sequence[float], n_points: int = 200) -> Tuple[np.ndarray, np.ndarray]:
    """Plot-ready curve over the span of xs"""
    xs = np.asarray(xs, dtype=np.float64)
    grid = np.linspace(xs.min(), xs.max(), n_points)
    return grid, sat_exp_eval(fit.A, fit.B, fit.C, grid)


def invert_sat_exp(fit: FitResult, y: float) -> float:
    """x at which the fitted curve reaches y (NaN if it never does)"""
    if fit.A == 0 or fit.C == 0:
        return float('nan')
    ratio = (fit.B - y) / fit.A
    if ratio <= 0:
        return float('nan')
    return float(-np.log(ratio) / fit.C)


def noise_floor_crossing(fit: FitResult, floor: float, tau_mean: float) -> Tuple[float, float]:
    """
    Manufacturing variation at which uniqueness drops to the noise floor

    Args:
        fit: Fit of mu_inter(sigma)
        floor: Reliability level mu_intra at the operating point
        tau_mean: Mean node time constant in ns

    Returns:
        (sigma_min, sigma_min * tau_mean in ns): the timing resolution a
        modeling attack would have to reach
    """
    sigma_min = invert_sat_exp(fit, floor)
    return sigma_min, sigma_min * tau_mean
