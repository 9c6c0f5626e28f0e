"""
Numerical building blocks: bracketed root finding, composite Simpson
averaging, fixed-step Runge-Kutta integration and damped Gauss-Newton
least squares.
"""

import math
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np
from scipy import integrate, optimize

from .errors import NoSolutionError, RankDeficiencyError, ValidationError


def bracketed_root(func: Callable[[float], float], lo: float, hi: float,
                   fprime: Optional[Callable[[float], float]] = None,
                   xtol: float = 1e-15, newton_steps: int = 5) -> float:
    """
    Bisect `func` on [lo, hi], then polish with a few Newton steps.

    A Newton step is kept only while it stays inside the bracket and reduces
    |func|, so the result is never worse than the bisection estimate.
    """
    f_lo, f_hi = func(lo), func(hi)
    if f_lo == 0.0:
        return lo
    if f_hi == 0.0:
        return hi
    if math.copysign(1.0, f_lo) == math.copysign(1.0, f_hi):
        raise NoSolutionError(
            f"No sign change on [{lo!r}, {hi!r}]: f(lo)={f_lo!r}, f(hi)={f_hi!r}"
        )

    x = optimize.bisect(func, lo, hi, xtol=xtol, maxiter=400)
    fx = func(x)
    for _ in range(newton_steps):
        if fx == 0.0:
            break
        if fprime is not None:
            slope = fprime(x)
        else:
            h = 1e-7 * max(abs(x), 1.0)
            slope = (func(x + h) - func(x - h)) / (2.0 * h)
        if slope == 0.0 or not math.isfinite(slope):
            break
        x_new = x - fx / slope
        if not lo <= x_new <= hi:
            break
        f_new = func(x_new)
        if abs(f_new) >= abs(fx):
            break
        x, fx = x_new, f_new
    return x


def simpson_mean(values: np.ndarray, x: np.ndarray) -> float:
    """Mean of sampled values over [x[0], x[-1]] by composite Simpson"""
    values = np.asarray(values, dtype=float)
    x = np.asarray(x, dtype=float)
    if x.size < 3:
        raise ValidationError(f"Simpson quadrature needs at least 3 nodes, got {x.size}")
    span = x[-1] - x[0]
    if span == 0.0:
        return float(values[0])
    return float(integrate.simpson(values, x=x) / span)


def rk4_integrate(rhs: Callable[[float, np.ndarray], np.ndarray], y0: np.ndarray,
                  t0: float, t1: float, step: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Classical fourth-order Runge-Kutta with a fixed step.

    The interval is cut into ceil((t1 - t0) / step) equal steps so t1 is hit
    exactly. Returns (times, states) with states[k] the solution at times[k].
    """
    n_steps = max(1, int(math.ceil((t1 - t0) / step - 1e-12)))
    h = (t1 - t0) / n_steps
    times = t0 + h * np.arange(n_steps + 1)
    times[-1] = t1
    states = np.empty((n_steps + 1, np.size(y0)))
    y = np.array(y0, dtype=float)
    states[0] = y
    for k in range(n_steps):
        t = times[k]
        k1 = rhs(t, y)
        k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1)
        k3 = rhs(t + 0.5 * h, y + 0.5 * h * k2)
        k4 = rhs(t + h, y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        states[k + 1] = y
    return times, states


@dataclass(frozen=True)
class GaussNewtonResult:
    params: np.ndarray
    cost: float
    iterations: int
    converged: bool


def _is_stationary(normal: np.ndarray, gradient: np.ndarray, p: np.ndarray, rtol: float) -> bool:
    try:
        step = np.linalg.solve(normal, -gradient)
    except np.linalg.LinAlgError:
        return False
    tolerance = math.sqrt(rtol) * (np.abs(p) + math.sqrt(np.finfo(float).eps))
    return bool(np.all(np.abs(step) <= tolerance))


def damped_gauss_newton(residual: Callable[[np.ndarray], np.ndarray],
                        jacobian: Callable[[np.ndarray], np.ndarray],
                        p0: np.ndarray, weights: Optional[np.ndarray] = None,
                        max_iter: int = 200, rtol: float = 1e-10,
                        cost_floor: float = 0.0,
                        max_condition: float = 1e14) -> GaussNewtonResult:
    """
    Minimize 0.5 * sum(w * r(p)**2) with multiplicatively damped Gauss-Newton.

    The damping factor mu scales the diagonal of the normal matrix; it grows
    tenfold after a rejected step and shrinks tenfold after an accepted one.
    Convergence needs a stationary point: the undamped Gauss-Newton step must
    be below sqrt(rtol) of each parameter once the cost has stalled or no
    damped step lowers it any more.
    """
    p = np.array(p0, dtype=float)
    r = residual(p)
    w = np.ones_like(r) if weights is None else np.asarray(weights, dtype=float)
    cost = 0.5 * float(np.sum(w * r * r))
    mu = 1e-3
    stalled = 0

    for iteration in range(1, max_iter + 1):
        jac = jacobian(p)
        jtw = jac.T * w
        normal = jtw @ jac
        gradient = jtw @ r
        diag = np.diag(normal).copy()
        if np.any(diag <= 0.0) or not np.all(np.isfinite(normal)):
            raise RankDeficiencyError("Normal equations are singular (a parameter has no influence)")
        scale = np.sqrt(diag)
        if np.linalg.cond(normal / np.outer(scale, scale)) > max_condition:
            raise RankDeficiencyError("Normal equations are numerically singular")
        if stalled >= 2 and _is_stationary(normal, gradient, p, rtol):
            return GaussNewtonResult(p, cost, iteration - 1, True)

        while True:
            try:
                dp = np.linalg.solve(normal + mu * np.diag(diag), -gradient)
            except np.linalg.LinAlgError as exc:
                raise RankDeficiencyError(f"Normal equations are singular: {exc}") from exc
            p_new = p + dp
            r_new = residual(p_new)
            cost_new = 0.5 * float(np.sum(w * r_new * r_new))
            if np.isfinite(cost_new) and cost_new <= cost:
                break
            mu *= 10.0
            if mu > 1e20:
                # no damped step lowers the cost
                return GaussNewtonResult(p, cost, iteration, _is_stationary(normal, gradient, p, rtol))

        change = (cost - cost_new) / cost if cost > 0.0 else 0.0
        p, r, cost = p_new, r_new, cost_new
        mu = max(mu / 10.0, 1e-15)
        stalled = stalled + 1 if change < rtol else 0
        if cost <= cost_floor:
            return GaussNewtonResult(p, cost, iteration, True)

    return GaussNewtonResult(p, cost, max_iter, False)
