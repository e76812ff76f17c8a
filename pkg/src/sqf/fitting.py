"""Weighted nonlinear least squares for fringe scans and gain sweeps.

All fits run Levenberg-damped Gauss-Newton with analytic Jacobians and
deterministic initialization (Fourier component for fringes, lowest-gain
anchor for rate curves).  Uncertainties come from the linearized covariance
at the optimum, scaled by the reduced chi-square.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .analytic import RateParams, excitation_rate, mean_photons

MAX_ITERATIONS = 100


@dataclass(frozen=True)
class FitResult:
    """Outcome of one least-squares fit."""

    parameters: dict
    stderr: dict
    covariance: np.ndarray
    residual_norm: float
    converged: bool
    iterations: int
    message: str = ""
    residual_history: tuple = field(default_factory=tuple)

    def as_dict(self) -> dict:
        return {
            "parameters": dict(self.parameters),
            "stderr": dict(self.stderr),
            "covariance": np.asarray(self.covariance).tolist(),
            "residual_norm": self.residual_norm,
            "converged": self.converged,
            "iterations": self.iterations,
            "message": self.message,
        }


def _prepare_weights(n: int, weights) -> np.ndarray:
    if weights is None:
        return np.ones(n)
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (n,):
        raise ValueError(f"expected {n} weights, got shape {weights.shape}")
    if np.any(weights <= 0.0) or not np.all(np.isfinite(weights)):
        raise ValueError("weights must be positive and finite")
    return weights


def _levenberg(residual_fn, jacobian_fn, x0, clip_fn=None, max_iter=MAX_ITERATIONS):
    """Damped Gauss-Newton descent; accepted steps never increase the objective."""
    x = np.asarray(x0, dtype=float)
    if clip_fn is not None:
        x = clip_fn(x)
    r = residual_fn(x)
    obj = float(r @ r)
    history = [math.sqrt(obj)]
    lam = 1e-3
    converged = False
    iterations = 0
    message = ""
    for iterations in range(1, max_iter + 1):
        jac = jacobian_fn(x)
        grad = jac.T @ r
        if np.max(np.abs(grad)) <= 1e-12 * max(1.0, obj):
            converged = True
            break
        jtj = jac.T @ jac
        damping_scale = np.maximum(np.diag(jtj), 1e-12)
        accepted = False
        for _ in range(40):
            lhs = jtj + lam * np.diag(damping_scale)
            try:
                step = np.linalg.solve(lhs, -grad)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            x_new = clip_fn(x + step) if clip_fn is not None else x + step
            r_new = residual_fn(x_new)
            obj_new = float(r_new @ r_new)
            if obj_new <= obj and np.all(np.isfinite(r_new)):
                accepted = True
                break
            lam *= 10.0
        if not accepted:
            converged = np.max(np.abs(grad)) <= 1e-8 * max(1.0, obj)
            message = "" if converged else "no descent step found"
            break
        step_size = float(np.max(np.abs(x_new - x)))
        x, r, obj = x_new, r_new, obj_new
        history.append(math.sqrt(obj))
        lam = max(lam / 3.0, 1e-12)
        if step_size <= 1e-12 * (1.0 + float(np.max(np.abs(x)))):
            converged = True
            break
    else:
        message = f"iteration cap {max_iter} reached"
    return x, math.sqrt(obj), converged, iterations, tuple(history), message


def _covariance(jacobian: np.ndarray, residual_norm: float) -> np.ndarray:
    n_pts, n_par = jacobian.shape
    dof = n_pts - n_par
    sigma2 = residual_norm**2 / dof if dof > 0 else 0.0
    return sigma2 * np.linalg.pinv(jacobian.T @ jacobian)


def fit_fringe(phi, values, weights=None, max_iter: int = MAX_ITERATIONS) -> FitResult:
    """Fit value = A + B cos(2 phi + delta).

    Needs at least 5 points spanning one half-wavelength period (pi in phi).
    B is reported non-negative with the sign absorbed into delta in (-pi, pi];
    the derived fringe visibility B/A and its propagated standard error are
    included in the parameters.
    """
    phi = np.asarray(phi, dtype=float)
    values = np.asarray(values, dtype=float)
    if phi.ndim != 1 or phi.shape != values.shape:
        raise ValueError("phi and values must be 1-d arrays of equal length")
    if phi.size < 5:
        raise ValueError("fringe fit needs at least 5 points")
    span = float(phi.max() - phi.min())
    step = float(np.median(np.diff(np.sort(phi)))) if phi.size > 1 else 0.0
    if span + step < math.pi * (1.0 - 1e-9):
        raise ValueError("fringe fit needs data spanning at least one period (pi)")
    w = _prepare_weights(phi.size, weights)
    sqrt_w = np.sqrt(w)

    a0 = float(np.sum(w * values) / np.sum(w))
    z = np.sum(w * (values - a0) * np.exp(-2j * phi)) / np.sum(w)
    x0 = np.array([a0, 2.0 * abs(z), math.atan2(z.imag, z.real)])

    def residual(x):
        a, b, delta = x
        return sqrt_w * (a + b * np.cos(2.0 * phi + delta) - values)

    def jacobian(x):
        _, b, delta = x
        c = np.cos(2.0 * phi + delta)
        s = np.sin(2.0 * phi + delta)
        return np.column_stack([sqrt_w, sqrt_w * c, -b * sqrt_w * s])

    x, norm, converged, iterations, history, message = _levenberg(
        residual, jacobian, x0, max_iter=max_iter
    )
    a, b, delta = x
    if b < 0.0:
        b, delta = -b, delta + math.pi
    delta = math.remainder(delta, 2.0 * math.pi)
    if delta <= -math.pi:
        delta += 2.0 * math.pi
    x = np.array([a, b, delta])
    flat = b <= 1e-12 * max(1.0, abs(a))
    if flat:
        b = 0.0
        message = (message + "; " if message else "") + "flat data: fringe phase undefined"
    cov = _covariance(jacobian(x), norm)
    visibility = b / a if a != 0.0 else 0.0
    if a != 0.0:
        grad_vis = np.array([-b / a**2, 1.0 / a, 0.0])
        vis_err = float(np.sqrt(max(grad_vis @ cov @ grad_vis, 0.0)))
    else:
        vis_err = float("inf")
    params = {"A": a, "B": b, "delta": delta, "visibility": visibility}
    errs = {
        "A": float(np.sqrt(max(cov[0, 0], 0.0))),
        "B": float(np.sqrt(max(cov[1, 1], 0.0))),
        "delta": float(np.sqrt(max(cov[2, 2], 0.0))),
        "visibility": vis_err,
    }
    return FitResult(params, errs, cov, norm, converged, iterations, message, history)


def fit_visibility_vs_gain(gains, visibilities, weights=None) -> FitResult:
    """One-parameter fit of v_max * V1(sinh^2 g), solved in closed form.

    V1 is the same-detector two-photon visibility law (n+1)/(5n+1).
    """
    gains = np.asarray(gains, dtype=float)
    visibilities = np.asarray(visibilities, dtype=float)
    if gains.ndim != 1 or gains.shape != visibilities.shape or gains.size == 0:
        raise ValueError("gains and visibilities must be matching non-empty arrays")
    w = _prepare_weights(gains.size, weights)
    n_bar = np.sinh(gains) ** 2
    model = (n_bar + 1.0) / (5.0 * n_bar + 1.0)
    denom = float(np.sum(w * model**2))
    if denom == 0.0:
        raise ValueError("degenerate visibility data")
    v_max = float(np.sum(w * visibilities * model) / denom)
    resid = np.sqrt(w) * (v_max * model - visibilities)
    norm = float(np.linalg.norm(resid))
    dof = gains.size - 1
    sigma2 = norm**2 / dof if dof > 0 else 0.0
    cov = np.array([[sigma2 / denom]])
    return FitResult(
        parameters={"v_max": v_max},
        stderr={"v_max": float(np.sqrt(cov[0, 0]))},
        covariance=cov,
        residual_norm=norm,
        converged=True,
        iterations=0,
        residual_history=(norm,),
    )


def _rate_base(order: int, n_bar: np.ndarray) -> np.ndarray:
    if order == 2:
        return 2.0 * (n_bar + 5.0 * n_bar**2)
    if order == 3:
        return 12.0 * (7.0 * n_bar**3 + 3.0 * n_bar**2)
    raise ValueError(f"unsupported rate order {order}")


def _rate_base_dn(order: int, n_bar: np.ndarray) -> np.ndarray:
    if order == 2:
        return 2.0 * (1.0 + 10.0 * n_bar)
    return 12.0 * (21.0 * n_bar**2 + 6.0 * n_bar)


def fit_rate_vs_gain(gains, rates, order: int, weights=None, max_iter: int = MAX_ITERATIONS) -> FitResult:
    """Two-parameter fit rate = sigma * base_k(sinh^2(alpha g)) in log space.

    The data spans decades, so residuals are taken on log(rate); alpha is
    bounded to (0, 2] and sigma kept positive by optimizing log(sigma).
    """
    gains = np.asarray(gains, dtype=float)
    rates = np.asarray(rates, dtype=float)
    if gains.ndim != 1 or gains.shape != rates.shape:
        raise ValueError("gains and rates must be 1-d arrays of equal length")
    if gains.size < 3:
        raise ValueError("rate fit needs at least 3 points")
    if np.any(rates <= 0.0):
        raise ValueError("rates must be positive")
    if np.any(gains <= 0.0):
        raise ValueError("gains must be positive for the rate law")
    w = _prepare_weights(gains.size, weights)
    sqrt_w = np.sqrt(w)
    log_rates = np.log(rates)

    anchor = int(np.argmin(gains))
    sigma0 = rates[anchor] / _rate_base(order, np.array(mean_photons(gains[anchor])))
    x0 = np.array([1.0, math.log(float(sigma0))])

    def clip(x):
        out = x.copy()
        out[0] = min(max(out[0], 1e-6), 2.0)
        return out

    def residual(x):
        alpha, log_sigma = x
        n_bar = np.sinh(alpha * gains) ** 2
        return sqrt_w * (log_sigma + np.log(_rate_base(order, n_bar)) - log_rates)

    def jacobian(x):
        alpha, _ = x
        n_bar = np.sinh(alpha * gains) ** 2
        dn_dalpha = gains * np.sinh(2.0 * alpha * gains)
        dlog_dalpha = _rate_base_dn(order, n_bar) / _rate_base(order, n_bar) * dn_dalpha
        return np.column_stack([sqrt_w * dlog_dalpha, sqrt_w])

    x, norm, converged, iterations, history, message = _levenberg(
        residual, jacobian, x0, clip_fn=clip, max_iter=max_iter
    )
    alpha, log_sigma = x
    sigma = math.exp(log_sigma)
    cov_internal = _covariance(jacobian(x), norm)
    jac_out = np.diag([1.0, sigma])
    cov = jac_out @ cov_internal @ jac_out.T
    sigma_key = f"sigma{order}"
    params = {"alpha": float(alpha), sigma_key: float(sigma)}
    errs = {
        "alpha": float(np.sqrt(max(cov[0, 0], 0.0))),
        sigma_key: float(np.sqrt(max(cov[1, 1], 0.0))),
    }
    return FitResult(params, errs, cov, norm, converged, iterations, message, history)


def rate_curve(order: int, gains, alpha: float, sigma: float) -> np.ndarray:
    """Model rate values for plotting/round-trips."""
    params = RateParams(sigma2=sigma, sigma3=sigma, alpha=alpha)
    return np.array([excitation_rate(order, mean_photons(alpha * g), params) for g in gains])
