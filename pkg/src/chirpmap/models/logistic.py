"""L2-penalized logistic regression fitted by gradient ascent.

Maximizes  LL(w, b) = sum_i [y_i z_i - log(1 + e^{z_i})] - (lambda/2)||w||^2
with z = Xw + b; the intercept is not penalized. Steps use Armijo
backtracking from a step size that adapts across iterations; training
stops when the gradient norm drops below tol or the budget runs out.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DataError


@dataclass(frozen=True)
class LogisticConfig:
    l2_lambda: float = 1e-4
    max_iters: int = 5000
    tol: float = 1e-6

    def __post_init__(self):
        if self.l2_lambda < 0:
            raise DataError("l2_lambda must be nonnegative")
        if self.max_iters < 1 or self.tol <= 0:
            raise DataError("max_iters must be >= 1 and tol positive")


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def penalized_log_likelihood(x: np.ndarray, y: np.ndarray, w: np.ndarray, b: float, l2_lambda: float) -> float:
    z = x @ w + b
    return float(np.sum(y * z - np.logaddexp(0.0, z)) - 0.5 * l2_lambda * (w @ w))


def _gradient(x: np.ndarray, y: np.ndarray, w: np.ndarray, b: float, l2_lambda: float) -> np.ndarray:
    resid = y - _sigmoid(x @ w + b)
    return np.concatenate([x.T @ resid - l2_lambda * w, [resid.sum()]])


@dataclass
class LogisticModel:
    w: np.ndarray
    b: float
    config: LogisticConfig
    converged: bool
    n_iters: int
    final_gradient_norm: float

    kind = "logistic_regression"

    def decision_function(self, points) -> np.ndarray:
        p = np.atleast_2d(np.asarray(points, dtype=np.float64))
        return p @ self.w + self.b

    def predict_proba(self, points) -> np.ndarray:
        return _sigmoid(self.decision_function(points))

    def predict(self, points) -> np.ndarray:
        # sigma(z) >= 0.5 iff z >= 0
        return (self.decision_function(points) >= 0.0).astype(np.int64)


def fit_logistic(x, y, config: LogisticConfig = LogisticConfig()) -> LogisticModel:
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64)
    n, d = x.shape
    if y.shape[0] != n:
        raise DataError("labels misaligned with rows")
    if len(np.unique(y)) < 2:
        raise DataError("logistic training needs both classes present")

    w = np.zeros(d, dtype=np.float64)
    b = 0.0
    ll = penalized_log_likelihood(x, y, w, b, config.l2_lambda)
    step = 1.0
    armijo = 1e-4
    converged = False
    grad_norm = np.inf
    it = 0

    for it in range(1, config.max_iters + 1):
        g = _gradient(x, y, w, b, config.l2_lambda)
        grad_norm = float(np.linalg.norm(g))
        if grad_norm < config.tol:
            converged = True
            break
        step = min(step * 2.0, 1e6)  # retry larger steps after cautious ones
        gw, gb = g[:d], g[d]
        g_sq = grad_norm * grad_norm
        while True:
            w_new = w + step * gw
            b_new = b + step * gb
            ll_new = penalized_log_likelihood(x, y, w_new, b_new, config.l2_lambda)
            if ll_new >= ll + armijo * step * g_sq:
                break
            step *= 0.5
            if step < 1e-20:
                break
        if step < 1e-20:
            break  # no ascent step possible at float precision
        w, b, ll = w_new, float(b_new), ll_new

    return LogisticModel(
        w=w,
        b=b,
        config=config,
        converged=converged,
        n_iters=it,
        final_gradient_norm=grad_norm,
    )


__all__ = ["LogisticConfig", "LogisticModel", "fit_logistic", "penalized_log_likelihood"]
