"""L2-regularized logistic regression fit by monotone gradient descent.

Objective (intercept unpenalized):

    J(w, b) = mean_i [ log(1 + exp(z_i)) - y_i * z_i ] + l2 * ||w||^2 / (2n)

with z = X w + b. Steps use backtracking line search (Armijo), so the loss
never increases across accepted iterations; the loop stops when the gradient
norm drops below ``tolerance`` or after ``max_iterations``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class LogRegState:
    weights: np.ndarray
    intercept: float
    n_iterations: int
    converged: bool
    grad_norm: float


def loss_and_grad(weights: np.ndarray, intercept: float, X: np.ndarray,
                  y: np.ndarray, l2_strength: float) -> tuple[float, np.ndarray, float]:
    """Regularized mean log-loss and its gradient wrt (weights, intercept)."""
    n = X.shape[0]
    z = X @ weights + intercept
    # log(1 + e^z) - y z, computed stably
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z))
    loss += l2_strength * float(weights @ weights) / (2.0 * n)
    p = _sigmoid(z)
    residual = p - y
    grad_w = X.T @ residual / n + (l2_strength / n) * weights
    grad_b = float(residual.mean())
    return loss, grad_w, grad_b


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def fit_logreg(X: np.ndarray, y: np.ndarray, l2_strength: float,
               max_iterations: int, tolerance: float) -> LogRegState:
    n, d = X.shape
    w = np.zeros(d)
    b = 0.0
    step = 1.0
    loss, gw, gb = loss_and_grad(w, b, X, y, l2_strength)
    grad_norm = float(np.sqrt(gw @ gw + gb * gb))
    iterations = 0
    converged = grad_norm < tolerance
    while not converged and iterations < max_iterations:
        g_sq = grad_norm**2
        # Armijo backtracking from the last accepted step size.
        while True:
            w_new = w - step * gw
            b_new = b - step * gb
            loss_new, gw_new, gb_new = loss_and_grad(w_new, b_new, X, y, l2_strength)
            if loss_new <= loss - 1e-4 * step * g_sq or step < 1e-16:
                break
            step *= 0.5
        w, b, loss, gw, gb = w_new, b_new, loss_new, gw_new, gb_new
        grad_norm = float(np.sqrt(gw @ gw + gb * gb))
        iterations += 1
        step = min(step * 2.0, 1e6)
        converged = grad_norm < tolerance
    return LogRegState(weights=w, intercept=b, n_iterations=iterations,
                       converged=converged, grad_norm=grad_norm)


def logreg_probability(state: LogRegState, Q: np.ndarray) -> np.ndarray:
    return _sigmoid(Q @ state.weights + state.intercept)


def logreg_to_dict(state: LogRegState) -> dict:
    return {
        "weights": state.weights.tolist(),
        "intercept": state.intercept,
        "n_iterations": state.n_iterations,
        "converged": state.converged,
        "grad_norm": state.grad_norm,
    }


def logreg_from_dict(payload: dict) -> LogRegState:
    return LogRegState(
        weights=np.asarray(payload["weights"], dtype=np.float64),
        intercept=float(payload["intercept"]),
        n_iterations=int(payload["n_iterations"]),
        converged=bool(payload["converged"]),
        grad_norm=float(payload["grad_norm"]),
    )
