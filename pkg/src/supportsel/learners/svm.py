"""Soft-margin SVM trained by sequential pairwise optimization of the dual.

Works on labels in {-1, +1} internally. Each step picks the maximal violating
pair (steepest feasible ascent direction under the box and equality
constraints) and solves the two-variable subproblem in closed form; the run
stops when the largest KKT violation falls below ``tol``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

DEFAULT_TOL = 1e-3
ALPHA_EPS = 1e-10


def rbf_kernel(a: np.ndarray, b: np.ndarray, gamma: float) -> float:
    """exp(-gamma * ||a - b||^2); symmetric, equals 1 when a == b."""
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    diff = np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)
    return float(np.exp(-gamma * np.dot(diff, diff)))


def _gram(A: np.ndarray, B: np.ndarray, kernel: str, gamma: float) -> np.ndarray:
    if kernel == "linear":
        return A @ B.T
    sq = (A**2).sum(axis=1)[:, None] + (B**2).sum(axis=1)[None, :] - 2.0 * (A @ B.T)
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-gamma * sq)


def resolve_gamma(gamma: float | str, X: np.ndarray) -> float:
    """'scale' resolves to 1 / (d * var(X)) over all entries of the training inputs."""
    if gamma == "scale":
        var = float(X.var())
        if var <= 0:
            var = 1.0
        return 1.0 / (X.shape[1] * var)
    return float(gamma)


@dataclass
class SvmState:
    kernel: str
    gamma: float          # resolved numeric value (kept but unused for linear)
    c: float
    n_features: int
    sv_X: np.ndarray      # support vectors, in scaled input space
    sv_coef: np.ndarray   # alpha_i * y_i for each support vector
    sv_alpha: np.ndarray
    sv_y: np.ndarray
    sv_index: np.ndarray  # positions of the support vectors in the training set
    bias: float
    converged: bool
    n_steps: int


@njit(cache=True)
def _smo(K, y, c, tol, max_steps):
    """Pairwise dual ascent; returns (alpha, F, steps, converged).

    Pair choice: i is the worst violator on the up side; j minimizes the
    second-order objective decrease against i among down-side candidates.
    F_i = f~(x_i) - y_i with the bias omitted; alpha starts at 0, F at -y.
    """
    n = y.shape[0]
    alpha = np.zeros(n)
    F = -y.copy()
    steps = 0
    converged = False
    while steps < max_steps:
        g_max = -np.inf
        i = -1
        for t in range(n):
            up = (y[t] > 0 and alpha[t] < c - ALPHA_EPS) or (y[t] < 0 and alpha[t] > ALPHA_EPS)
            if up and -F[t] > g_max:
                g_max = -F[t]
                i = t
        g_min = np.inf
        j = -1
        best_score = 0.0
        for t in range(n):
            low = (y[t] > 0 and alpha[t] > ALPHA_EPS) or (y[t] < 0 and alpha[t] < c - ALPHA_EPS)
            if not low:
                continue
            mf = -F[t]
            if mf < g_min:
                g_min = mf
            diff = g_max - mf
            if diff > 0:
                quad = K[i, i] + K[t, t] - 2.0 * K[i, t]
                if quad < 1e-12:
                    quad = 1e-12
                score = -(diff * diff) / quad
                if score < best_score:
                    best_score = score
                    j = t
        if i < 0 or g_max - g_min <= tol or j < 0:
            converged = g_max - g_min <= tol
            break

        yi = y[i]
        yj = y[j]
        s = yi * yj
        if s > 0:
            lo = max(0.0, alpha[i] + alpha[j] - c)
            hi = min(c, alpha[i] + alpha[j])
        else:
            lo = max(0.0, alpha[j] - alpha[i])
            hi = min(c, c + alpha[j] - alpha[i])
        quad = K[i, i] + K[j, j] - 2.0 * K[i, j]
        if quad < 1e-12:
            quad = 1e-12
        aj_new = alpha[j] + yj * (F[i] - F[j]) / quad
        if aj_new < lo:
            aj_new = lo
        elif aj_new > hi:
            aj_new = hi
        ai_new = alpha[i] + s * (alpha[j] - aj_new)
        d_ai = ai_new - alpha[i]
        d_aj = aj_new - alpha[j]
        if abs(d_aj) < 1e-14 and abs(d_ai) < 1e-14:
            break  # numerically stuck on the most violating pair
        ci = d_ai * yi
        cj = d_aj * yj
        for t in range(n):
            F[t] += ci * K[i, t] + cj * K[j, t]
        alpha[i] = ai_new
        alpha[j] = aj_new
        steps += 1
    return alpha, F, steps, converged


def fit_svm(X: np.ndarray, y01: np.ndarray, kernel: str, c: float,
            gamma: float | str, tol: float = DEFAULT_TOL,
            max_steps: int | None = None) -> SvmState:
    n = X.shape[0]
    y = np.where(y01 > 0, 1.0, -1.0)
    gamma_value = resolve_gamma(gamma, X)
    K = _gram(X, X, kernel, gamma_value)
    if max_steps is None:
        max_steps = max(200 * n, 20000)
    alpha, F, steps, converged = _smo(np.ascontiguousarray(K), y, float(c),
                                      float(tol), max_steps)

    at_lower = alpha <= ALPHA_EPS
    at_upper = alpha >= c - ALPHA_EPS
    free = (~at_lower) & (~at_upper)
    if free.any():
        bias = float(np.mean(-F[free]))
    else:
        up_mask = np.where(y > 0, ~at_upper, ~at_lower)
        low_mask = np.where(y > 0, ~at_lower, ~at_upper)
        hi_b = (-F[up_mask]).max() if up_mask.any() else 0.0
        lo_b = (-F[low_mask]).min() if low_mask.any() else 0.0
        bias = float((hi_b + lo_b) / 2.0)

    sv = alpha > ALPHA_EPS
    return SvmState(
        kernel=kernel,
        gamma=gamma_value,
        c=c,
        n_features=X.shape[1],
        sv_X=X[sv].astype(np.float64, copy=True),
        sv_coef=(alpha[sv] * y[sv]),
        sv_alpha=alpha[sv].copy(),
        sv_y=y[sv].copy(),
        sv_index=np.flatnonzero(sv),
        bias=bias,
        converged=converged,
        n_steps=steps,
    )


def svm_decision(state: SvmState, Q: np.ndarray) -> np.ndarray:
    if state.sv_X.shape[0] == 0:
        return np.full(Q.shape[0], state.bias)
    K = _gram(Q, state.sv_X, state.kernel, state.gamma)
    return K @ state.sv_coef + state.bias


def kkt_report(state: SvmState, X: np.ndarray, y01: np.ndarray,
               tol: float = DEFAULT_TOL) -> dict:
    """Evaluate the stationarity conditions over the training set (scaled inputs).

    Free support vectors must sit on the margin, zero-alpha points at or
    outside it, bound points at or inside it; sum(alpha_i y_i) must vanish.
    Returns the worst violation per category.
    """
    y = np.where(y01 > 0, 1.0, -1.0)
    margins = y * svm_decision(state, X)
    alpha = np.zeros(X.shape[0])
    alpha[state.sv_index] = state.sv_alpha
    at_zero = alpha <= ALPHA_EPS
    at_c = alpha >= state.c - ALPHA_EPS
    free = ~at_zero & ~at_c
    worst_zero = float(np.maximum(1.0 - margins[at_zero], 0.0).max()) if at_zero.any() else 0.0
    worst_free = float(np.abs(margins[free] - 1.0).max()) if free.any() else 0.0
    worst_c = float(np.maximum(margins[at_c] - 1.0, 0.0).max()) if at_c.any() else 0.0
    return {
        "zero_alpha": worst_zero,
        "free": worst_free,
        "bound": worst_c,
        "equality": float(abs(np.sum(state.sv_alpha * state.sv_y))),
        "max_violation": max(worst_zero, worst_free, worst_c),
        "tol": tol,
    }


def svm_to_dict(state: SvmState) -> dict:
    return {
        "kernel": state.kernel,
        "gamma": state.gamma,
        "c": state.c,
        "n_features": state.n_features,
        "sv_X": state.sv_X.tolist(),
        "sv_coef": state.sv_coef.tolist(),
        "sv_alpha": state.sv_alpha.tolist(),
        "sv_y": state.sv_y.tolist(),
        "sv_index": state.sv_index.tolist(),
        "bias": state.bias,
        "converged": state.converged,
        "n_steps": state.n_steps,
    }


def svm_from_dict(payload: dict) -> SvmState:
    d = int(payload["n_features"])
    return SvmState(
        kernel=payload["kernel"],
        gamma=float(payload["gamma"]),
        c=float(payload["c"]),
        n_features=d,
        sv_X=np.asarray(payload["sv_X"], dtype=np.float64).reshape(-1, d),
        sv_coef=np.asarray(payload["sv_coef"], dtype=np.float64),
        sv_alpha=np.asarray(payload["sv_alpha"], dtype=np.float64),
        sv_y=np.asarray(payload["sv_y"], dtype=np.float64),
        sv_index=np.asarray(payload["sv_index"], dtype=np.int64),
        bias=float(payload["bias"]),
        converged=bool(payload["converged"]),
        n_steps=int(payload["n_steps"]),
    )
