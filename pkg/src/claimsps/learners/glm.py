"""Logistic regression by iteratively reweighted least squares."""

from __future__ import annotations

import numpy as np

from .base import FitError, Learner, register_kind

MAX_ITER = 100
REL_TOL = 1e-8
RIDGE_START = 1e-6
RIDGE_MAX = 1e-2


def sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=float)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def logistic_nll(beta: np.ndarray, X: np.ndarray, y: np.ndarray) -> float:
    """Mean negative log-likelihood at coefficients ``beta`` (no intercept
    handling: pass a design with an explicit constant column if wanted)."""
    z = X @ beta
    # log(1 + exp(z)) - y z, computed stably
    return float(np.mean(np.logaddexp(0.0, z) - y * z))


def logistic_grad(beta: np.ndarray, X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Gradient of ``logistic_nll`` with respect to ``beta``."""
    p = sigmoid(X @ beta)
    return X.T @ (p - y) / X.shape[0]


def fit_irls(X: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, float]:
    """Newton/IRLS on the mean NLL. Stops when the NLL change drops below
    1e-8 relative (with a floor of 1 for near-zero NLL) or after 100
    iterations. A singular or ill-conditioned Hessian gets an escalating
    ridge (1e-6 up to 1e-2), which also tames quasi-separation from sparse
    binary columns.
    """
    n, p = X.shape
    beta = np.zeros(p)
    current = logistic_nll(beta, X, y)
    for _ in range(MAX_ITER):
        prob = sigmoid(X @ beta)
        grad = X.T @ (prob - y) / n
        w = prob * (1.0 - prob)
        hess = (X.T * w) @ X / n

        delta = None
        ridge = 0.0
        while True:
            try:
                h = hess if ridge == 0.0 else hess + ridge * np.eye(p)
                cand = np.linalg.solve(h, -grad)
                if np.isfinite(cand).all():
                    delta = cand
                    break
            except np.linalg.LinAlgError:
                pass
            ridge = RIDGE_START if ridge == 0.0 else ridge * 10.0
            if ridge > RIDGE_MAX:
                raise FitError("glm_logistic: Hessian unusable even at maximum ridge")

        # halve the step until the NLL does not increase
        step = 1.0
        new = logistic_nll(beta + delta, X, y)
        while new > current and step > 1e-8:
            step *= 0.5
            new = logistic_nll(beta + step * delta, X, y)
        if new > current:
            break  # no improving step; treat as converged
        beta = beta + step * delta
        if current - new <= REL_TOL * max(1.0, abs(current)):
            current = new
            break
        current = new
    return beta, current


@register_kind
class LogisticRegressionLearner(Learner):
    """Plain multivariate logistic regression (no regularization)."""

    kind = "glm_logistic"
    default_grid = [{}]

    def _fit(self, X, y, params, rng):
        design = np.column_stack([np.ones(X.shape[0]), X])
        beta, final_nll = fit_irls(design, y)
        return {"coef": beta.tolist(), "train_nll": final_nll}

    @staticmethod
    def _predict(payload, X):
        beta = np.asarray(payload["coef"], dtype=float)
        return sigmoid(beta[0] + X @ beta[1:])
