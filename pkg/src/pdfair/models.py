"""Probability-of-default models: least-squares linear model and logistic regression."""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .errors import DimensionMismatch, LengthMismatch, NonConvergenceWarning, SingleClass, SingularSystem

OLS = "ols"
LOGISTIC = "logistic"
LOGISTIC_L2 = 1e-6


@dataclass(frozen=True, eq=False)
class TrainedModel:
    kind: str
    weights: np.ndarray
    intercept: float
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in (OLS, LOGISTIC):
            raise ValueError(f"unknown model kind {self.kind!r}")
        if not (np.isfinite(self.weights).all() and np.isfinite(self.intercept)):
            raise SingularSystem(f"{self.kind} fit produced non-finite parameters")

    def to_dict(self) -> dict:
        diag = {k: v for k, v in self.diagnostics.items() if k not in ("residuals", "loss_history")}
        return {
            "kind": self.kind,
            "weights": [float(w) for w in self.weights],
            "intercept": float(self.intercept),
            "diagnostics": diag,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainedModel":
        return cls(
            kind=d["kind"],
            weights=np.asarray(d["weights"], dtype=float),
            intercept=float(d["intercept"]),
            diagnostics=dict(d.get("diagnostics", {})),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _values(X) -> np.ndarray:
    return np.asarray(getattr(X, "values", X), dtype=float)


def sample_weights(y: np.ndarray, class_weight) -> np.ndarray:
    """Per-row weights for ``class_weight`` in {None, "balanced", {0: w0, 1: w1}}.

    Weights are rescaled to average 1 so loss magnitudes stay comparable.
    """
    if class_weight is None:
        return np.ones(len(y))
    if class_weight == "balanced":
        counts = np.bincount(y, minlength=2)
        per_class = len(y) / (2.0 * np.maximum(counts, 1))
    else:
        per_class = np.array([float(class_weight[0]), float(class_weight[1])])
    w = per_class[y]
    return w / w.mean()


def _check_xy(X, y):
    X = _values(X)
    y = np.asarray(y).astype(np.int64)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise LengthMismatch(f"X has {X.shape[0] if X.ndim == 2 else '?'} rows but y has {y.shape[0]}")
    return X, y


def fit_ols(X, y, class_weight=None) -> TrainedModel:
    """Least-squares fit of the 0/1 target with an intercept.

    Solves ``(Z^T W Z + lam I) b = Z^T W y`` with ``Z = [1, X]`` and
    ``lam = 1e-8 * trace(Z^T W Z) / (d + 1)``. The tiny ridge keeps the
    system solvable when one-hot blocks are collinear with the intercept.
    """
    X, y = _check_xy(X, y)
    m, d = X.shape
    if m < d + 1:
        raise SingularSystem(f"OLS needs at least d+1 = {d + 1} rows, got {m}")
    w = sample_weights(y, class_weight)
    Z = np.hstack([np.ones((m, 1)), X])
    gram = Z.T @ (Z * w[:, None])
    lam = 1e-8 * np.trace(gram) / (d + 1)
    try:
        beta = np.linalg.solve(gram + lam * np.eye(d + 1), Z.T @ (w * y))
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(f"normal equations are singular even with jitter {lam:.3g}") from exc
    if not np.isfinite(beta).all():
        raise SingularSystem("normal-equation solve returned non-finite coefficients")
    residuals = y - Z @ beta
    return TrainedModel(
        kind=OLS,
        weights=beta[1:],
        intercept=float(beta[0]),
        diagnostics={
            "final_loss": float(np.mean(w * residuals**2)),
            "iterations": 1,
            "ridge": float(lam),
            "residuals": residuals,
        },
    )


def logistic_loss_grad(params, X, y, l2=LOGISTIC_L2, weights=None):
    """Penalized mean negative log-likelihood and its gradient.

    ``params`` is ``[intercept, w_1..w_d]``; the intercept is not penalized.
    """
    X = _values(X)
    b, w = params[0], params[1:]
    z = X @ w + b
    sw = np.ones(len(y)) if weights is None else weights
    # log(1 + e^z) - y z, computed without overflow
    loss = np.mean(sw * (np.logaddexp(0.0, z) - y * z)) + 0.5 * l2 * (w @ w)
    r = sw * (expit(z) - y) / len(y)
    grad = np.concatenate(([r.sum()], X.T @ r + l2 * w))
    return float(loss), grad


def fit_logistic(X, y, max_iters: int = 500, tol: float = 1e-5, class_weight=None) -> TrainedModel:
    """Logistic regression by gradient descent with Armijo backtracking.

    Stops when the gradient max-norm falls below ``tol``. Running out of
    iterations emits :class:`NonConvergenceWarning` and still returns the
    last iterate.
    """
    X, y = _check_xy(X, y)
    if len(np.unique(y)) < 2:
        raise SingleClass("logistic fit needs both classes in y")
    sw = sample_weights(y, class_weight)
    params = np.zeros(X.shape[1] + 1)
    loss, grad = logistic_loss_grad(params, X, y, weights=sw)
    history = [loss]
    step = 1.0
    it = 0
    gnorm = float(np.max(np.abs(grad)))
    while gnorm >= tol and it < max_iters:
        g2 = grad @ grad
        step *= 2.0
        while True:
            trial = params - step * grad
            trial_loss, trial_grad = logistic_loss_grad(trial, X, y, weights=sw)
            if trial_loss <= loss - 0.5 * step * g2:
                break
            step *= 0.5
            if step < 1e-16:
                break
        if trial_loss > loss:
            break  # no descent possible at machine precision
        params, loss, grad = trial, trial_loss, trial_grad
        history.append(loss)
        gnorm = float(np.max(np.abs(grad)))
        it += 1
    converged = gnorm < tol
    if not converged:
        warnings.warn(
            f"logistic fit stopped after {it} iterations with gradient max-norm {gnorm:.3g} >= tol {tol:g}",
            NonConvergenceWarning,
            stacklevel=2,
        )
    return TrainedModel(
        kind=LOGISTIC,
        weights=params[1:],
        intercept=float(params[0]),
        diagnostics={
            "final_loss": loss,
            "iterations": it,
            "grad_norm": gnorm,
            "converged": converged,
            "loss_history": np.array(history),
        },
    )


def fit(kind: str, X, y, class_weight=None, **kwargs) -> TrainedModel:
    if kind == OLS:
        return fit_ols(X, y, class_weight=class_weight)
    if kind == LOGISTIC:
        return fit_logistic(X, y, class_weight=class_weight, **kwargs)
    raise ValueError(f"unknown model kind {kind!r}")


def predict_proba(model: TrainedModel, X) -> np.ndarray:
    X = _values(X)
    if X.ndim != 2 or X.shape[1] != model.weights.shape[0]:
        raise DimensionMismatch(f"X has {X.shape[-1]} columns, model expects {model.weights.shape[0]}")
    z = X @ model.weights + model.intercept
    if model.kind == LOGISTIC:
        return expit(z)
    return np.clip(z, 0.0, 1.0)


def predict_label(scores, threshold: float = 0.5) -> np.ndarray:
    """1 where ``score >= threshold``."""
    return (np.asarray(scores) >= threshold).astype(np.int8)
