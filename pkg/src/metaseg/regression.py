"""Meta-model fitting: standardization, l1-penalized logistic regression via
cyclic coordinate descent, the regularization path with unpenalized refits,
and ordinary linear regression.

The logistic objective is the mean log-loss plus lambda * ||w||_1 with an
unpenalized intercept. Note the 1/n normalization: lambda values here are a
factor n smaller than they would be for a summed loss.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ._kernels import logistic_cd
from .errors import (
    DimensionMismatch,
    EmptyDataset,
    NonConvergence,
    SeparableDivergence,
    SingularSystem,
)

__all__ = [
    "Standardizer",
    "MetaModel",
    "LassoPath",
    "lambda_max",
    "default_grid",
    "fit_lasso_logistic",
    "lasso_path",
    "refit_unpenalized",
    "fit_linear",
    "logistic_objective",
    "kkt_violation",
    "save_model",
    "load_model",
]

_STD_FLOOR = 1e-12
_DIVERGENCE_CAP = 1e4


@dataclass
class Standardizer:
    """Column means and sample (n-1) stds of the training matrix.
    Zero-variance columns transform to all zeros."""

    means: np.ndarray
    stds: np.ndarray

    @classmethod
    def fit(cls, X):
        X = np.asarray(X, dtype=np.float64)
        if X.shape[0] < 2:
            raise EmptyDataset("need at least 2 rows to standardize")
        return cls(means=X.mean(axis=0), stds=X.std(axis=0, ddof=1))

    def transform(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.shape[1] != len(self.means):
            raise DimensionMismatch(f"expected {len(self.means)} columns, got {X.shape[1]}")
        safe = np.where(self.stds > _STD_FLOOR, self.stds, 1.0)
        out = (X - self.means) / safe
        out[:, self.stds <= _STD_FLOOR] = 0.0
        return out


@dataclass
class MetaModel:
    """A fitted meta-model. `weights` always spans all feature columns (zeros
    outside the active set); `predict` takes raw, unstandardized features."""

    kind: str  # "logistic_l1" | "logistic" | "linear"
    weights: np.ndarray
    intercept: float
    lam: float
    standardizer: Standardizer
    active_set: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    def scores(self, X):
        Xs = self.standardizer.transform(X)
        z = self.intercept + Xs @ self.weights
        if self.kind == "linear":
            return z
        return 1.0 / (1.0 + np.exp(-z))


class LassoPath:
    """Warm-started fits over a decreasing lambda grid, with per-lambda
    train/validation accuracy and AUROC."""

    def __init__(self, lambdas, models, metrics):
        self.lambdas = lambdas
        self.models = models
        self.metrics = metrics  # dict: (split, name) -> array over lambdas
        self.best_index = None

    def select_best(self, by=("validation", "acc")):
        vals = self.metrics[by]
        self.best_index = int(np.argmax(vals))  # ties -> largest lambda
        return self.best_index


def _clamped_logit(p):
    p = min(max(p, 1e-12), 1.0 - 1e-12)
    return float(np.log(p / (1.0 - p)))


def lambda_max(Xs, y):
    """Smallest penalty at which all non-intercept weights stay zero."""
    n = len(y)
    return float(np.abs(Xs.T @ (y - y.mean())).max() / n)


def default_grid(lam_max, n_points=50, min_ratio=1e-4):
    """Log-spaced descending grid from lam_max, with an exact 0 appended."""
    grid = np.geomspace(lam_max, lam_max * min_ratio, n_points)
    return np.concatenate([grid, [0.0]])


def logistic_objective(Xs, y, w, b, lam):
    z = b + Xs @ w
    loss = np.mean(np.maximum(z, 0.0) - y * z + np.log1p(np.exp(-np.abs(z))))
    return float(loss + lam * np.abs(w).sum())


def kkt_violation(Xs, y, w, b, lam):
    """Max violation of the subgradient optimality conditions of the
    penalized mean log-loss at (w, b)."""
    n = len(y)
    tau = 1.0 / (1.0 + np.exp(-(b + Xs @ w)))
    g = Xs.T @ (tau - y) / n
    active = w != 0
    viol = np.where(active, np.abs(g + lam * np.sign(w)), np.maximum(np.abs(g) - lam, 0.0))
    return float(max(viol.max() if len(viol) else 0.0, abs(float(np.mean(tau - y)))))


def fit_lasso_logistic(Xs, y, lam, standardizer=None, w0=None, b0=None):
    """Fit the l1-penalized logistic model on standardized inputs.

    At lam >= lambda_max the exact null solution (all-zero weights,
    intercept logit of the base rate) is returned directly.
    """
    Xs = np.asarray(Xs, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, p = Xs.shape
    if standardizer is None:
        standardizer = Standardizer(means=np.zeros(p), stds=np.ones(p))
    if lam > 0 and lam >= lambda_max(Xs, y):
        w = np.zeros(p)
        return MetaModel("logistic_l1", w, _clamped_logit(y.mean()), float(lam), standardizer)
    if w0 is None:
        w0 = np.zeros(p)
        b0 = _clamped_logit(y.mean())
    w, b, _, converged = logistic_cd(Xs, y, w0, b0, lam)
    if not converged:
        raise NonConvergence(f"coordinate descent hit the sweep cap at lambda={lam}")
    # the objective-change stopping rule can fire before the subgradient
    # conditions are tight; polish with the update-size rule alone
    for _ in range(4):
        if kkt_violation(Xs, y, w, b, lam) <= 5e-7:
            break
        w, b, _, converged = logistic_cd(Xs, y, w, b, lam, tol_obj=0.0)
        if not converged:
            break
    if lam == 0.0 and np.abs(w).max(initial=0.0) > _DIVERGENCE_CAP:
        raise SeparableDivergence("unpenalized fit diverged; data may be separable")
    kind = "logistic_l1" if lam > 0 else "logistic"
    return MetaModel(kind, w, b, float(lam), standardizer, np.flatnonzero(w))


def lasso_path(Xs, y, grid, Xs_val=None, y_val=None, standardizer=None):
    """Warm-started LASSO fits along a decreasing grid starting at lambda_max;
    records train (and validation, if given) accuracy and AUROC per lambda."""
    from .evaluation import accuracy, auroc  # local import: evaluation uses this module

    grid = np.asarray(grid, dtype=np.float64)
    if len(grid) > 1 and not np.all(np.diff(grid) < 0):
        raise ValueError("lambda grid must be strictly decreasing")
    models = []
    w, b = None, None
    for lam in grid:
        model = fit_lasso_logistic(Xs, y, float(lam), standardizer=standardizer, w0=w, b0=b)
        w, b = model.weights.copy(), model.intercept
        models.append(model)
    metrics = {}
    splits = [("train", Xs, y)]
    if Xs_val is not None:
        splits.append(("validation", Xs_val, y_val))
    for name, Xm, ym in splits:
        accs, aucs = [], []
        for model in models:
            z = model.intercept + Xm @ model.weights
            scores = 1.0 / (1.0 + np.exp(-z))
            accs.append(accuracy(scores, ym))
            aucs.append(auroc(scores, ym))
        metrics[(name, "acc")] = np.array(accs)
        metrics[(name, "auroc")] = np.array(aucs)
    return LassoPath(grid, models, metrics)


def refit_unpenalized(Xs, y, active_set, standardizer=None):
    """Plain logistic regression restricted to the active columns; an empty
    active set yields the intercept-only model."""
    Xs = np.asarray(Xs, dtype=np.float64)
    p = Xs.shape[1]
    if standardizer is None:
        standardizer = Standardizer(means=np.zeros(p), stds=np.ones(p))
    active_set = np.asarray(active_set, dtype=np.int64)
    w_full = np.zeros(p)
    if len(active_set) == 0:
        return MetaModel("logistic", w_full, _clamped_logit(np.mean(y)), 0.0, standardizer, active_set)
    sub = fit_lasso_logistic(Xs[:, active_set], y, 0.0)
    w_full[active_set] = sub.weights
    return MetaModel("logistic", w_full, sub.intercept, 0.0, standardizer, active_set)


def fit_linear(Xs, y, standardizer=None):
    """Least squares via normal equations with a 1e-10 ridge jitter."""
    Xs = np.asarray(Xs, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, p = Xs.shape
    if standardizer is None:
        standardizer = Standardizer(means=np.zeros(p), stds=np.ones(p))
    A = np.hstack([np.ones((n, 1)), Xs])
    gram = A.T @ A + 1e-10 * np.eye(p + 1)
    try:
        coef = np.linalg.solve(gram, A.T @ y)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(str(exc)) from exc
    if not np.isfinite(coef).all():
        raise SingularSystem("normal equations produced non-finite coefficients")
    return MetaModel("linear", coef[1:], float(coef[0]), 0.0, standardizer, np.flatnonzero(coef[1:]))


def save_model(model, path):
    payload = {
        "kind": model.kind,
        "lambda": model.lam,
        "intercept": model.intercept,
        "weights": model.weights.tolist(),
        "active_set": model.active_set.tolist(),
        "means": model.standardizer.means.tolist(),
        "stds": model.standardizer.stds.tolist(),
    }
    with open(path, "w") as f:
        json.dump(payload, f, indent=1)
        f.write("\n")


def load_model(path):
    with open(path) as f:
        d = json.load(f)
    return MetaModel(
        kind=d["kind"],
        weights=np.array(d["weights"]),
        intercept=d["intercept"],
        lam=d["lambda"],
        standardizer=Standardizer(np.array(d["means"]), np.array(d["stds"])),
        active_set=np.array(d["active_set"], dtype=np.int64),
    )
