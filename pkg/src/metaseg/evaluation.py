"""Scalar quality metrics and the repeated-split experiment driver.

`run_experiment` follows the protocol used throughout: repeated random
train/validation splits, standardization on the training half, a LASSO path
whose penalty is selected by best validation accuracy, an unpenalized refit
on the selected active set, an entropy-only baseline and linear regression
of the target score. Reported uncertainties are standard deviations of the
run means (per-run stddev / sqrt(n_runs)).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyInput, SingleClass, ZeroVariance
from .io import SegmentRecord
from .regression import (
    Standardizer,
    default_grid,
    fit_lasso_logistic,
    fit_linear,
    lambda_max,
    lasso_path,
    refit_unpenalized,
)
from .segmetrics import FEATURE_E_MEAN, build_dataset

__all__ = [
    "accuracy",
    "naive_baseline",
    "auroc",
    "r_squared",
    "residual_sigma",
    "pearson",
    "dice",
    "SplitPlan",
    "ExperimentReport",
    "run_experiment",
    "correlation_table",
]


def accuracy(scores, labels, threshold=0.5):
    """Fraction of correct decisions under score >= threshold -> class 1."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if len(scores) == 0:
        raise EmptyInput("no scores")
    return float(np.mean((scores >= threshold) == (labels > 0)))


def naive_baseline(labels):
    """Majority-class guessing accuracy max(I_0, I_1) / (I_0 + I_1); the
    matching AUROC is 0.5 by definition."""
    labels = np.asarray(labels)
    if len(labels) == 0:
        raise EmptyInput("no labels")
    i1 = int(np.count_nonzero(labels > 0))
    i0 = len(labels) - i1
    return max(i0, i1) / (i0 + i1)


def auroc(scores, labels):
    """Rank-based (Mann-Whitney) AUROC; tied scores count one half."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels) > 0
    n1 = int(labels.sum())
    n0 = len(labels) - n1
    if n0 == 0 or n1 == 0:
        raise SingleClass("need both classes for AUROC")
    order = np.argsort(scores, kind="stable")
    ranks = np.empty(len(scores), dtype=np.float64)
    sorted_scores = scores[order]
    i = 0
    while i < len(scores):
        j = i
        while j + 1 < len(scores) and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return float((ranks[labels].sum() - n1 * (n1 + 1) / 2.0) / (n0 * n1))


def r_squared(pred, truth):
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    ss_tot = float(np.sum((truth - truth.mean()) ** 2))
    if ss_tot == 0.0:
        raise ZeroVariance("constant truth vector")
    ss_res = float(np.sum((pred - truth) ** 2))
    return 1.0 - ss_res / ss_tot


def residual_sigma(pred, truth):
    """Population standard deviation of the residuals pred - truth."""
    res = np.asarray(pred, dtype=np.float64) - np.asarray(truth, dtype=np.float64)
    return float(np.std(res))


def pearson(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    da, db = a - a.mean(), b - b.mean()
    na, nb = float(np.sqrt((da**2).sum())), float(np.sqrt((db**2).sum()))
    if na == 0.0 or nb == 0.0:
        raise ZeroVariance("constant input vector")
    return float((da @ db) / (na * nb))


def dice(pred_mask, gt_mask):
    """2TP / (2TP + FP + FN); defined as 1 when both masks are empty."""
    pred_mask = np.asarray(pred_mask, dtype=bool)
    gt_mask = np.asarray(gt_mask, dtype=bool)
    tp = int(np.count_nonzero(pred_mask & gt_mask))
    fp = int(np.count_nonzero(pred_mask & ~gt_mask))
    fn = int(np.count_nonzero(~pred_mask & gt_mask))
    if tp + fp + fn == 0:
        return 1.0
    return 2.0 * tp / (2.0 * tp + fp + fn)


@dataclass
class SplitPlan:
    seed: int
    n_runs: int = 10
    fraction: float = 0.5


CLS_CONFIGS = ("penalized", "unpenalized", "entropy_only", "naive")
REG_CONFIGS = ("linear_all", "linear_entropy")


class ExperimentReport:
    """Per-run and aggregated metrics for every model configuration."""

    def __init__(self, target, plan, n_records, i0, i1):
        self.target = target
        self.plan = plan
        self.n_records = n_records
        self.i0 = i0
        self.i1 = i1
        self.runs = {}  # (config, metric, split) -> list of per-run values
        self.selected_lambdas = []
        self.detected = []
        self.undetected = []

    def add(self, config, metric, split, value):
        self.runs.setdefault((config, metric, split), []).append(float(value))

    def mean(self, config, metric, split):
        return float(np.mean(self.runs[(config, metric, split)]))

    def std_of_mean(self, config, metric, split):
        vals = np.asarray(self.runs[(config, metric, split)])
        if len(vals) < 2:
            return 0.0
        return float(np.std(vals, ddof=1) / np.sqrt(len(vals)))

    def csv_lines(self):
        lines = ["config,metric,split,run,value"]
        for (config, metric, split), vals in sorted(self.runs.items()):
            for r, v in enumerate(vals):
                lines.append(f"{config},{metric},{split},{r},{v:.9g}")
            lines.append(f"{config},{metric},{split},mean,{np.mean(vals):.9g}")
            sm = self.std_of_mean(config, metric, split)
            lines.append(f"{config},{metric},{split},std_of_mean,{sm:.9g}")
        return lines

    def text_table(self):
        def cell(config, metric, split, pct=True):
            m = self.mean(config, metric, split)
            s = self.std_of_mean(config, metric, split)
            if pct:
                return f"{100 * m:6.2f}%(+-{100 * s:.2f}%)"
            return f"{m:.3f}(+-{s:.3f})"

        rows = [
            f"segments: {self.n_records}  I_0={self.i0}  I_1={self.i1}  "
            f"naive ACC={self.i_naive():.4f}",
            f"regression target: {self.target}",
            "",
            f"{'':24s}{'training':>22s}{'validation':>22s}",
            "Classification IoU_adj = 0 vs > 0",
        ]
        for config, label in (
            ("penalized", "ACC, penalized"),
            ("unpenalized", "ACC, unpenalized"),
            ("entropy_only", "ACC, entropy only"),
            ("naive", "ACC, naive baseline"),
        ):
            rows.append(
                f"{label:24s}{cell(config, 'acc', 'train'):>22s}{cell(config, 'acc', 'validation'):>22s}"
            )
        for config, label in (
            ("penalized", "AUROC, penalized"),
            ("unpenalized", "AUROC, unpenalized"),
            ("entropy_only", "AUROC, entropy only"),
            ("naive", "AUROC, naive baseline"),
        ):
            rows.append(
                f"{label:24s}{cell(config, 'auroc', 'train'):>22s}{cell(config, 'auroc', 'validation'):>22s}"
            )
        rows.append(f"Regression {self.target}")
        for config, label in (
            ("linear_all", "sigma, all metrics"),
            ("linear_entropy", "sigma, entropy only"),
        ):
            rows.append(
                f"{label:24s}{cell(config, 'sigma', 'train', pct=False):>22s}"
                f"{cell(config, 'sigma', 'validation', pct=False):>22s}"
            )
        for config, label in (
            ("linear_all", "R2, all metrics"),
            ("linear_entropy", "R2, entropy only"),
        ):
            rows.append(
                f"{label:24s}{cell(config, 'r2', 'train'):>22s}{cell(config, 'r2', 'validation'):>22s}"
            )
        rows.append("")
        rows.append(
            f"false positives detected on validation (threshold 0.5): "
            f"mean {np.mean(self.detected):.1f} detected / {np.mean(self.undetected):.1f} undetected"
        )
        return "\n".join(rows)

    def i_naive(self):
        return max(self.i0, self.i1) / max(self.i0 + self.i1, 1)


def _split_indices(rng, n, fraction):
    perm = rng.permutation(n)
    n_train = int(round(n * fraction))
    return perm[:n_train], perm[n_train:]


def run_experiment(records, plan, target="iou_adj", grid_points=50, min_ratio=1e-4, threshold=0.5):
    """Repeated-split fitting and evaluation over a list of SegmentRecords."""
    X, y_cls, y_reg = build_dataset(records, target=target)
    n = len(y_cls)
    i1 = int(y_cls.sum())
    i0 = n - i1
    if i0 < 2 or i1 < 2:
        raise SingleClass("need at least 2 segments of each meta-class")
    report = ExperimentReport(target, plan, n, i0, i1)
    children = np.random.SeedSequence(plan.seed).spawn(plan.n_runs)
    for run in range(plan.n_runs):
        rng = np.random.default_rng(children[run])
        tr, va = _split_indices(rng, n, plan.fraction)
        std = Standardizer.fit(X[tr])
        Xtr, Xva = std.transform(X[tr]), std.transform(X[va])
        ytr, yva = y_cls[tr], y_cls[va]

        grid = default_grid(lambda_max(Xtr, ytr), grid_points, min_ratio)
        path = lasso_path(Xtr, ytr, grid, Xva, yva)
        best = path.select_best()
        report.selected_lambdas.append(float(grid[best]))
        sel = path.models[best]
        for split, idx in (("train", best), ("validation", best)):
            report.add("penalized", "acc", split, path.metrics[(split, "acc")][idx])
            report.add("penalized", "auroc", split, path.metrics[(split, "auroc")][idx])

        refit = refit_unpenalized(Xtr, ytr, sel.active_set, standardizer=std)
        ent_model = fit_lasso_logistic(Xtr[:, [FEATURE_E_MEAN]], ytr, 0.0)
        for split, Xm, ym in (("train", Xtr, ytr), ("validation", Xva, yva)):
            z = refit.intercept + Xm @ refit.weights
            s = 1.0 / (1.0 + np.exp(-z))
            report.add("unpenalized", "acc", split, accuracy(s, ym, threshold))
            report.add("unpenalized", "auroc", split, auroc(s, ym))
            ze = ent_model.intercept + Xm[:, [FEATURE_E_MEAN]] @ ent_model.weights
            se = 1.0 / (1.0 + np.exp(-ze))
            report.add("entropy_only", "acc", split, accuracy(se, ym, threshold))
            report.add("entropy_only", "auroc", split, auroc(se, ym))
            report.add("naive", "acc", split, naive_baseline(ym))
            report.add("naive", "auroc", split, 0.5)

        # detected/undetected false positives on validation with the selected model
        zv = sel.intercept + Xva @ sel.weights
        sv = 1.0 / (1.0 + np.exp(-zv))
        fp = yva == 0
        det = int(np.count_nonzero(fp & (sv < threshold)))
        report.detected.append(det)
        report.undetected.append(int(np.count_nonzero(fp)) - det)

        lin_all = fit_linear(Xtr, y_reg[tr])
        lin_ent = fit_linear(Xtr[:, [FEATURE_E_MEAN]], y_reg[tr])
        for split, Xm, ym in (("train", Xtr, y_reg[tr]), ("validation", Xva, y_reg[va])):
            pa = lin_all.intercept + Xm @ lin_all.weights
            pe = lin_ent.intercept + Xm[:, [FEATURE_E_MEAN]] @ lin_ent.weights
            report.add("linear_all", "r2", split, r_squared(pa, ym))
            report.add("linear_all", "sigma", split, residual_sigma(pa, ym))
            report.add("linear_entropy", "r2", split, r_squared(pe, ym))
            report.add("linear_entropy", "sigma", split, residual_sigma(pe, ym))
    return report


def correlation_table(records):
    """Pearson correlation of each of the 15 metrics with IoU_adj."""
    X, _, _ = build_dataset(records)
    target = np.array([r.iou_adj for r in records])
    rows = []
    for j, name in enumerate(SegmentRecord.METRIC_COLUMNS):
        try:
            rho = pearson(X[:, j], target)
        except ZeroVariance:
            rho = float("nan")
        rows.append((name, rho))
    return rows
