"""Performance criteria for binary treatment prediction.

Three criteria are reported for every method: mean negative Bernoulli
log-likelihood, area under the ROC curve, and wall-clock fit time.
"""

from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import dataclass, asdict
from typing import Callable, Sequence

import numpy as np

PROB_EPS = 1e-15

REPORT_COLUMNS = ("method", "nll_train", "nll_test", "auc_train", "auc_test", "seconds")


def clip_probs(p: np.ndarray) -> np.ndarray:
    """Clip probabilities into [PROB_EPS, 1 - PROB_EPS] so logs stay finite."""
    return np.clip(np.asarray(p, dtype=float), PROB_EPS, 1.0 - PROB_EPS)


def nll(p: Sequence[float], y: Sequence[float]) -> float:
    """Mean negative Bernoulli log-likelihood of predicted probabilities.

    Probabilities are clipped to [1e-15, 1 - 1e-15] before taking logs, so a
    "perfect" predictor scores ~0 rather than -0.0/inf.
    """
    p = np.asarray(p, dtype=float)
    y = np.asarray(y, dtype=float)
    if p.shape != y.shape:
        raise ValueError(f"length mismatch: p has shape {p.shape}, y has shape {y.shape}")
    if p.size == 0:
        raise ValueError("empty vectors")
    p = clip_probs(p)
    return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log1p(-p)))


def _check_binary_both_classes(y: np.ndarray) -> None:
    if not np.isin(y, (0, 1)).all():
        raise ValueError("y must be binary 0/1")
    if y.min() == y.max():
        raise ValueError("both classes must be present")


def auc(scores: Sequence[float], y: Sequence[float]) -> float:
    """Rank-based AUC (Mann-Whitney) with half credit for tied scores.

    Equivalent to counting, over all (positive, negative) pairs, the fraction
    where the positive outranks the negative, ties contributing 0.5. Computed
    from average ranks in O(n log n).
    """
    scores = np.asarray(scores, dtype=float)
    y = np.asarray(y)
    if scores.shape != y.shape:
        raise ValueError("length mismatch between scores and labels")
    _check_binary_both_classes(y)

    order = np.argsort(scores, kind="mergesort")
    s = scores[order]
    # average ranks (1-based) within tie groups
    ranks = np.empty(s.size, dtype=float)
    i = 0
    while i < s.size:
        j = i
        while j + 1 < s.size and s[j + 1] == s[i]:
            j += 1
        ranks[i : j + 1] = 0.5 * (i + j) + 1.0
        i = j + 1
    rank_by_row = np.empty(s.size, dtype=float)
    rank_by_row[order] = ranks

    pos = y == 1
    n_pos = int(pos.sum())
    n_neg = y.size - n_pos
    u = rank_by_row[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def roc_points(scores: Sequence[float], y: Sequence[float]) -> list[tuple[float, float]]:
    """ROC curve as (fpr, tpr) points, one per distinct threshold.

    Points run from (0, 0) to (1, 1) and are nondecreasing in both
    coordinates; the trapezoidal area under them equals ``auc`` exactly
    (tied scores collapse into a single diagonal segment, which is where the
    half-credit convention comes from).
    """
    scores = np.asarray(scores, dtype=float)
    y = np.asarray(y)
    if scores.shape != y.shape:
        raise ValueError("length mismatch between scores and labels")
    _check_binary_both_classes(y)

    order = np.argsort(-scores, kind="mergesort")
    s = scores[order]
    labels = np.asarray(y, dtype=float)[order]

    n_pos = labels.sum()
    n_neg = labels.size - n_pos
    points = [(0.0, 0.0)]
    tp = fp = 0.0
    i = 0
    while i < s.size:
        j = i
        while j + 1 < s.size and s[j + 1] == s[i]:
            j += 1
        block = labels[i : j + 1]
        tp += block.sum()
        fp += block.size - block.sum()
        points.append((fp / n_neg, tp / n_pos))
        i = j + 1
    return points


def trapezoid_area(points: Sequence[tuple[float, float]]) -> float:
    pts = np.asarray(points, dtype=float)
    x, t = pts[:, 0], pts[:, 1]
    return float(np.sum(0.5 * (t[1:] + t[:-1]) * np.diff(x)))


def timed_fit(thunk: Callable[[], object]) -> tuple[object, float]:
    """Run ``thunk`` and return (result, elapsed wall-clock seconds).

    Uses a monotonic clock. If the thunk raises, the elapsed time is attached
    to the exception as ``elapsed_seconds`` before it propagates.
    """
    start = time.perf_counter()
    try:
        result = thunk()
    except Exception as exc:
        exc.elapsed_seconds = time.perf_counter() - start
        raise
    return result, time.perf_counter() - start


@dataclass
class EvalReport:
    """One benchmark row: a method's train/test NLL and AUC plus fit seconds."""

    method: str
    nll_train: float
    nll_test: float
    auc_train: float
    auc_test: float
    seconds: float

    def validate(self) -> "EvalReport":
        for name in ("nll_train", "nll_test", "auc_train", "auc_test", "seconds"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"non-finite field {name} in report for {self.method}")
        for name in ("auc_train", "auc_test"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} outside [0, 1] for {self.method}")
        return self


def reports_to_csv(reports: Sequence[EvalReport]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(REPORT_COLUMNS)
    for r in reports:
        row = asdict(r)
        writer.writerow([row[c] if c == "method" else repr(float(row[c])) for c in REPORT_COLUMNS])
    return buf.getvalue()


def reports_to_json(reports: Sequence[EvalReport]) -> str:
    return json.dumps([asdict(r) for r in reports], indent=2) + "\n"


def reports_from_csv(text: str) -> list[EvalReport]:
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != REPORT_COLUMNS:
        raise ValueError(f"unexpected report columns: {reader.fieldnames}")
    out = []
    for row in reader:
        out.append(
            EvalReport(
                method=row["method"],
                nll_train=float(row["nll_train"]),
                nll_test=float(row["nll_test"]),
                auc_train=float(row["auc_train"]),
                auc_test=float(row["auc_test"]),
                seconds=float(row["seconds"]),
            )
        )
    return out
