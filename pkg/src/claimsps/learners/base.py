"""Uniform train/predict contract shared by all base algorithms.

Every algorithm exposes a (possibly singleton) hyperparameter grid and is
fit through ``Learner.fit``, which validates inputs, runs the algorithm and
increments a process-wide fit counter. Predictions always come back clipped
into [1e-15, 1 - 1e-15].
"""

from __future__ import annotations

import json
import threading
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ..metrics import clip_probs, nll


class FitError(Exception):
    """A learner could not be fit on the given data."""


def params_key(name: str, params: dict) -> tuple[str, str]:
    return name, json.dumps(params, sort_keys=True)


class FitCounter:
    """Thread-safe count of completed fits per (learner name, configuration).

    The sample-split ensemble is expected to fit each winning configuration
    exactly twice (once on the LGO training set during tuning, once on the
    full training set); tests assert that through this counter.
    """

    def __init__(self):
        self._lock = threading.Lock()
        self._counts: Counter = Counter()

    def increment(self, name: str, params: dict) -> None:
        with self._lock:
            self._counts[params_key(name, params)] += 1

    def count(self, name: str, params: dict) -> int:
        with self._lock:
            return self._counts[params_key(name, params)]

    def total(self, name: str | None = None) -> int:
        with self._lock:
            if name is None:
                return sum(self._counts.values())
            return sum(v for (n, _), v in self._counts.items() if n == name)

    def reset(self) -> None:
        with self._lock:
            self._counts.clear()


fit_counter = FitCounter()

# registry of learner kinds so a serialized model can find its predictor
_KINDS: dict[str, type] = {}


def register_kind(cls):
    _KINDS[cls.kind] = cls
    return cls


def predictor_for(kind: str) -> type:
    try:
        return _KINDS[kind]
    except KeyError:
        raise KeyError(f"unknown learner kind {kind!r}") from None


@dataclass
class FittedModel:
    """Frozen result of one fit: chosen hyperparameters plus the learned
    parameters (opaque per algorithm, JSON-serializable)."""

    learner: str
    kind: str
    params: dict
    payload: dict
    n_features: int

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValueError(
                f"{self.learner}: design has {X.shape[1] if X.ndim == 2 else '?'} columns, "
                f"model was trained on {self.n_features}"
            )
        p = predictor_for(self.kind)._predict(self.payload, X)
        return clip_probs(p)


class Learner:
    """Base class: subclasses implement ``_fit`` and ``_predict``.

    ``name`` may differ from ``kind`` when the same algorithm appears several
    times in a library (e.g. hdPS entries at different tuning parameters).
    """

    kind: str = ""
    default_grid: list[dict] = [{}]

    def __init__(self, name: str | None = None, grid: list[dict] | None = None):
        self.name = name or self.kind
        self.grid = [dict(g) for g in (grid if grid is not None else self.default_grid)]
        if not self.grid:
            raise ValueError(f"{self.name}: hyperparameter grid must be nonempty")

    def fit(self, X: np.ndarray, y: np.ndarray, params: dict | None = None, seed: int = 0) -> FittedModel:
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        if X.ndim != 2 or X.shape[0] != y.shape[0]:
            raise FitError(f"{self.name}: X is {X.shape}, y is {y.shape}")
        if X.shape[0] < 2:
            raise FitError(f"{self.name}: need at least 2 rows")
        if not np.isfinite(X).all() or not np.isfinite(y).all():
            raise FitError(f"{self.name}: non-finite entries in training data")
        if not np.isin(y, (0.0, 1.0)).all():
            raise FitError(f"{self.name}: y must be binary 0/1")
        if y.min() == y.max():
            raise FitError(f"{self.name}: single-class training labels")
        if params is None:
            params = self.grid[0]
        params = dict(params)
        rng = np.random.default_rng(seed)
        payload = self._fit(X, y, params, rng)
        fit_counter.increment(self.name, params)
        return FittedModel(
            learner=self.name, kind=self.kind, params=params, payload=payload,
            n_features=X.shape[1],
        )

    def _fit(self, X: np.ndarray, y: np.ndarray, params: dict, rng: np.random.Generator) -> dict:
        raise NotImplementedError

    @staticmethod
    def _predict(payload: dict, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError


@register_kind
class BaselineRateLearner(Learner):
    """Intercept-only anchor: predicts the training treatment rate."""

    kind = "baseline_rate"
    default_grid = [{}]

    def _fit(self, X, y, params, rng):
        return {"rate": float(y.mean())}

    @staticmethod
    def _predict(payload, X):
        return np.full(X.shape[0], payload["rate"])


@dataclass
class TuneResult:
    params: dict
    val_nll: float
    val_probs: np.ndarray
    grid_results: list[tuple[dict, float]]
    model: FittedModel
    lgo_model: FittedModel


def tune_lgo(learner: Learner, split, data, seed: int = 0) -> TuneResult:
    """Leave-group-out tuning: fit each grid point on the LGO training rows,
    score by NLL on the LGO validation rows, take the argmin (first grid point
    wins ties), then refit the winner on the full training rows.

    ``data`` is either a fixed ``(X, y)`` pair of all-N arrays or a callable
    ``rows -> (X, y)`` that rebuilds the design matrix with any row-dependent
    preprocessing (standardization, covariate selection) fit on ``rows``.
    Grid points whose fit raises ``FitError`` are skipped; if every point
    fails the error propagates.
    """
    if callable(data):
        design = data
    else:
        X_fixed, y_fixed = data
        design = lambda rows: (X_fixed, y_fixed)

    lgo_train = split.lgo_train_idx
    lgo_val = split.lgo_val_idx
    X_all, y_all = design(lgo_train)
    X_all = np.asarray(X_all, dtype=float)
    y_all = np.asarray(y_all, dtype=float)

    best = None  # (nll, index, params, probs, model)
    grid_results: list[tuple[dict, float]] = []
    last_error: FitError | None = None
    for i, params in enumerate(learner.grid):
        try:
            model = learner.fit(X_all[lgo_train], y_all[lgo_train], params, seed)
        except FitError as exc:
            grid_results.append((dict(params), float("inf")))
            last_error = exc
            continue
        probs = model.predict_proba(X_all[lgo_val])
        score = nll(probs, y_all[lgo_val])
        grid_results.append((dict(params), score))
        if best is None or score < best[0]:
            best = (score, i, dict(params), probs, model)
    if best is None:
        raise FitError(f"{learner.name}: every grid point failed to fit") from last_error

    X_full, y_full = design(split.train_idx)
    X_full = np.asarray(X_full, dtype=float)
    final = learner.fit(X_full[split.train_idx], np.asarray(y_full, dtype=float)[split.train_idx],
                        best[2], seed)
    return TuneResult(
        params=best[2],
        val_nll=best[0],
        val_probs=best[3],
        grid_results=grid_results,
        model=final,
        lgo_model=best[4],
    )
