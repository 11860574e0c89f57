"""Evaluation protocol: stratified hold-out split, k-fold grid search, reports."""

from __future__ import annotations

import itertools
from dataclasses import asdict, dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .errors import TooFewSamples
from .gbdt import GbdtModel, Hyperparams, fit, predict

DEFAULT_GRID = {
    "n_trees": [25, 50, 100],
    "max_depth": [2, 3],
    "learning_rate": [0.1, 0.3],
    "min_samples_leaf": [1, 2],
}


def stratified_split(y, train_frac: float = 0.7, seed=None) -> tuple[np.ndarray, np.ndarray]:
    """Index arrays ``(train, test)`` keeping each class's share.

    Each class contributes ``round(train_frac * n_class)`` rows to training.
    """
    if not 0 < train_frac < 1:
        raise ValueError("train_frac must lie strictly between 0 and 1")
    y = np.asarray(y)
    rng = np.random.default_rng(seed)
    train, test = [], []
    for cls in np.unique(y):
        idx = rng.permutation(np.flatnonzero(y == cls))
        k = int(round(train_frac * len(idx)))
        train.append(idx[:k])
        test.append(idx[k:])
    train, test = np.sort(np.concatenate(train)), np.sort(np.concatenate(test))
    if len(train) == 0 or len(test) == 0:
        raise TooFewSamples(f"split {train_frac} leaves an empty side for {len(y)} samples")
    return train, test


def stratified_folds(y, k: int = 5, seed=None) -> list[np.ndarray]:
    """Partition row indices into ``k`` folds, dealing each class round-robin."""
    y = np.asarray(y)
    if k < 2:
        raise ValueError("k must be at least 2")
    classes, counts = np.unique(y, return_counts=True)
    if len(y) < k or counts.min() < k:
        raise TooFewSamples(f"each class needs at least {k} samples for {k}-fold CV, got {dict(zip(classes.tolist(), counts.tolist()))}")
    rng = np.random.default_rng(seed)
    folds: list[list[int]] = [[] for _ in range(k)]
    offset = 0
    for cls in classes:
        idx = rng.permutation(np.flatnonzero(y == cls))
        for j, i in enumerate(idx):
            folds[(offset + j) % k].append(int(i))
        offset += len(idx)
    return [np.sort(np.array(f, dtype=int)) for f in folds]


def expand_grid(grid: Mapping[str, Sequence]) -> list[Hyperparams]:
    keys = list(grid)
    return [Hyperparams(**dict(zip(keys, combo))) for combo in itertools.product(*(grid[k] for k in keys))]


@dataclass
class CvResult:
    best: Hyperparams
    candidates: list[Hyperparams]
    fold_scores: list[list[float]]  # one row per candidate

    @property
    def mean_scores(self) -> np.ndarray:
        return np.array([np.mean(s) for s in self.fold_scores])

    @property
    def best_scores(self) -> list[float]:
        return self.fold_scores[self.candidates.index(self.best)]


def cross_validate(X, y, grid=None, k: int = 5, seed=None) -> CvResult:
    """Grid search by mean fold accuracy.

    Ties go to fewer trees, then shallower trees, then grid order.

    :param grid: mapping of hyperparameter lists, or a list of ``Hyperparams``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    grid = DEFAULT_GRID if grid is None else grid
    candidates = expand_grid(grid) if isinstance(grid, Mapping) else list(grid)
    if not candidates:
        raise ValueError("empty hyperparameter grid")
    folds = stratified_folds(y, k, seed)
    scores = []
    for params in candidates:
        row = []
        for j, test_idx in enumerate(folds):
            train_idx = np.sort(np.concatenate([f for i, f in enumerate(folds) if i != j]))
            model = fit(X[train_idx], y[train_idx], params, seed)
            row.append(float(np.mean(predict(model, X[test_idx]) == y[test_idx])))
        scores.append(row)
    means = [np.mean(r) for r in scores]
    order = sorted(range(len(candidates)),
                   key=lambda i: (-means[i], candidates[i].n_trees, candidates[i].max_depth, i))
    return CvResult(candidates[order[0]], candidates, scores)


@dataclass
class EvalReport:
    """Confusion matrix as fractions of the test set (true → predicted)."""

    honest_honest: float
    honest_cartel: float
    cartel_honest: float
    cartel_cartel: float
    n: int = 0

    @property
    def accuracy(self) -> float:
        return self.honest_honest + self.cartel_cartel

    @classmethod
    def from_predictions(cls, y_true, y_pred) -> "EvalReport":
        y_true, y_pred = np.asarray(y_true), np.asarray(y_pred)
        n = len(y_true)
        if n == 0:
            raise ValueError("empty test set")
        cell = lambda t, p: float(np.sum((y_true == t) & (y_pred == p))) / n
        return cls(cell(0, 0), cell(0, 1), cell(1, 0), cell(1, 1), n)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["accuracy"] = self.accuracy
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "EvalReport":
        return cls(d["honest_honest"], d["honest_cartel"], d["cartel_honest"], d["cartel_cartel"], int(d.get("n", 0)))

    def table(self) -> str:
        """2x2 percentage layout: rows are true classes, columns predictions."""
        pct = lambda v: f"{round(100 * v):d}%"
        rows = [
            ("True \\ Predicted", "Honest", "Cartel"),
            ("Honest", pct(self.honest_honest), pct(self.honest_cartel)),
            ("Cartel", pct(self.cartel_honest), pct(self.cartel_cartel)),
        ]
        lines = [f"{a:<18}{b:>8}{c:>8}" for a, b, c in rows]
        lines.append(f"Accuracy: {pct(self.accuracy)}")
        return "\n".join(lines) + "\n"


def evaluate(model: GbdtModel, X, y, threshold: float = 0.5) -> EvalReport:
    X, y = np.asarray(X, dtype=float), np.asarray(y)
    if len(y) == 0:
        raise ValueError("empty test set")
    return EvalReport.from_predictions(y, predict(model, X, threshold))


@dataclass
class PipelineResult:
    model: GbdtModel
    report: EvalReport
    cv: CvResult
    train_idx: np.ndarray
    test_idx: np.ndarray


def train_and_evaluate(X, y, train_frac: float = 0.7, k: int = 5, grid=None, seed=None) -> PipelineResult:
    """Hold out a stratified test set, tune on the rest, refit, and score."""
    X, y = np.asarray(X, dtype=float), np.asarray(y)
    if (y < 0).any():
        raise ValueError("every row needs a label")
    train_idx, test_idx = stratified_split(y, train_frac, seed)
    cv = cross_validate(X[train_idx], y[train_idx], grid, k, seed)
    model = fit(X[train_idx], y[train_idx], cv.best, seed)
    report = evaluate(model, X[test_idx], y[test_idx])
    return PipelineResult(model, report, cv, train_idx, test_idx)
