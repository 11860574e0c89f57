"""Gradient-boosted regression trees for binary classification.

Trees are grown greedily with exact split search over the sorted feature
values and Newton leaf weights ``-G / (H + lambda)`` under logistic loss.
Rows with ``x[feature] <= threshold`` go left.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Optional, Union

import numba
import numpy as np

from .errors import DegenerateData, DimensionMismatch


def sigmoid(z):
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def logistic_loss(y, raw):
    """Mean negative log-likelihood for log-odds ``raw``."""
    y = np.asarray(y, dtype=float)
    raw = np.asarray(raw, dtype=float)
    # log(1 + e^raw) - y*raw, computed stably
    return float(np.mean(np.logaddexp(0.0, raw) - y * raw))


def logistic_loss_grad_hess(y, p):
    """Gradient and hessian of the log loss w.r.t. the log-odds."""
    p = np.asarray(p, dtype=float)
    if np.any((p <= 0) | (p >= 1)):
        raise ValueError("p must lie strictly inside (0, 1)")
    return p - y, p * (1.0 - p)


@dataclass(frozen=True)
class Hyperparams:
    n_trees: int = 50
    max_depth: int = 3
    learning_rate: float = 0.1
    min_samples_leaf: int = 1
    reg_lambda: float = 1.0
    subsample: float = 1.0

    def __post_init__(self):
        if self.n_trees < 0 or self.max_depth < 0 or self.min_samples_leaf < 1:
            raise ValueError(f"invalid hyperparameters {self}")
        if not self.learning_rate > 0 or self.reg_lambda < 0 or not 0 < self.subsample <= 1:
            raise ValueError(f"invalid hyperparameters {self}")


class Tree:
    """Flat array form of one regression tree.

    ``feature[k] == -1`` marks a leaf; ``left``/``right`` hold child ids.
    """

    def __init__(self, feature, threshold, left, right, value):
        self.feature = np.asarray(feature, dtype=np.int64)
        self.threshold = np.asarray(threshold, dtype=float)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.value = np.asarray(value, dtype=float)

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def depth(self) -> int:
        def walk(k):
            if self.feature[k] < 0:
                return 0
            return 1 + max(walk(self.left[k]), walk(self.right[k]))
        return walk(0)

    def used_features(self) -> set[int]:
        return {int(f) for f in self.feature if f >= 0}

    def leaf_index(self, X: np.ndarray) -> np.ndarray:
        """Node index of the leaf each row of ``X`` lands in."""
        node = np.zeros(len(X), dtype=np.int64)
        rows = np.arange(len(X))
        while True:
            f = self.feature[node]
            internal = f >= 0
            if not internal.any():
                return node
            go_left = X[rows, np.where(internal, f, 0)] <= self.threshold[node]
            nxt = np.where(go_left, self.left[node], self.right[node])
            node = np.where(internal, nxt, node)

    def apply(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.leaf_index(X)]

    def to_dict(self, k: int = 0) -> dict:
        if self.feature[k] < 0:
            return {"leaf": float(self.value[k])}
        return {
            "feature": int(self.feature[k]),
            "threshold": float(self.threshold[k]),
            "left": self.to_dict(int(self.left[k])),
            "right": self.to_dict(int(self.right[k])),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Tree":
        cols = ([], [], [], [], [])

        def add(node) -> int:
            k = len(cols[0])
            for c in cols:
                c.append(0)
            if "leaf" in node:
                cols[0][k], cols[4][k] = -1, float(node["leaf"])
                cols[1][k], cols[2][k], cols[3][k] = 0.0, -1, -1
            else:
                cols[0][k], cols[1][k] = int(node["feature"]), float(node["threshold"])
                cols[4][k] = 0.0
                cols[2][k] = add(node["left"])
                cols[3][k] = add(node["right"])
            return k

        add(doc)
        return cls(*cols)


@dataclass
class GbdtModel:
    base_score: float
    trees: list[Tree]
    learning_rate: float
    n_features: int
    params: Hyperparams = field(default_factory=Hyperparams)

    def used_features(self) -> set[int]:
        out: set[int] = set()
        for t in self.trees:
            out |= t.used_features()
        return out


class _Builder:
    def __init__(self, X, g, h, params: Hyperparams):
        self.X, self.g, self.h, self.p = X, g, h, params
        self.cols = ([], [], [], [], [])

    def _node(self) -> int:
        for c in self.cols:
            c.append(0)
        return len(self.cols[0]) - 1

    def _leaf(self, k, G, H):
        self.cols[0][k] = -1
        self.cols[1][k] = 0.0
        self.cols[2][k] = self.cols[3][k] = -1
        denom = H + self.p.reg_lambda
        # no curvature left (saturated rows with lambda = 0): no update
        self.cols[4][k] = -G / denom if denom > 0 else 0.0

    def best_split(self, idx):
        """``(gain, feature, threshold)`` of the best split, or ``None``."""
        m = self.p.min_samples_leaf
        n = len(idx)
        if n < 2 * m:
            return None
        Xn = self.X[idx]
        order = np.argsort(Xn, axis=0, kind="stable")
        xs = np.take_along_axis(Xn, order, axis=0)
        gs = self.g[idx][order]
        hs = self.h[idx][order]
        G, H = gs[:, 0].sum(), hs[:, 0].sum()
        lam = self.p.reg_lambda
        GL = np.cumsum(gs, axis=0)[:-1]
        HL = np.cumsum(hs, axis=0)[:-1]
        GR, HR = G - GL, H - HL
        with np.errstate(divide="ignore", invalid="ignore"):
            gain = GL**2 / (HL + lam) + GR**2 / (HR + lam) - G**2 / (H + lam)
        n_left = np.arange(1, n)[:, None]
        valid = (xs[1:] > xs[:-1]) & (n_left >= m) & (n - n_left >= m) & np.isfinite(gain)
        if not valid.any():
            return None
        gain = np.where(valid, gain, -np.inf)
        # feature-major scan: ties go to the lowest feature, then lowest threshold
        flat = int(np.argmax(gain.T.ravel()))
        f, i = divmod(flat, n - 1)
        best = gain[i, f]
        if not best > 1e-12:
            return None
        return best, f, 0.5 * (xs[i, f] + xs[i + 1, f])

    def grow(self, idx, depth) -> int:
        k = self._node()
        G, H = self.g[idx].sum(), self.h[idx].sum()
        split = self.best_split(idx) if depth < self.p.max_depth else None
        if split is None:
            self._leaf(k, G, H)
            return k
        _, f, thr = split
        mask = self.X[idx, f] <= thr
        self.cols[0][k], self.cols[1][k], self.cols[4][k] = f, thr, 0.0
        self.cols[2][k] = self.grow(idx[mask], depth + 1)
        self.cols[3][k] = self.grow(idx[~mask], depth + 1)
        return k

    def tree(self, idx) -> Tree:
        self.grow(idx, 0)
        return Tree(*self.cols)


def fit_tree(X, g, h, params: Hyperparams, idx=None) -> Tree:
    if idx is None:
        idx = np.arange(len(X))
    return _Builder(X, g, h, params).tree(idx)


def fit(X, y, params: Hyperparams = Hyperparams(), seed=None) -> GbdtModel:
    """Boost ``params.n_trees`` trees on logistic loss.

    The seed only matters when ``params.subsample < 1``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or len(X) != len(y):
        raise DimensionMismatch("X must be 2-D with one row per label")
    if len(y) < 2:
        raise DegenerateData("need at least two samples")
    if not np.isin(y, (0, 1)).all():
        raise ValueError("labels must be 0/1")
    prior = y.mean()
    if prior in (0.0, 1.0):
        raise DegenerateData("both classes must be present")
    rng = np.random.default_rng(seed)
    base = float(np.log(prior / (1 - prior)))
    raw = np.full(len(y), base)
    trees = []
    n_sub = max(2, int(round(params.subsample * len(y))))
    for _ in range(params.n_trees):
        p = sigmoid(raw)
        g, h = p - y, p * (1 - p)
        idx = np.arange(len(y)) if params.subsample >= 1 else np.sort(rng.choice(len(y), n_sub, replace=False))
        tree = fit_tree(X, g, h, params, idx)
        trees.append(tree)
        raw = raw + params.learning_rate * tree.apply(X)
    return GbdtModel(base, trees, params.learning_rate, X.shape[1], params)


@numba.njit(cache=True)
def _ensemble_raw(X, base, lr, offsets, feature, threshold, left, right, value):
    out = np.empty(X.shape[0])
    for r in range(X.shape[0]):
        raw = base
        for t in range(offsets.shape[0]):
            o = offsets[t]
            k = o
            while feature[k] >= 0:
                if X[r, feature[k]] <= threshold[k]:
                    k = o + left[k]
                else:
                    k = o + right[k]
            raw += lr * value[k]
        out[r] = raw
    return out


def _packed(model: GbdtModel):
    if not model.trees:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty, np.empty(0), empty, empty, np.empty(0)
    offsets = np.cumsum([0] + [t.n_nodes for t in model.trees[:-1]]).astype(np.int64)
    cat = lambda name: np.concatenate([getattr(t, name) for t in model.trees])
    return offsets, cat("feature"), cat("threshold"), cat("left"), cat("right"), cat("value")


def predict_raw(model: GbdtModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    single = X.ndim == 1
    X2 = X[None, :] if single else X
    if X2.ndim != 2 or X2.shape[1] != model.n_features:
        raise DimensionMismatch(f"model expects {model.n_features} features, got shape {X.shape}")
    raw = _ensemble_raw(np.ascontiguousarray(X2), float(model.base_score), float(model.learning_rate),
                        *_packed(model))
    return raw[0] if single else raw


def predict_proba(model: GbdtModel, X) -> Union[float, np.ndarray]:
    """Cartel probability for one feature vector or a matrix of them."""
    raw = predict_raw(model, X)
    if np.ndim(raw) == 0:
        return float(sigmoid(np.array([raw]))[0])
    return sigmoid(raw)


def predict(model: GbdtModel, X, threshold: float = 0.5):
    return (np.asarray(predict_proba(model, X)) >= threshold).astype(int)


def model_to_dict(model: GbdtModel) -> dict:
    return {
        "format": "kartel-gbdt",
        "version": MODEL_VERSION,
        "n_features": model.n_features,
        "base_score": model.base_score,
        "learning_rate": model.learning_rate,
        "params": asdict(model.params),
        "trees": [t.to_dict() for t in model.trees],
    }


def model_from_dict(doc: dict) -> GbdtModel:
    return GbdtModel(
        base_score=float(doc["base_score"]),
        trees=[Tree.from_dict(t) for t in doc["trees"]],
        learning_rate=float(doc["learning_rate"]),
        n_features=int(doc["n_features"]),
        params=Hyperparams(**doc.get("params", {})),
    )


MODEL_VERSION = 1
