"""Exact Shapley attribution of the cartel probability over bid positions.

The value of a coalition ``S`` is the interventional expectation
``mean_b f(x_S, b_{~S})`` over background rows ``b``; with all ``2**L``
coalitions enumerated the attributions are exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence, Union

import numpy as np

from .errors import EmptyBackground, TooManyFeatures
from .gbdt import GbdtModel, predict_proba

MAX_FEATURES = 20
# Hybrid rows evaluated per model call.
_CHUNK_ROWS = 1 << 17

Model = Union[GbdtModel, Callable[[np.ndarray], np.ndarray]]


def _as_function(model: Model) -> Callable[[np.ndarray], np.ndarray]:
    if isinstance(model, GbdtModel):
        return lambda X: np.asarray(predict_proba(model, X), dtype=float)
    return lambda X: np.asarray(model(X), dtype=float)


def _background(background) -> np.ndarray:
    bg = np.atleast_2d(np.asarray(background, dtype=float))
    if bg.size == 0 or len(bg) == 0:
        raise EmptyBackground("background set is empty")
    return bg


@dataclass
class ShapleyExplanation:
    base_value: float
    phis: np.ndarray
    predicted: float
    auction_id: str = ""

    @property
    def efficiency_gap(self) -> float:
        return abs(self.base_value + float(np.sum(self.phis)) - self.predicted)

    def to_dict(self) -> dict:
        return {
            "auction_id": self.auction_id,
            "base_value": self.base_value,
            "phis": [float(v) for v in self.phis],
            "predicted": self.predicted,
        }

    @classmethod
    def from_dict(cls, d) -> "ShapleyExplanation":
        return cls(float(d["base_value"]), np.asarray(d["phis"], dtype=float), float(d["predicted"]), d.get("auction_id", ""))


def _mean(values: np.ndarray, axis: int = -1) -> np.ndarray:
    """Mean along ``axis``, exact when all entries are equal."""
    ref = np.take(values, [0], axis=axis)
    return np.squeeze(ref, axis) + np.mean(values - ref, axis=axis)


def coalition_value(model: Model, x, S: Iterable[int], background) -> float:
    """Mean prediction over background rows with features in ``S`` taken from ``x``."""
    f = _as_function(model)
    bg = _background(background)
    hybrid = bg.copy()
    cols = list(S)
    hybrid[:, cols] = np.asarray(x, dtype=float)[cols]
    return float(_mean(f(hybrid)))


def _all_coalition_values(f, x: np.ndarray, bg: np.ndarray) -> np.ndarray:
    """``v[mask]`` for every bit mask over the features."""
    L = len(x)
    masks = np.arange(1 << L)
    on = ((masks[:, None] >> np.arange(L)) & 1).astype(bool)
    v = np.empty(len(masks))
    per = max(1, _CHUNK_ROWS // len(bg))
    for lo in range(0, len(masks), per):
        block = on[lo:lo + per]
        hybrid = np.where(block[:, None, :], x[None, None, :], bg[None, :, :])
        preds = f(hybrid.reshape(-1, L)).reshape(len(block), len(bg))
        v[lo:lo + per] = _mean(preds, axis=1)
    return v


def _shapley_weights(L: int) -> np.ndarray:
    """``w[s] = s! (L-s-1)! / L!`` for coalition sizes ``s`` in ``0..L-1``."""
    return np.array([math.factorial(s) * math.factorial(L - s - 1) / math.factorial(L) for s in range(L)])


def exact_shapley(model: Model, x, background, auction_id: str = "") -> ShapleyExplanation:
    x = np.asarray(x, dtype=float).ravel()
    L = len(x)
    if L > MAX_FEATURES:
        raise TooManyFeatures(f"{L} features; exact enumeration supports at most {MAX_FEATURES}")
    bg = _background(background)
    if bg.shape[1] != L:
        raise ValueError(f"background has {bg.shape[1]} columns, x has {L}")
    f = _as_function(model)
    v = _all_coalition_values(f, x, bg)
    masks = np.arange(1 << L)
    sizes = np.array([bin(m).count("1") for m in range(1 << L)])
    w = _shapley_weights(L)
    phis = np.empty(L)
    for i in range(L):
        bit = 1 << i
        without = masks[(masks & bit) == 0]
        phis[i] = float(np.sum(w[sizes[without]] * (v[without | bit] - v[without])))
    return ShapleyExplanation(float(v[0]), phis, float(v[-1]), auction_id)


def sampled_shapley(model: Model, x, background, n_permutations: int = 20000, seed=None):
    """Permutation-sampling estimate of the Shapley values.

    Returns ``(estimate, standard_error)``. Coalition values come from
    :func:`coalition_value` and are memoized per subset.
    """
    x = np.asarray(x, dtype=float).ravel()
    L = len(x)
    bg = _background(background)
    rng = np.random.default_rng(seed)
    cache: dict[int, float] = {}

    def value(mask: int) -> float:
        if mask not in cache:
            cache[mask] = coalition_value(model, x, [i for i in range(L) if mask >> i & 1], bg)
        return cache[mask]

    contrib = np.empty((n_permutations, L))
    for k in range(n_permutations):
        mask, prev = 0, value(0)
        for i in rng.permutation(L):
            mask |= 1 << int(i)
            cur = value(mask)
            contrib[k, i] = cur - prev
            prev = cur
    est = contrib.mean(axis=0)
    se = contrib.std(axis=0, ddof=1) / math.sqrt(n_permutations)
    return est, se


@dataclass
class WaterfallRow:
    label: str  # "base" or 1-based bid number
    phi: float
    start: float
    end: float


def waterfall(explanation: ShapleyExplanation) -> list[WaterfallRow]:
    """Base row, then nonzero contributions from least to most important."""
    rows = [WaterfallRow("base", 0.0, explanation.base_value, explanation.base_value)]
    level = explanation.base_value
    order = sorted((i for i, p in enumerate(explanation.phis) if p != 0.0),
                   key=lambda i: (abs(explanation.phis[i]), i))
    for i in order:
        phi = float(explanation.phis[i])
        rows.append(WaterfallRow(str(i + 1), phi, level, level + phi))
        level += phi
    return rows


@dataclass
class GlobalSummary:
    mean_abs_phi: np.ndarray
    explanations: list[ShapleyExplanation] = field(default_factory=list)

    def scatter(self) -> list[tuple[str, int, float, float]]:
        """``(auction_id, bid_index, phi, |phi|)`` per explained point and bid (1-based)."""
        return [(e.auction_id, i + 1, float(p), abs(float(p))) for e in self.explanations for i, p in enumerate(e.phis)]


def global_summary(model: Model, X, background, ids: Optional[Sequence[str]] = None) -> GlobalSummary:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if len(X) == 0:
        raise ValueError("dataset is empty")
    ids = list(ids) if ids is not None else [str(i) for i in range(len(X))]
    exps = [exact_shapley(model, x, background, aid) for x, aid in zip(X, ids)]
    mean_abs = np.mean([np.abs(e.phis) for e in exps], axis=0)
    return GlobalSummary(mean_abs, exps)
