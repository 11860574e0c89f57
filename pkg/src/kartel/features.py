"""Fixed-length bid features.

A bid history becomes its first ``L`` prices divided by the start price;
shorter histories are padded by repeating the last price.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from .auction import BidSeries, Label
from .errors import EmptySeries

DEFAULT_LENGTH = 11
CHANNELS = ("price", "decrement")


@dataclass
class FeatureVector:
    values: np.ndarray
    label: Optional[Label] = None
    auction_id: str = ""

    def __len__(self) -> int:
        return len(self.values)


def to_features(series: BidSeries, L: int = DEFAULT_LENGTH, channel: str = "price") -> FeatureVector:
    """Truncate or pad ``series`` to ``L`` normalized values.

    With ``channel="decrement"`` the values are per-bid drops as fractions
    of the start price; padding then adds zero drops.
    """
    if L < 1:
        raise ValueError("L must be positive")
    if channel not in CHANNELS:
        raise ValueError(f"channel must be one of {CHANNELS}")
    if len(series) == 0:
        raise EmptySeries(f"auction {series.auction_id} has no bids")
    if channel == "price":
        raw = series.normalized()[:L]
        pad = raw[-1]
    else:
        raw = series.decrement_fracs()[:L]
        pad = 0.0
    values = np.full(L, pad, dtype=float)
    values[: len(raw)] = raw
    return FeatureVector(values, series.label, series.auction_id)


def pad_values(values: Iterable[float], L: int = DEFAULT_LENGTH) -> np.ndarray:
    """Apply the truncate/pad rule to an already-normalized price sequence."""
    arr = np.asarray(list(values), dtype=float)
    if arr.size == 0:
        raise EmptySeries("no values")
    out = np.full(L, arr[min(len(arr), L) - 1])
    out[: min(len(arr), L)] = arr[:L]
    return out


def feature_matrix(items: Iterable, L: int = DEFAULT_LENGTH, channel: str = "price"):
    """Stack series (or ready ``FeatureVector``s) into ``(X, y, ids)``.

    ``y`` is an int array, -1 where a label is missing.
    """
    vecs = [it if isinstance(it, FeatureVector) else to_features(it, L, channel) for it in items]
    if not vecs:
        return np.empty((0, L)), np.empty(0, dtype=int), []
    X = np.vstack([v.values for v in vecs])
    y = np.array([-1 if v.label is None else int(v.label) for v in vecs], dtype=int)
    return X, y, [v.auction_id for v in vecs]
