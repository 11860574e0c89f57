"""Open descending-price (reverse) auction mechanics.

Prices are real-valued and every decrement is a fraction of the *start*
price, so on a 100-unit lot a single bid may land anywhere in [95, 99.5].
Two bidders alternate; a bidder bids only when the price after its chosen
decrement stays at or above its cost, otherwise it drops out and the last
bidder wins at the standing price.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numba
import numpy as np

from .errors import ExceededMaxBids, NonMonotonePrices

# Slack for float comparisons, relative to the start price.
EPS = 1e-12


class Label(enum.IntEnum):
    HONEST = 0
    CARTEL = 1

    @classmethod
    def parse(cls, text: str) -> "Label":
        try:
            return cls[text.strip().upper()]
        except KeyError:
            raise ValueError(f"unknown label {text!r}") from None

    def __str__(self) -> str:
        return self.name.lower()


class Source(enum.Enum):
    SIMULATED = "simulated"
    GENERATED = "generated"
    INGESTED = "ingested"


@dataclass(frozen=True)
class AuctionConfig:
    start_price: float = 1.0
    min_decrement_frac: float = 0.005
    max_decrement_frac: float = 0.05
    max_bids: int = 512

    def __post_init__(self):
        if not self.start_price > 0:
            raise ValueError("start_price must be positive")
        if not 0 < self.min_decrement_frac <= self.max_decrement_frac < 1:
            raise ValueError("need 0 < min_decrement_frac <= max_decrement_frac < 1")
        if self.max_bids < 1:
            raise ValueError("max_bids must be positive")

    @property
    def uniform_budget(self) -> int:
        """Upper bound on bids in one auction, used to pre-draw decrements."""
        return min(self.max_bids, math.ceil(1.0 / self.min_decrement_frac) + 1) + 1


@dataclass(frozen=True)
class Bid:
    bidder_id: int
    price: float
    index: int


@dataclass
class BidSeries:
    auction_id: str
    start_price: float
    bids: list[Bid]
    label: Optional[Label] = None
    source: Source = Source.GENERATED

    def __post_init__(self):
        if not self.start_price > 0:
            raise ValueError(f"{self.auction_id}: start_price must be positive")
        for prev, cur in zip(self.bids, self.bids[1:]):
            if not cur.price < prev.price:
                raise NonMonotonePrices(
                    f"{self.auction_id}: price at bid {cur.index} ({cur.price}) "
                    f"does not go below bid {prev.index} ({prev.price})"
                )

    def __len__(self) -> int:
        return len(self.bids)

    @property
    def prices(self) -> np.ndarray:
        return np.array([b.price for b in self.bids], dtype=float)

    def normalized(self) -> np.ndarray:
        return self.prices / self.start_price

    def decrement_fracs(self) -> np.ndarray:
        """Per-bid price drops as fractions of the start price."""
        levels = np.concatenate(([self.start_price], self.prices))
        return -np.diff(levels) / self.start_price

    @classmethod
    def from_prices(cls, auction_id, start_price, prices, bidder_ids=None, **kw) -> "BidSeries":
        if bidder_ids is None:
            bidder_ids = [i % 2 for i in range(len(prices))]
        bids = [Bid(int(b), float(p), i) for i, (b, p) in enumerate(zip(bidder_ids, prices))]
        return cls(auction_id, float(start_price), bids, **kw)


@dataclass(frozen=True)
class AuctionOutcome:
    winner_id: Optional[int]
    final_price: float
    winner_profit: float
    n_bids: int


@dataclass(frozen=True)
class DecrementPolicy:
    """Chooses each decrement uniformly from ``[lo, hi]`` (fractions of start).

    ``lo == hi`` is a fixed-step policy and consumes no randomness.
    """

    lo: float
    hi: float

    def __post_init__(self):
        if not 0 < self.lo <= self.hi < 1:
            raise ValueError(f"bad decrement range [{self.lo}, {self.hi}]")

    @classmethod
    def fixed(cls, frac: float) -> "DecrementPolicy":
        return cls(frac, frac)

    @property
    def is_random(self) -> bool:
        return self.lo != self.hi


@dataclass(frozen=True)
class Bidder:
    cost: float
    policy: DecrementPolicy
    bidder_id: int = 0


def legal_decrement_bounds(config: AuctionConfig, current_price: float) -> tuple[float, float]:
    """Price interval ``(lo, hi)`` the next bid may land in.

    Only the lower end is floored at zero; ``lo > hi`` means no legal bid
    remains.
    """
    if not current_price > 0:
        raise ValueError("current_price must be positive")
    hi = current_price - config.min_decrement_frac * config.start_price
    lo = max(0.0, current_price - config.max_decrement_frac * config.start_price)
    return lo, hi


def out_of_bounds_decrements(series: BidSeries, config: AuctionConfig, tol: float = 1e-12) -> list[tuple[int, float]]:
    """``(bid_index, frac)`` for every decrement outside the legal range."""
    bad = []
    for bid, frac in zip(series.bids, series.decrement_fracs()):
        if frac < config.min_decrement_frac - tol or frac > config.max_decrement_frac + tol:
            bad.append((bid.index, float(frac)))
    return bad


@numba.njit(cache=True)
def play(start, cost0, cost1, lo0, hi0, lo1, hi1, first, uniforms, max_bids, prices, bidders):
    """Bid loop. Fills ``prices``/``bidders`` and returns the bid count.

    ``uniforms[n]`` drives the decrement of bid ``n`` when the mover's policy
    is random. Returns -1 when the loop would exceed ``max_bids``.
    """
    price = start
    turn = first
    n = 0
    slack = EPS * start
    while True:
        if turn == 0:
            cost, lo, hi = cost0, lo0, hi0
        else:
            cost, lo, hi = cost1, lo1, hi1
        frac = lo
        if hi != lo:
            frac = lo + (hi - lo) * uniforms[n]
        new = price - frac * start
        if new < cost - slack:
            return n
        if n >= max_bids:
            return -1
        if new < 0.0:
            new = 0.0
        prices[n] = new
        bidders[n] = turn
        n += 1
        price = new
        turn = 1 - turn


def run_auction(
    config: AuctionConfig,
    bidders: Sequence[Bidder],
    rng_seed=None,
    auction_id: str = "sim",
) -> tuple[BidSeries, AuctionOutcome]:
    """Play one two-bidder auction.

    :param rng_seed: int seed or a ``numpy.random.Generator``; picks the
        first mover and drives random decrements.
    """
    if len(bidders) != 2:
        raise ValueError("the engine plays exactly two bidders")
    a, b = bidders
    for bd in bidders:
        if not 0 <= bd.cost <= config.start_price:
            raise ValueError(f"cost {bd.cost} outside [0, start_price]")
    rng = np.random.default_rng(rng_seed)
    first = int(rng.integers(2))
    n_cap = config.uniform_budget
    if a.policy.is_random or b.policy.is_random:
        uniforms = rng.random(n_cap)
    else:
        uniforms = np.zeros(1)
    prices = np.empty(n_cap)
    who = np.empty(n_cap, dtype=np.int64)
    n = play(
        config.start_price, a.cost, b.cost, a.policy.lo, a.policy.hi, b.policy.lo, b.policy.hi,
        first, uniforms, min(config.max_bids, n_cap - 1), prices, who,
    )
    if n < 0:
        raise ExceededMaxBids(f"auction {auction_id} passed {config.max_bids} bids")
    ids = (a.bidder_id, b.bidder_id)
    bids = [Bid(ids[who[i]], float(prices[i]), i) for i in range(n)]
    series = BidSeries(auction_id, config.start_price, bids, source=Source.SIMULATED)
    if n == 0:
        return series, AuctionOutcome(None, config.start_price, 0.0, 0)
    winner = bidders[who[n - 1]]
    final = float(prices[n - 1])
    return series, AuctionOutcome(winner.bidder_id, final, max(final - winner.cost, 0.0), n)
