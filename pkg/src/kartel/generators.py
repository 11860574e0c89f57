"""Labeled synthetic bid histories.

Honest auctions: every bidder undercuts by (about) the minimal step until
only one bidder is left above its escape point. Cartel auctions follow the
"ram" scheme: one or two small cover bids, then colluding bidders crash the
price far below any rational level, optionally followed by a last cover bid.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .auction import AuctionConfig, Bid, BidSeries, Label, Source

Range = Union[float, tuple[float, float]]
IntRange = Union[int, tuple[int, int]]


def _draw(rng: np.random.Generator, spec: Range) -> float:
    if isinstance(spec, tuple):
        return float(rng.uniform(*spec))
    return float(spec)


def _draw_int(rng: np.random.Generator, spec: IntRange) -> int:
    if isinstance(spec, tuple):
        return int(rng.integers(spec[0], spec[1] + 1))
    return int(spec)


@dataclass(frozen=True)
class HonestGenConfig:
    n_bidders: int = 2
    cost_range: tuple[float, float] = (0.0, 0.99)  # fractions of start price
    jitter: float = 0.0  # extra decrement, uniform in [0, jitter]
    start_price: float = 1.0
    rules: AuctionConfig = AuctionConfig()

    def __post_init__(self):
        if self.n_bidders < 2:
            raise ValueError("n_bidders must be >= 2")
        lo, hi = self.cost_range
        if not 0 <= lo <= hi <= 1:
            raise ValueError("cost_range must lie in [0, 1]")
        if self.jitter < 0 or self.rules.min_decrement_frac + self.jitter > self.rules.max_decrement_frac:
            raise ValueError("jitter would push decrements past the legal maximum")
        if hi > 1 - self.rules.min_decrement_frac:
            raise ValueError("cost_range upper end leaves no room for a first bid")


@dataclass(frozen=True)
class TaranGenConfig:
    n_ram_bidders: int = 2
    n_cover_bidders: int = 2
    target_drop_frac: Range = (0.5, 0.9)
    steps_to_target: IntRange = (1, 3)
    open_covers: IntRange = (1, 2)
    cover_steps: tuple[float, ...] = (0.005, 0.01)  # platform-grid steps, drawn uniformly
    closing_cover_prob: float = 0.5
    start_price: float = 1.0

    def __post_init__(self):
        if self.n_ram_bidders < 2:
            raise ValueError("n_ram_bidders must be >= 2")
        if self.n_cover_bidders < 1:
            raise ValueError("n_cover_bidders must be >= 1")
        drops = self.target_drop_frac if isinstance(self.target_drop_frac, tuple) else (self.target_drop_frac,) * 2
        if not 0.05 < drops[0] <= drops[1] < 1:
            raise ValueError("target_drop_frac must lie in (0.05, 1)")
        steps = self.steps_to_target if isinstance(self.steps_to_target, tuple) else (self.steps_to_target,) * 2
        if steps[0] < 1:
            raise ValueError("steps_to_target must be >= 1")


def gen_honest(config: HonestGenConfig = HonestGenConfig(), seed=None, costs: Optional[Sequence[float]] = None,
               auction_id: str = "honest") -> BidSeries:
    """Minimal-step bidding among ``n_bidders`` until one bidder is left.

    Bidders move round-robin in a random order; a bidder whose next step
    would cross its cost drops out for good.

    :param costs: explicit escape points as fractions of the start price;
        drawn from ``config.cost_range`` when omitted.
    """
    rng = np.random.default_rng(seed)
    n = config.n_bidders
    if costs is None:
        costs = rng.uniform(*config.cost_range, size=n)
    elif len(costs) != n:
        raise ValueError(f"expected {n} costs")
    start = config.start_price
    step_lo = config.rules.min_decrement_frac
    order = [int(i) for i in rng.permutation(n)]
    active = list(order)
    price, leader = start, None
    bids: list[Bid] = []
    turn = 0
    while True:
        contenders = [b for b in active if b != leader]
        if not contenders:
            break
        bidder = active[turn % len(active)]
        if bidder == leader:
            turn += 1
            continue
        room = (price - costs[bidder] * start) / start
        if room < step_lo - 1e-12:
            active.remove(bidder)
            continue
        # jitter never takes a bidder below its own cost
        frac = step_lo + (config.jitter * rng.random() if config.jitter else 0.0)
        frac = max(step_lo, min(frac, room))
        new = price - frac * start
        price = max(new, 0.0)
        bids.append(Bid(bidder, price, len(bids)))
        leader = bidder
        turn = active.index(bidder) + 1
    return BidSeries(auction_id, start, bids, Label.HONEST, Source.GENERATED)


def gen_taran(config: TaranGenConfig = TaranGenConfig(), seed=None, auction_id: str = "taran") -> BidSeries:
    """Ram-scheme cartel trajectory.

    Cover bidders take ids ``0..n_cover-1``; ram bidders follow. The ram
    phase takes the price to ``1 - target_drop_frac`` of start in
    ``steps_to_target`` bids whose sizes are split at random.
    """
    rng = np.random.default_rng(seed)
    start = config.start_price
    covers = list(range(config.n_cover_bidders))
    rams = [config.n_cover_bidders + i for i in range(config.n_ram_bidders)]
    target = _draw(rng, config.target_drop_frac)
    steps = _draw_int(rng, config.steps_to_target)
    n_open = _draw_int(rng, config.open_covers)

    levels: list[tuple[int, float]] = []
    level = 1.0
    for k in range(n_open):
        level -= float(rng.choice(config.cover_steps))
        levels.append((covers[k % len(covers)], level))
    min_step = min(config.cover_steps)
    floor = min(1.0 - target, level - steps * min_step)
    # every ram step is at least a legal minimal step
    weights = rng.dirichlet(np.ones(steps))
    drops = min_step + (level - floor - steps * min_step) * weights
    for k, d in enumerate(drops):
        level = floor if k == steps - 1 else level - d
        levels.append((rams[k % len(rams)], level))
    if rng.random() < config.closing_cover_prob and level - min_step > 0:
        level -= min_step
        levels.append((covers[(n_open) % len(covers)], level))
    bids = [Bid(b, lv * start, i) for i, (b, lv) in enumerate(levels)]
    return BidSeries(auction_id, start, bids, Label.CARTEL, Source.GENERATED)


def gen_fast_drop(n_bidders: int = 2, n_bids: IntRange = (10, 16), start_price: float = 1.0,
                  rules: AuctionConfig = AuctionConfig(), seed=None, auction_id: str = "fastdrop") -> BidSeries:
    """Cartel variant without a cliff: colluders alternate maximal legal steps.

    A rough stand-in for auctions where the price simply falls unnaturally
    fast; it stays within the legal step range.
    """
    rng = np.random.default_rng(seed)
    count = min(_draw_int(rng, n_bids), int(1 / rules.max_decrement_frac) - 1)
    prices = [start_price * (1 - rules.max_decrement_frac * (k + 1)) for k in range(count)]
    return BidSeries.from_prices(auction_id, start_price, prices, [k % n_bidders for k in range(count)],
                                 label=Label.CARTEL, source=Source.GENERATED)


def gen_dataset(n_honest: int, n_cartel: int, honest: HonestGenConfig = HonestGenConfig(),
                taran: TaranGenConfig = TaranGenConfig(), seed=None) -> list[BidSeries]:
    """Shuffled labeled mix of honest and ram-scheme auctions.

    Auction ids carry no label information.
    """
    if n_honest < 0 or n_cartel < 0:
        raise ValueError("counts must be nonnegative")
    ss = np.random.SeedSequence(seed)
    order_seed, *children = ss.spawn(n_honest + n_cartel + 1)
    series = [gen_honest(honest, np.random.default_rng(children[k])) for k in range(n_honest)]
    series += [gen_taran(taran, np.random.default_rng(children[n_honest + k])) for k in range(n_cartel)]
    perm = np.random.default_rng(order_seed).permutation(len(series))
    out = []
    for pos, k in enumerate(perm):
        s = series[k]
        s.auction_id = f"A{pos:05d}"
        out.append(s)
    return out
