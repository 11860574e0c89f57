"""Evolutionary population experiment.

Two agents are drawn at random from a fixed-size population, play one
auction, and the loser copies the winner's strategy with probability equal
to the winner's profit. Strategy shares are sampled along the way.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numba
import numpy as np

from .auction import AuctionConfig, AuctionOutcome, Bidder, DecrementPolicy, play
from .errors import ExceededMaxBids, InvalidMix

N_AGENTS = 100
# Auctions per block of pre-drawn randomness. Fixed so that trajectories do
# not depend on the sampling interval.
_BLOCK = 1024


class StrategyType(enum.IntEnum):
    AGGRESSIVE = 0
    PASSIVE = 1
    RANDOM = 2

    def policy(self, config: AuctionConfig = AuctionConfig()) -> DecrementPolicy:
        lo, hi = config.min_decrement_frac, config.max_decrement_frac
        if self is StrategyType.AGGRESSIVE:
            return DecrementPolicy.fixed(hi)
        if self is StrategyType.PASSIVE:
            return DecrementPolicy.fixed(lo)
        return DecrementPolicy(lo, hi)


@dataclass
class Agent:
    id: int
    strategy: StrategyType
    cost: float = 0.0


@dataclass
class Population:
    strategies: np.ndarray  # int8 StrategyType codes
    costs: Optional[np.ndarray] = None  # only used with fixed per-agent costs

    def __len__(self) -> int:
        return len(self.strategies)

    @classmethod
    def from_counts(cls, counts: Sequence[int]) -> "Population":
        codes = np.repeat(np.arange(3, dtype=np.int8), counts)
        return cls(codes)

    def counts(self) -> np.ndarray:
        return np.bincount(self.strategies, minlength=3)

    def shares(self) -> np.ndarray:
        return self.counts() / len(self)

    @property
    def agents(self) -> list[Agent]:
        costs = self.costs if self.costs is not None else np.zeros(len(self))
        return [Agent(i, StrategyType(int(s)), float(c)) for i, (s, c) in enumerate(zip(self.strategies, costs))]


@dataclass
class SimulationRun:
    n_auctions: int
    initial_counts: tuple[int, int, int]
    auction_index: np.ndarray
    counts: np.ndarray  # (samples, 3) agents per strategy
    seed: Optional[int] = None
    fixed_costs: bool = False

    @property
    def shares(self) -> np.ndarray:
        return self.counts / self.counts.sum(axis=1, keepdims=True)

    @property
    def final_shares(self) -> np.ndarray:
        return self.shares[-1]


def mix_counts(mix: Sequence[float], n_agents: int = N_AGENTS) -> tuple[int, int, int]:
    """Agent counts (aggressive, passive, random) realizing ``mix`` exactly."""
    if len(mix) != 3:
        raise InvalidMix(f"expected three shares, got {len(mix)}")
    raw = np.asarray(mix, dtype=float) * n_agents
    counts = np.rint(raw)
    if (raw < 0).any() or not np.allclose(raw, counts, atol=1e-6) or counts.sum() != n_agents:
        raise InvalidMix(f"mix {tuple(mix)} is not a split of {n_agents} agents")
    return tuple(int(c) for c in counts)


def _policy_table(config: AuctionConfig):
    lo = np.array([StrategyType(s).policy(config).lo for s in range(3)])
    hi = np.array([StrategyType(s).policy(config).hi for s in range(3)])
    return lo, hi


@numba.njit(cache=True)
def converts(u, profit):
    """Imitation draw: with ``u ~ U[0, 1)`` this is true with probability ``profit``."""
    return u < profit


@numba.njit(cache=True)
def _evolve(strats, agent_costs, pair_a, pair_b, cost_draws, firsts, conv, pool, budget,
            lo_tab, hi_tab, start, max_bids, t0, sample_every, sample_counts, n_sampled,
            outcome, prices, who):
    """Run one block of auctions in place.

    ``agent_costs`` empty means costs come from ``cost_draws``. Writes the
    last auction's (winner, final price, profit, n_bids) into ``outcome``
    and returns the updated number of samples, or -1 on a runaway auction.
    """
    cursor = 0
    fixed = agent_costs.shape[0] > 0
    for k in range(pair_a.shape[0]):
        i = pair_a[k]
        j = pair_b[k]
        si = strats[i]
        sj = strats[j]
        if fixed:
            ci = agent_costs[i]
            cj = agent_costs[j]
        else:
            ci = start * cost_draws[k, 0]
            cj = start * cost_draws[k, 1]
        n = play(start, ci, cj, lo_tab[si], hi_tab[si], lo_tab[sj], hi_tab[sj],
                 firsts[k], pool[cursor:cursor + budget], max_bids, prices, who)
        if n < 0:
            return -1
        if lo_tab[si] != hi_tab[si] or lo_tab[sj] != hi_tab[sj]:
            cursor += n + 1
        if n > 0:
            if who[n - 1] == 0:
                w, l, cw = i, j, ci
            else:
                w, l, cw = j, i, cj
            profit = max(prices[n - 1] - cw, 0.0) / start
            outcome[0] = w
            outcome[1] = prices[n - 1]
            outcome[2] = profit
            if converts(conv[k], profit):
                strats[l] = strats[w]
        else:
            outcome[0] = -1
            outcome[1] = start
            outcome[2] = 0.0
        outcome[3] = n
        t = t0 + k + 1
        if sample_every > 0 and t % sample_every == 0:
            for s in range(3):
                sample_counts[n_sampled, s] = 0
            for a in range(strats.shape[0]):
                sample_counts[n_sampled, strats[a]] += 1
            n_sampled += 1
    return n_sampled


class _Runner:
    """Holds scratch buffers and draws randomness for ``_evolve``."""

    def __init__(self, config: AuctionConfig):
        self.config = config
        self.lo, self.hi = _policy_table(config)
        self.budget = config.uniform_budget
        self.max_bids = min(config.max_bids, self.budget - 1)
        self.prices = np.empty(self.budget)
        self.who = np.empty(self.budget, dtype=np.int64)
        self.outcome = np.zeros(4)

    def block(self, pop: Population, rng: np.random.Generator, size: int, t0=0,
              sample_every=0, sample_counts=None, n_sampled=0) -> int:
        n_agents = len(pop)
        a = rng.integers(0, n_agents, size)
        b = rng.integers(0, n_agents - 1, size)
        b += b >= a
        cost_draws = rng.random((size, 2))
        firsts = rng.integers(0, 2, size)
        conv = rng.random(size)
        pool = rng.random(size * self.budget)
        if sample_counts is None:
            sample_counts = np.zeros((1, 3), dtype=np.int64)
        agent_costs = pop.costs if pop.costs is not None else np.empty(0)
        got = _evolve(pop.strategies, agent_costs, a, b, cost_draws, firsts, conv, pool, self.budget,
                      self.lo, self.hi, self.config.start_price, self.max_bids, t0, sample_every,
                      sample_counts, n_sampled, self.outcome, self.prices, self.who)
        if got < 0:
            raise ExceededMaxBids(f"an auction passed {self.config.max_bids} bids")
        return got

    def last_outcome(self) -> AuctionOutcome:
        w, price, profit, n = self.outcome
        winner = None if w < 0 else int(w)
        return AuctionOutcome(winner, float(price), float(profit), int(n))


def step(population: Population, config: AuctionConfig, rng: np.random.Generator):
    """Play one auction between two distinct random agents and apply imitation.

    The population is updated in place and also returned, together with the
    auction outcome (``winner_id`` is the winner's index in the population).
    """
    if len(population) < 2:
        raise ValueError("need at least two agents")
    runner = _Runner(config)
    runner.block(population, rng, 1)
    return population, runner.last_outcome()


def run_experiment(
    initial_mix: Sequence[float],
    n_auctions: int,
    sample_every: int = 100,
    seed: Optional[int] = None,
    fixed_costs: bool = False,
    n_agents: int = N_AGENTS,
    config: Optional[AuctionConfig] = None,
) -> SimulationRun:
    """Evolve a population from ``initial_mix`` (aggressive, passive, random).

    Shares are sampled before the first auction, after every
    ``sample_every`` auctions, and after the last one.

    :param fixed_costs: draw each agent's cost once for the whole run
        instead of redrawing both costs every auction.
    """
    if sample_every < 1:
        raise ValueError("sample_every must be positive")
    if n_auctions < 0:
        raise ValueError("n_auctions must be nonnegative")
    config = config or AuctionConfig()
    counts = mix_counts(initial_mix, n_agents)
    rng = np.random.default_rng(seed)
    pop = Population.from_counts(counts)
    if fixed_costs:
        pop.costs = rng.random(n_agents) * config.start_price
    runner = _Runner(config)

    n_samples = n_auctions // sample_every
    samples = np.zeros((n_samples + 2, 3), dtype=np.int64)
    samples[0] = pop.counts()
    index = [0]
    filled = 1
    t = 0
    while t < n_auctions:
        size = min(_BLOCK, n_auctions - t)
        filled = runner.block(pop, rng, size, t, sample_every, samples, filled)
        t += size
    index += list(range(sample_every, n_auctions + 1, sample_every))
    if n_auctions % sample_every:
        samples[filled] = pop.counts()
        filled += 1
        index.append(n_auctions)
    return SimulationRun(
        n_auctions=n_auctions,
        initial_counts=counts,
        auction_index=np.array(index, dtype=np.int64),
        counts=samples[:filled].copy(),
        seed=seed,
        fixed_costs=fixed_costs,
    )
