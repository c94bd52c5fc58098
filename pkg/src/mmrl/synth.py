"""Synthetic market generator: seeded random-walk book and trade feed.

Produces a 20+ level ladder at 0.10 spacings around a drifting mid price,
per-second level deltas as the ladder shifts, and Poisson-timed trades that
cross the spread. Output satisfies the ingest/orderbook invariants, so the
rest of the stack can run desk-scale experiments without recorded data.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import InvalidConfig
from .ingest import BookTimeline, build_minute_ticks
from .orderbook import OrderBook, from_ticks
from .types import MS_PER_MINUTE, MS_PER_SECOND, EventKind, MarketEvent, Side, TickBar

# 2018-11-01 00:00:00 UTC; any minute-aligned epoch works
DEFAULT_START_TS = 1_541_030_400_000

GRID_TICKS = 10          # ladder spacing: 0.10 in 0.01 ticks
HALF_SPREAD_TICKS = 5    # best bid/ask sit 0.05 off mid


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    duration_minutes: int = 120
    base_price: float = 5000.0
    trend_per_minute: float = 0.0
    noise_sigma: float = 0.1      # per-second stddev of the mid walk
    book_depth: int = 25
    trade_rate: float = 1.0       # Poisson trades per second
    level_qty: float = 3.0        # mean displayed quantity per level
    start_ts: int = DEFAULT_START_TS

    def __post_init__(self):
        if self.base_price <= 0:
            raise InvalidConfig("base_price must be > 0")
        if self.book_depth < 20:
            raise InvalidConfig("book_depth must be >= 20")
        if self.trade_rate <= 0:
            raise InvalidConfig("trade_rate must be > 0")
        if self.duration_minutes < 1 or self.level_qty <= 0 or self.noise_sigma < 0:
            raise InvalidConfig("bad synth config")
        if self.start_ts % MS_PER_MINUTE:
            raise InvalidConfig("start_ts must be minute-aligned")


@dataclass
class SynthMarket:
    config: SynthConfig
    snapshot_ts: int
    snapshot: OrderBook
    events: list[MarketEvent] = field(default_factory=list)

    def timeline(self) -> BookTimeline:
        return BookTimeline(self.snapshot_ts, self.snapshot.copy(), list(self.events))

    def trades(self) -> list[MarketEvent]:
        return [e for e in self.events if e.kind is EventKind.TRADE]

    def ticks(self) -> list[TickBar]:
        end = self.snapshot_ts + self.config.duration_minutes * MS_PER_MINUTE
        return build_minute_ticks(self.trades(), self.snapshot_ts, end)


def _mid_ticks(mid: float) -> int:
    # quantize the float walk to the 0.10 ladder grid
    return int(round(mid * 100 / GRID_TICKS)) * GRID_TICKS


def _ladder(mid_ticks: int, depth: int) -> tuple[list[int], list[int]]:
    bids = [mid_ticks - HALF_SPREAD_TICKS - GRID_TICKS * i for i in range(depth)]
    asks = [mid_ticks + HALF_SPREAD_TICKS + GRID_TICKS * i for i in range(depth)]
    return bids, asks


def generate(cfg: SynthConfig) -> SynthMarket:
    """Deterministic synthetic market for the given config/seed."""
    rng = np.random.default_rng(cfg.seed)
    t0 = cfg.start_ts
    seconds = cfg.duration_minutes * 60
    drift = cfg.trend_per_minute / 60.0

    def fresh_qty() -> float:
        return round(cfg.level_qty * (0.5 + rng.random()), 4)

    qty_at: dict[int, float] = {}

    mid = cfg.base_price
    bid_prices, ask_prices = _ladder(_mid_ticks(mid), cfg.book_depth)
    snapshot = OrderBook()
    for p in bid_prices:
        qty_at[p] = fresh_qty()
        snapshot.bids[p] = qty_at[p]
    for p in ask_prices:
        qty_at[p] = fresh_qty()
        snapshot.asks[p] = qty_at[p]

    events: list[MarketEvent] = []
    cur_bids, cur_asks = set(bid_prices), set(ask_prices)
    best_bid, best_ask = max(cur_bids), min(cur_asks)

    for k in range(1, seconds + 1):
        sec_start = t0 + (k - 1) * MS_PER_SECOND

        # trades during the second print at the current best quotes
        n_trades = rng.poisson(cfg.trade_rate)
        if n_trades:
            offsets = np.sort(rng.integers(0, MS_PER_SECOND, size=n_trades))
            for off in offsets:
                buy = rng.random() < 0.5
                price = from_ticks(best_ask if buy else best_bid)
                qty = round(float(rng.exponential(0.7)) + 0.05, 4)
                events.append(MarketEvent(ts=sec_start + int(off), kind=EventKind.TRADE,
                                          price=price, quantity=qty,
                                          side=Side.BUY if buy else Side.SELL))

        # shift the ladder to the new mid at the second boundary
        mid = mid + drift + (cfg.noise_sigma * rng.standard_normal() if cfg.noise_sigma else 0.0)
        new_bids, new_asks = _ladder(_mid_ticks(mid), cfg.book_depth)
        nb, na = set(new_bids), set(new_asks)
        ts = sec_start + MS_PER_SECOND

        # removals first so the book never crosses mid-batch
        for p in sorted(cur_bids - nb):
            events.append(MarketEvent(ts=ts, kind=EventKind.BID, price=from_ticks(p), quantity=0.0))
            qty_at.pop(p, None)
        for p in sorted(cur_asks - na):
            events.append(MarketEvent(ts=ts, kind=EventKind.ASK, price=from_ticks(p), quantity=0.0))
            qty_at.pop(p, None)
        for p in sorted(nb - cur_bids):
            qty_at[p] = fresh_qty()
            events.append(MarketEvent(ts=ts, kind=EventKind.BID, price=from_ticks(p), quantity=qty_at[p]))
        for p in sorted(na - cur_asks):
            qty_at[p] = fresh_qty()
            events.append(MarketEvent(ts=ts, kind=EventKind.ASK, price=from_ticks(p), quantity=qty_at[p]))

        # churn one surviving level per second to keep depth moving
        survivors = sorted((cur_bids & nb) | (cur_asks & na))
        if survivors:
            p = survivors[int(rng.integers(len(survivors)))]
            qty_at[p] = fresh_qty()
            kind = EventKind.BID if p in nb else EventKind.ASK
            events.append(MarketEvent(ts=ts, kind=kind, price=from_ticks(p), quantity=qty_at[p]))

        cur_bids, cur_asks = nb, na
        best_bid, best_ask = max(cur_bids), min(cur_asks)

    return SynthMarket(config=cfg, snapshot_ts=t0, snapshot=snapshot, events=events)
