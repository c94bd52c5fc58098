"""Intra-minute execution environment: limit orders on a 10-second cadence.

An episode covers one minute. Every 10 seconds the agent cancels its
previous order (if any) and places a limit order for the remaining quantity
at market price + 0.10 * a, a in [-50, 50]. Historical events replay
between placements; whatever remains after 60 seconds is forced out with a
market order. The reward is the VWAP improvement over the market price
observed before the first placement, paid on the terminal step only.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import EmptyFills, EpisodeDone, InsufficientDepth, OutOfRange
from .ingest import BookTimeline
from .matchsim import AgentOrder, OrderType, RestingOrder, advance, cancel, place_limit, place_market
from .orderbook import (OrderBook, apply_delta, from_ticks, market_price, record_trade,
                        to_ticks, top_levels, vwap)
from .types import MS_PER_MINUTE, MS_PER_SECOND, EventKind, Fill, MarketEvent, Side

N_ACTIONS = 101
ACTION_LOW = -50
ACTION_TICKS = 10            # 0.10 quote units per action unit, in 0.01 ticks
HORIZON_SECONDS = 60
SLOT_SECONDS = 10
MAX_PLACEMENTS = HORIZON_SECONDS // SLOT_SECONDS
WINDOW_STEPS = 30
BOOK_DEPTH = 20

STATE_DIM = WINDOW_STEPS * (BOOK_DEPTH * 2 * 2 + 3) + 2


def action_offset(index: int) -> int:
    """Map a network action index 0..100 to the signed tick-grid action."""
    if not 0 <= index < N_ACTIONS:
        raise ValueError(f"action index out of range: {index}")
    return index + ACTION_LOW


def action_price(book: OrderBook, side: Side, a: int) -> float:
    """Limit price market_price + 0.10 * a, computed on the tick grid."""
    if not ACTION_LOW <= a <= -ACTION_LOW:
        raise ValueError(f"action out of range: {a}")
    mp_ticks = to_ticks(market_price(book, side))
    return from_ticks(mp_ticks + ACTION_TICKS * a)


def episode_reward(side: Side, market_price_at_placement: float,
                   fills: Iterable[Fill]) -> float:
    """VWAP improvement over the pre-placement market price.

    Positive means better than market on either side: buys below p_m and
    sells above p_m both score positively.
    """
    w = vwap(fills)
    if side is Side.BUY:
        return market_price_at_placement - w
    return w - market_price_at_placement


@dataclass
class EpisodeRecord:
    t0: int
    side: Side
    qty: float
    actions: list[int] = field(default_factory=list)
    fills: list[Fill] = field(default_factory=list)
    forced_market_qty: float = 0.0
    unfilled_qty: float = 0.0
    reward: float = 0.0

    @property
    def limit_orders(self) -> int:
        return len(self.actions)

    @property
    def market_orders(self) -> int:
        return 1 if self.forced_market_qty > 0 else 0

    def to_json(self) -> str:
        return json.dumps({
            "t0": self.t0,
            "side": self.side.value,
            "qty": self.qty,
            "actions": self.actions,
            "fills": [[f.price, f.quantity] for f in self.fills],
            "forced_market_qty": self.forced_market_qty,
            "reward": self.reward,
        })


class MicroEnv:
    """Execution episodes over a book timeline.

    ``reset()`` starts at a random minute within [start_ts, end_ts] using
    the env's rng (side random unless fixed); ``reset_at`` pins the episode
    for the combined pipeline. The market state window holds one book/trade
    snapshot per second for the last 30 seconds.
    """

    n_actions = N_ACTIONS
    state_dim = STATE_DIM

    def __init__(self, timeline: BookTimeline, quantity: float = 1.0,
                 side: Side | None = None,
                 start_ts: int | None = None, end_ts: int | None = None,
                 rng: np.random.Generator | None = None,
                 record_episodes: bool = False):
        self.timeline = timeline
        self.quantity = quantity
        self.fixed_side = side
        self.start_ts = timeline.start_ts if start_ts is None else start_ts
        self.end_ts = timeline.end_ts if end_ts is None else end_ts
        self.rng = rng
        self.records: list[EpisodeRecord] | None = [] if record_episodes else None
        first = -(-self.start_ts // MS_PER_MINUTE) * MS_PER_MINUTE  # ceil to minute
        last = (self.end_ts - HORIZON_SECONDS * MS_PER_SECOND) // MS_PER_MINUTE * MS_PER_MINUTE
        self._minutes = list(range(first, last + 1, MS_PER_MINUTE))
        self.done = True

    def reset(self) -> np.ndarray:
        if self.rng is None:
            raise OutOfRange("random reset needs an rng; use reset_at instead")
        if not self._minutes:
            raise OutOfRange("timeline too short for a 60 s episode")
        t0 = self._minutes[int(self.rng.integers(len(self._minutes)))]
        side = self.fixed_side
        if side is None:
            side = Side.BUY if self.rng.random() < 0.5 else Side.SELL
        return self.reset_at(t0, side, self.quantity)

    def reset_at(self, t0: int, side: Side, quantity: float) -> np.ndarray:
        if t0 % MS_PER_MINUTE:
            raise OutOfRange(f"episode start {t0} is not minute-aligned")
        if not (self.start_ts <= t0 <= self.end_ts - HORIZON_SECONDS * MS_PER_SECOND):
            raise OutOfRange(f"episode start {t0} outside [{self.start_ts}, {self.end_ts}]")
        if quantity <= 0:
            raise ValueError("episode quantity must be > 0")
        self.t0 = t0
        self.side = side
        self.qty_remaining = quantity
        self.slot = 0
        self.resting: RestingOrder | None = None
        self._closed_fills: list[Fill] = []
        self.done = False
        self.episode = EpisodeRecord(t0=t0, side=side, qty=quantity)

        # rebuild the 30-step market window, one snapshot per second
        w_start = t0 - (WINDOW_STEPS - 1) * MS_PER_SECOND
        self.book = self.timeline.replay(w_start)
        self.window: deque = deque(maxlen=WINDOW_STEPS)
        self._snap()
        for ts in range(w_start + MS_PER_SECOND, t0 + 1, MS_PER_SECOND):
            self._advance_events(self.timeline.events_between(ts - MS_PER_SECOND, ts))
            self._snap()
        self.p_m = market_price(self.book, side)
        self._pm_ticks = to_ticks(self.p_m)
        return self._encode()

    def _snap(self) -> None:
        self.window.append((top_levels(self.book, BOOK_DEPTH), self.book.last_trade))

    def _advance_events(self, events: list[MarketEvent]) -> None:
        for ev in events:
            if ev.kind is EventKind.TRADE:
                if self.resting is not None:
                    advance(self.resting, [ev])
                record_trade(self.book, ev)
            else:
                apply_delta(self.book, ev)

    def _encode(self) -> np.ndarray:
        out = np.empty(STATE_DIM, dtype=np.float32)
        i = 0
        pm = self._pm_ticks
        for k in range(WINDOW_STEPS):
            view, last_trade = self.window[min(k, len(self.window) - 1)]
            for levels in (view.bid_levels, view.ask_levels):
                for price, qty in levels:
                    out[i] = to_ticks(price) - pm
                    out[i + 1] = np.log1p(qty)
                    i += 2
            if last_trade is None:
                out[i:i + 3] = 0.0
            else:
                price, qty, side = last_trade
                out[i] = to_ticks(price) - pm
                out[i + 1] = np.log1p(qty)
                out[i + 2] = 1.0 if side is Side.BUY else -1.0
            i += 3
        out[i] = self.qty_remaining
        out[i + 1] = HORIZON_SECONDS - self.slot * SLOT_SECONDS
        return out

    def _retire_resting(self) -> None:
        if self.resting is not None:
            cancel(self.resting)
            self._closed_fills.extend(self.resting.fills)
            self.resting = None

    def step(self, action_index: int) -> tuple[np.ndarray, float, bool]:
        if self.done:
            raise EpisodeDone("episode finished; reset first")
        a = action_offset(action_index)
        now = self.t0 + self.slot * SLOT_SECONDS * MS_PER_SECOND

        self._retire_resting()
        price = action_price(self.book, self.side, a)
        order = AgentOrder(side=self.side, kind=OrderType.LIMIT,
                           quantity=self.qty_remaining, limit_price=price, placed_at=now)
        self.resting = place_limit(self.book, order, ts=now)
        self.episode.actions.append(a)

        if self.resting.remaining > 0:
            # replay the 10 s slot, feeding trade prints to the resting order
            for sec in range(1, SLOT_SECONDS + 1):
                hi = now + sec * MS_PER_SECOND
                self._advance_events(self.timeline.events_between(hi - MS_PER_SECOND, hi))
                self._snap()
        self.qty_remaining = self.resting.remaining
        self.slot += 1

        if self.qty_remaining <= 0:
            self._retire_resting()
            return self._finish()
        if self.slot >= MAX_PLACEMENTS:
            self._retire_resting()
            self._force_market_order()
            return self._finish()
        return self._encode(), 0.0, False

    def _force_market_order(self) -> None:
        qty = self.qty_remaining
        self.episode.forced_market_qty = qty
        ts = self.t0 + HORIZON_SECONDS * MS_PER_SECOND
        try:
            fills = place_market(self.book, self.side, qty, ts=ts)
        except InsufficientDepth as exc:
            fills = exc.fills
        filled = sum(f.quantity for f in fills)
        self._closed_fills.extend(fills)
        self.qty_remaining = max(0.0, qty - filled)
        self.episode.unfilled_qty = self.qty_remaining

    def _finish(self) -> tuple[np.ndarray, float, bool]:
        self.done = True
        self.episode.fills = list(self._closed_fills)
        if not self.episode.fills:
            raise EmptyFills("episode ended with no fills; book had no depth at all")
        reward = episode_reward(self.side, self.p_m, self.episode.fills)
        self.episode.reward = reward
        if self.records is not None:
            self.records.append(self.episode)
        return self._encode(), float(reward), True
