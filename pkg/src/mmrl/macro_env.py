"""Minute-scale trading environment: buy/sell/hold with clipped rewards.

A buy appends the current bar's open price to the asset list; a sell
liquidates the whole list at the current open and scores the summed profit;
rewards are clipped to the sign set {-1, 0, 1}. An episode is one full pass
over its bar range.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from typing import Sequence

import numpy as np

from .errors import EpisodeDone, InsufficientHistory
from .indicators import FeatureVector, IndicatorConfig, featurize_all
from .types import TickBar


class MacroAction(IntEnum):
    BUY = 0
    SELL = 1
    HOLD = 2


def clip_reward(x: float) -> int:
    """Sign clipping: strictly negative -> -1, zero -> 0, positive -> +1."""
    if x < 0:
        return -1
    if x > 0:
        return 1
    return 0


@dataclass(frozen=True)
class MacroState:
    features: FeatureVector
    assets: tuple[float, ...]
    t: int


@dataclass
class BlotterRow:
    t: int
    action: str
    price: float
    qty: float
    raw_reward: float
    clipped_reward: int


class MacroEnv:
    """Episode over bars[start:end); actions trade at each bar's open price.

    The network state is the indicator scalars, the h raw closes as returns
    relative to the current close, and a fixed-size summary of the asset
    list (count, mean purchase price relative to the current open).
    """

    def __init__(self, bars: Sequence[TickBar], cfg: IndicatorConfig | None = None,
                 start: int | None = None, end: int | None = None,
                 buy_qty: float = 1.0, record_blotter: bool = False):
        self.bars = list(bars)
        self.cfg = cfg or IndicatorConfig()
        self.start = self.cfg.warmup if start is None else max(start, self.cfg.warmup)
        self.end = len(self.bars) if end is None else min(end, len(self.bars))
        if self.start >= self.end:
            raise InsufficientHistory(
                f"no usable bars: warm-up {self.cfg.warmup}, range [{self.start}, {self.end})")
        self._features = featurize_all(self.bars, self.cfg)
        self.buy_qty = buy_qty
        self.blotter: list[BlotterRow] | None = [] if record_blotter else None
        self.assets: list[float] = []
        self.t = self.start
        self.done = True  # requires reset() before stepping

    @property
    def state_dim(self) -> int:
        return 5 + self.cfg.history_h + 2

    n_actions = len(MacroAction)

    def _feature(self, t: int) -> FeatureVector:
        return self._features[t - self.cfg.warmup]

    def _encode(self, t: int) -> np.ndarray:
        fv = self._feature(t)
        close = fv.raw_prices[-1]
        rel_prices = fv.raw_prices / close - 1.0
        open_t = self.bars[t].open
        if self.assets:
            asset_summary = (float(len(self.assets)),
                             float(np.mean(self.assets) / open_t - 1.0))
        else:
            asset_summary = (0.0, 0.0)
        return np.concatenate([fv.scalars(), rel_prices, asset_summary])

    def state(self) -> MacroState:
        return MacroState(self._feature(self.t), tuple(self.assets), self.t)

    def reset(self) -> np.ndarray:
        self.assets = []
        self.t = self.start
        self.done = False
        return self._encode(self.t)

    def step(self, action: int) -> tuple[np.ndarray, float, bool]:
        if self.done:
            raise EpisodeDone("episode already finished; call reset()")
        action = MacroAction(action)
        open_t = self.bars[self.t].open
        raw = 0.0
        qty = 0.0
        if action is MacroAction.BUY:
            self.assets.append(open_t)
            qty = self.buy_qty
        elif action is MacroAction.SELL:
            if not self.assets:
                raw = -1.0
            else:
                raw = float(sum(open_t - p for p in self.assets)) * self.buy_qty
                qty = self.buy_qty * len(self.assets)
                self.assets = []
        reward = clip_reward(raw)
        if self.blotter is not None:
            self.blotter.append(BlotterRow(self.t, action.name.lower(), open_t,
                                           qty, raw, reward))
        self.t += 1
        self.done = self.t >= self.end
        if self.done:
            next_state = np.zeros(self.state_dim)
        else:
            next_state = self._encode(self.t)
        return next_state, float(reward), self.done


def write_blotter_csv(rows: Sequence[BlotterRow], sink) -> None:
    sink.write("t,action,price,qty,raw_reward,clipped_reward\n")
    for r in rows:
        sink.write(f"{r.t},{r.action},{r.price},{r.qty},{r.raw_reward},{r.clipped_reward}\n")
