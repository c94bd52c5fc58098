"""Benchmark strategies, PNL accounting, and the combined two-agent pipeline.

All strategies emit a :class:`PnlCurve` of cumulative realized profit per
minute so they can be overlaid on one chart. The pipeline realizes profit
at micro-agent fill VWAPs; the standalone strategies assume execution at
bar open prices.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .agent import greedy_action
from .errors import EmptySeries, SeriesTooShort
from .indicators import IndicatorConfig
from .ingest import BookTimeline
from .macro_env import MacroAction, MacroEnv
from .micro_env import MicroEnv
from .neural import QNetwork
from .orderbook import vwap
from .types import Side, TickBar


@dataclass
class PnlCurve:
    """Cumulative profit per timestamp plus summary statistics."""

    points: list[tuple[int, float]]

    def __post_init__(self):
        for (a, _), (b, _) in zip(self.points, self.points[1:]):
            if b <= a:
                raise ValueError("PnlCurve timestamps must be strictly increasing")

    @property
    def final_pnl(self) -> float:
        return self.points[-1][1] if self.points else 0.0

    @property
    def max_drawdown(self) -> float:
        peak = 0.0
        worst = 0.0
        for _, pnl in self.points:
            peak = max(peak, pnl)
            worst = max(worst, peak - pnl)
        return worst

    @property
    def profit_std(self) -> float:
        """Population stddev of per-step profit increments (volatility proxy)."""
        if len(self.points) < 2:
            return 0.0
        pnl = np.array([p for _, p in self.points])
        return float(np.diff(pnl).std())

    def stats(self) -> dict:
        return {"final_pnl": self.final_pnl, "max_drawdown": self.max_drawdown,
                "profit_std": self.profit_std, "n_points": len(self.points)}


@dataclass
class PipelineStats:
    total_orders: int = 0
    limit_orders: int = 0
    forced_market_orders: int = 0

    @property
    def limit_fraction(self) -> float:
        return self.limit_orders / self.total_orders if self.total_orders else 0.0

    def as_dict(self) -> dict:
        return {"total_orders": self.total_orders, "limit_orders": self.limit_orders,
                "forced_market_orders": self.forced_market_orders,
                "limit_fraction": self.limit_fraction}


def buy_and_hold(bars: Sequence[TickBar], quantity: float, start: int = 0) -> PnlCurve:
    """Mark-to-open PNL of buying ``quantity`` at the first open and holding."""
    bars = list(bars)[start:]
    if not bars:
        raise EmptySeries("buy_and_hold needs at least one bar")
    p0 = bars[0].open
    return PnlCurve([(b.open_time, quantity * (b.open - p0)) for b in bars])


def momentum(bars: Sequence[TickBar], n: int = 20, start: int | None = None) -> PnlCurve:
    """Trailing-SMA momentum: open below the SMA of the prior n closes buys
    one unit; open above it liquidates the inventory; equality holds."""
    bars = list(bars)
    if len(bars) <= n:
        raise SeriesTooShort(f"momentum needs more than {n} bars")
    start = n if start is None else max(start, n)
    closes = np.array([b.close for b in bars])
    inventory: list[float] = []
    realized = 0.0
    points = []
    for t in range(start, len(bars)):
        open_t = bars[t].open
        sma = closes[t - n:t].mean()
        if open_t < sma:
            inventory.append(open_t)
        elif open_t > sma and inventory:
            realized += sum(open_t - p for p in inventory)
            inventory = []
        points.append((bars[t].open_time, realized))
    return PnlCurve(points)


def run_macro_standalone(net: QNetwork, bars: Sequence[TickBar],
                         cfg: IndicatorConfig | None = None,
                         start: int | None = None, end: int | None = None,
                         buy_qty: float = 1.0) -> PnlCurve:
    """Greedy macro policy replay with open-price executions."""
    env = MacroEnv(bars, cfg, start=start, end=end, buy_qty=buy_qty, record_blotter=True)
    state = env.reset()
    realized = 0.0
    points = []
    while not env.done:
        t = env.t
        action = greedy_action(net, state)
        state, _, _ = env.step(action)
        row = env.blotter[-1]
        if row.action == "sell" and row.qty > 0:
            realized += row.raw_reward
        points.append((bars[t].open_time, realized))
    return PnlCurve(points)


def run_pipeline(macro_net: QNetwork, micro_net: QNetwork,
                 bars: Sequence[TickBar], timeline: BookTimeline,
                 cfg: IndicatorConfig | None = None,
                 start: int | None = None, end: int | None = None,
                 buy_qty: float = 1.0) -> tuple[PnlCurve, PipelineStats]:
    """Combined loop: the macro agent picks the side each minute, the micro
    agent works the execution inside that minute; profit realizes at fill
    VWAPs and order placements are tallied as limit vs forced-market."""
    env = MacroEnv(bars, cfg, start=start, end=end, buy_qty=buy_qty)
    micro = MicroEnv(timeline, record_episodes=True)
    state = env.reset()
    basis: list[float] = []
    realized = 0.0
    stats = PipelineStats()
    points = []

    def run_micro_episode(t0: int, side: Side, qty: float) -> float:
        s = micro.reset_at(t0, side, qty)
        done = False
        while not done:
            s, _, done = micro.step(greedy_action(micro_net, s))
        record = micro.records[-1]
        stats.limit_orders += record.limit_orders
        stats.forced_market_orders += record.market_orders
        stats.total_orders += record.limit_orders + record.market_orders
        return vwap(record.fills)

    while not env.done:
        t = env.t
        action = MacroAction(greedy_action(macro_net, state))
        if action is MacroAction.BUY:
            price = run_micro_episode(bars[t].open_time, Side.BUY, buy_qty)
            basis.append(price)
        elif action is MacroAction.SELL and basis:
            price = run_micro_episode(bars[t].open_time, Side.SELL, buy_qty * len(basis))
            realized += sum((price - b) * buy_qty for b in basis)
            basis = []
        state, _, _ = env.step(action)
        points.append((bars[t].open_time, realized))
    return PnlCurve(points), stats


def write_pnl_csv(curve: PnlCurve, sink) -> None:
    sink.write("ts,cum_pnl\n")
    for ts, pnl in curve.points:
        sink.write(f"{ts},{pnl}\n")


def read_pnl_csv(source) -> PnlCurve:
    header = source.readline().strip()
    if header != "ts,cum_pnl":
        raise ValueError(f"unexpected pnl CSV header: {header}")
    points = []
    for line in source:
        ts, pnl = line.strip().split(",")
        points.append((int(ts), float(pnl)))
    return PnlCurve(points)


def stats_json(strategy: str, curve: PnlCurve, seed: int,
               pipeline_stats: PipelineStats | None = None) -> str:
    doc = {"strategy": strategy, "seed": seed, **curve.stats()}
    if pipeline_stats is not None:
        doc["pipeline"] = pipeline_stats.as_dict()
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def plot_curves(curves: dict[str, PnlCurve], path) -> None:
    """Overlay strategy PNL curves on one line chart (PNG or SVG by suffix)."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(9, 5))
    for name, curve in curves.items():
        if not curve.points:
            continue
        ts = [p[0] for p in curve.points]
        pnl = [p[1] for p in curve.points]
        ax.plot(ts, pnl, label=name)
    ax.set_xlabel("time (ms)")
    ax.set_ylabel("cumulative profit")
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
