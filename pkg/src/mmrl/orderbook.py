"""Two-sided limit order book with tick-quantized price levels.

Prices are stored internally as integer ticks of 0.01 quote units so that
level keys sort exactly and the 0.10 action grid of the execution agent is
always representable. The public API speaks float prices.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import EmptyFills, EmptySide
from .types import EventKind, Fill, MarketEvent, Side

TICK = 0.01
TICKS_PER_UNIT = 100


def to_ticks(price: float) -> int:
    return int(round(price * TICKS_PER_UNIT))


def from_ticks(ticks: int) -> float:
    return ticks / TICKS_PER_UNIT


@dataclass
class OrderBook:
    """Sorted price levels per side plus the most recent trade print.

    ``bids`` and ``asks`` map price ticks to quantity; zero-quantity levels
    are never stored. Mutations must go through :func:`apply_delta` (or
    the matching simulator), which keep the book uncrossed.
    """

    bids: dict[int, float] = field(default_factory=dict)
    asks: dict[int, float] = field(default_factory=dict)
    last_trade: tuple[float, float, Side] | None = None

    def copy(self) -> "OrderBook":
        return OrderBook(dict(self.bids), dict(self.asks), self.last_trade)

    def best_bid(self) -> int | None:
        return max(self.bids) if self.bids else None

    def best_ask(self) -> int | None:
        return min(self.asks) if self.asks else None

    def mid_price(self) -> float | None:
        bb, ba = self.best_bid(), self.best_ask()
        if bb is None or ba is None:
            return None
        return from_ticks(bb + ba) / 2

    def is_crossed(self) -> bool:
        bb, ba = self.best_bid(), self.best_ask()
        return bb is not None and ba is not None and bb >= ba

    def set_level(self, side: Side, price_ticks: int, quantity: float) -> None:
        levels = self.bids if side is Side.BUY else self.asks
        if quantity > 0:
            levels[price_ticks] = quantity
        else:
            levels.pop(price_ticks, None)


@dataclass(frozen=True)
class LevelView:
    """Fixed-depth projection of both sides, padded to exactly ``depth``.

    Padding entries repeat the deepest real price on the side (mid-price or
    the opposing best when the side is empty) with quantity 0, keeping
    network inputs fixed-length.
    """

    depth: int
    bid_levels: tuple[tuple[float, float], ...]
    ask_levels: tuple[tuple[float, float], ...]


def apply_delta(book: OrderBook, event: MarketEvent) -> OrderBook:
    """Set the absolute quantity at the event's price level (0 deletes).

    A delta that crosses the opposing best drops the stale opposing levels
    it crosses, so the book stays uncrossed. Removing an absent level is a
    no-op. Returns the same (mutated) book.
    """
    if event.kind not in (EventKind.BID, EventKind.ASK):
        raise ValueError(f"apply_delta expects a bid/ask delta, got {event.kind}")
    ticks = to_ticks(event.price)
    if event.kind is EventKind.BID:
        if event.quantity > 0:
            for stale in [p for p in book.asks if p <= ticks]:
                del book.asks[stale]
            book.bids[ticks] = event.quantity
        else:
            book.bids.pop(ticks, None)
    else:
        if event.quantity > 0:
            for stale in [p for p in book.bids if p >= ticks]:
                del book.bids[stale]
            book.asks[ticks] = event.quantity
        else:
            book.asks.pop(ticks, None)
    return book


def record_trade(book: OrderBook, event: MarketEvent) -> OrderBook:
    """Update the last-trade marker from a trade event."""
    if event.kind is not EventKind.TRADE:
        raise ValueError("record_trade expects a trade event")
    book.last_trade = (event.price, event.quantity, event.side or Side.BUY)
    return book


def market_price(book: OrderBook, side: Side) -> float:
    """Best price on the opposing side for an order of direction ``side``."""
    if side is Side.BUY:
        best = book.best_ask()
        if best is None:
            raise EmptySide("no ask levels")
    else:
        best = book.best_bid()
        if best is None:
            raise EmptySide("no bid levels")
    return from_ticks(best)


def _padded(levels: list[tuple[float, float]], depth: int, fallback: float) -> tuple:
    pad_price = levels[-1][0] if levels else fallback
    padded = levels + [(pad_price, 0.0)] * (depth - len(levels))
    return tuple(padded)


def top_levels(book: OrderBook, depth: int = 20) -> LevelView:
    """Best ``depth`` levels per side, padded; never mutates the book."""
    if depth < 1:
        raise ValueError("depth must be >= 1")
    bid_ticks = sorted(book.bids, reverse=True)[:depth]
    ask_ticks = sorted(book.asks)[:depth]
    bids = [(from_ticks(p), book.bids[p]) for p in bid_ticks]
    asks = [(from_ticks(p), book.asks[p]) for p in ask_ticks]

    mid = book.mid_price()
    if mid is not None:
        fallback = mid
    elif book.bids:
        fallback = from_ticks(book.best_bid())
    elif book.asks:
        fallback = from_ticks(book.best_ask())
    else:
        fallback = 0.0
    return LevelView(depth, _padded(bids, depth, fallback), _padded(asks, depth, fallback))


def vwap(fills: Iterable[Fill]) -> float:
    """Volume-weighted average price of a fill set."""
    fills = list(fills)
    total = sum(f.quantity for f in fills)
    if not fills or total <= 0:
        raise EmptyFills("vwap needs at least one fill with positive quantity")
    return sum(f.price * f.quantity for f in fills) / total


def book_from_levels(bids: Sequence[tuple[float, float]],
                     asks: Sequence[tuple[float, float]],
                     last_trade: tuple[float, float, Side] | None = None) -> OrderBook:
    """Build a book from (price, quantity) pairs in quote units."""
    book = OrderBook(last_trade=last_trade)
    for price, qty in bids:
        if qty > 0:
            book.bids[to_ticks(price)] = qty
    for price, qty in asks:
        if qty > 0:
            book.asks[to_ticks(price)] = qty
    return book
