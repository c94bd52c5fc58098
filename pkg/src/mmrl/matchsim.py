"""Exchange matching simulation against replayed historical data.

Agent orders execute against the episode's book copy; resting limit orders
fill passively from subsequent historical trade prints using a queue-ahead
approximation of price-time priority. Agent orders never mutate the
historical feed itself (no market impact).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

from .errors import InsufficientDepth
from .orderbook import OrderBook, from_ticks, to_ticks
from .types import EventKind, Fill, MarketEvent, Side


class OrderType(Enum):
    LIMIT = "limit"
    MARKET = "market"


@dataclass(frozen=True)
class AgentOrder:
    side: Side
    kind: OrderType
    quantity: float
    limit_price: float | None = None
    placed_at: int = 0

    def __post_init__(self):
        if self.quantity <= 0:
            raise ValueError("order quantity must be > 0")
        if self.kind is OrderType.LIMIT and (self.limit_price is None or self.limit_price <= 0):
            raise ValueError("limit orders need a positive limit price")


@dataclass
class RestingOrder:
    """A live (or terminal) agent limit order with its execution record.

    ``queue_ahead`` is the displayed quantity that was already resting at
    the limit level when the order was placed; crossing historical trades
    consume it before they fill the agent.
    """

    order: AgentOrder
    remaining: float
    fills: list[Fill] = field(default_factory=list)
    queue_ahead: float = 0.0
    cancelled: bool = False

    @property
    def done(self) -> bool:
        return self.cancelled or self.remaining <= 0

    @property
    def filled_quantity(self) -> float:
        return sum(f.quantity for f in self.fills)


def _opposing_levels(book: OrderBook, side: Side) -> tuple[dict[int, float], list[int]]:
    if side is Side.BUY:
        return book.asks, sorted(book.asks)
    return book.bids, sorted(book.bids, reverse=True)


def place_market(book: OrderBook, side: Side, quantity: float, ts: int = 0) -> list[Fill]:
    """Walk the opposing side best-first, consuming ``quantity`` from the book.

    Raises ``InsufficientDepth`` (carrying the partial fills) if the
    opposing side runs out.
    """
    if quantity <= 0:
        raise ValueError("market order quantity must be > 0")
    levels, order = _opposing_levels(book, side)
    fills: list[Fill] = []
    remaining = quantity
    for ticks in order:
        take = min(remaining, levels[ticks])
        fills.append(Fill(price=from_ticks(ticks), quantity=take, ts=ts))
        if take >= levels[ticks]:
            del levels[ticks]
        else:
            levels[ticks] -= take
        remaining -= take
        if remaining <= 1e-12:
            remaining = 0.0
            break
    if remaining > 0:
        raise InsufficientDepth(fills, quantity)
    return fills


def place_limit(book: OrderBook, order: AgentOrder, ts: int | None = None) -> RestingOrder:
    """Place a limit order: cross aggressively at book prices, rest the rest.

    A buy limit at or above the best ask (sell limit at or below the best
    bid) executes immediately against the levels it crosses, at THEIR
    prices, up to the order quantity. Any remainder rests at the limit
    price behind the quantity already displayed there.
    """
    if order.kind is not OrderType.LIMIT:
        raise ValueError("place_limit expects a limit order")
    ts = order.placed_at if ts is None else ts
    limit_ticks = to_ticks(order.limit_price)
    levels, walk = _opposing_levels(book, order.side)
    fills: list[Fill] = []
    remaining = order.quantity
    for ticks in walk:
        crosses = ticks <= limit_ticks if order.side is Side.BUY else ticks >= limit_ticks
        if not crosses or remaining <= 0:
            break
        take = min(remaining, levels[ticks])
        fills.append(Fill(price=from_ticks(ticks), quantity=take, ts=ts))
        if take >= levels[ticks]:
            del levels[ticks]
        else:
            levels[ticks] -= take
        remaining -= take
    if remaining <= 1e-12:
        remaining = 0.0
    own_side = book.bids if order.side is Side.BUY else book.asks
    queue_ahead = own_side.get(limit_ticks, 0.0) if remaining > 0 else 0.0
    return RestingOrder(order=order, remaining=remaining, fills=fills, queue_ahead=queue_ahead)


def advance(resting: RestingOrder, events: Iterable[MarketEvent]) -> RestingOrder:
    """Fill a resting order from historical trades that cross its price.

    Each crossing trade first consumes ``queue_ahead``, then fills the agent
    at the RESTING price. Deltas and non-crossing trades are ignored. A
    cancelled or fully-filled order is returned unchanged.
    """
    if resting.done:
        return resting
    limit_ticks = to_ticks(resting.order.limit_price)
    rest_price = from_ticks(limit_ticks)
    buy = resting.order.side is Side.BUY
    for ev in events:
        if ev.kind is not EventKind.TRADE:
            continue
        trade_ticks = to_ticks(ev.price)
        crosses = trade_ticks <= limit_ticks if buy else trade_ticks >= limit_ticks
        if not crosses:
            continue
        available = ev.quantity
        if resting.queue_ahead > 0:
            eaten = min(resting.queue_ahead, available)
            resting.queue_ahead -= eaten
            available -= eaten
        if available <= 0:
            continue
        take = min(resting.remaining, available)
        resting.fills.append(Fill(price=rest_price, quantity=take, ts=ev.ts))
        resting.remaining -= take
        if resting.remaining <= 1e-12:
            resting.remaining = 0.0
            break
    return resting


def cancel(resting: RestingOrder) -> RestingOrder:
    """Freeze the order: fills so far are kept, no further fills possible."""
    resting.cancelled = True
    return resting


def write_fills_csv(fills: Sequence[Fill], sink) -> None:
    sink.write("ts,price,qty\n")
    for f in fills:
        sink.write(f"{f.ts},{f.price},{f.quantity}\n")
