"""Core market data types shared by ingestion, book keeping, and matching."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

MS_PER_SECOND = 1_000
MS_PER_MINUTE = 60_000


class EventKind(Enum):
    TRADE = "trade"
    BID = "bid"
    ASK = "ask"


class Side(Enum):
    BUY = "buy"
    SELL = "sell"

    def opposite(self) -> "Side":
        return Side.SELL if self is Side.BUY else Side.BUY


@dataclass(frozen=True, slots=True)
class MarketEvent:
    """One timestamped record from an exchange feed.

    ``price`` is quote currency per asset unit; ``quantity`` is in asset
    units. For bid/ask deltas the quantity is the new absolute size of the
    level (0 removes it). ``side`` is set for trades only.
    """

    ts: int                  # milliseconds since epoch
    kind: EventKind
    price: float
    quantity: float
    side: Side | None = None

    def __post_init__(self):
        if self.price <= 0:
            raise ValueError(f"price must be > 0, got {self.price}")
        if self.quantity < 0:
            raise ValueError(f"quantity must be >= 0, got {self.quantity}")


@dataclass(frozen=True, slots=True)
class TickBar:
    """One minute of OHLCV data aggregated from trades."""

    open_time: int           # minute-aligned ms timestamp
    open: float
    high: float
    low: float
    close: float
    volume: float

    def __post_init__(self):
        if not (self.low <= self.open <= self.high and self.low <= self.close <= self.high):
            raise ValueError(f"inconsistent OHLC bar at {self.open_time}")
        if self.volume < 0:
            raise ValueError("volume must be >= 0")


@dataclass(frozen=True, slots=True)
class Fill:
    """A partial or complete execution at one price."""

    price: float
    quantity: float
    ts: int = 0

    def __post_init__(self):
        if self.quantity <= 0:
            raise ValueError("fill quantity must be > 0")
