"""Event stream parsing, order book timeline reconstruction, and minute bars.

Wire format is UTF-8 JSON lines, one object per line:
``{"ts": int_ms, "kind": "trade"|"bid"|"ask", "side": "buy"|"sell", "price": x, "qty": y}``
(``side`` on trades only). Snapshots are a single JSON object
``{"ts": int_ms, "bids": [[price, qty], ...], "asks": [[price, qty], ...]}``
with bids descending and asks ascending.
"""

from __future__ import annotations

import bisect
import csv
import io
import json
from dataclasses import dataclass, field
from typing import IO, Iterable, Sequence

from .errors import BoundaryOutOfRange, MalformedRecord, NonPositivePrice, NonTradeEvent
from .orderbook import OrderBook, apply_delta, book_from_levels, from_ticks, record_trade
from .types import MS_PER_MINUTE, EventKind, MarketEvent, Side, TickBar

_KINDS = {k.value: k for k in EventKind}
_SIDES = {s.value: s for s in Side}


def _parse_line(line: str, line_no: int) -> MarketEvent:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise MalformedRecord(line_no, f"invalid JSON: {exc.msg}") from exc
    if not isinstance(obj, dict):
        raise MalformedRecord(line_no, "record is not an object")
    try:
        ts = int(obj["ts"])
        kind = _KINDS[obj["kind"]]
        price = float(obj["price"])
        qty = float(obj["qty"])
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedRecord(line_no, f"bad field: {exc}") from exc
    if price <= 0:
        raise NonPositivePrice(f"line {line_no}: price {price} <= 0")
    if qty < 0:
        raise MalformedRecord(line_no, f"negative quantity {qty}")
    side = None
    if kind is EventKind.TRADE:
        try:
            side = _SIDES[obj["side"]]
        except (KeyError, TypeError) as exc:
            raise MalformedRecord(line_no, "trade without valid side") from exc
    return MarketEvent(ts=ts, kind=kind, price=price, quantity=qty, side=side)


def parse_event_stream(source: IO | Iterable[str | bytes] | str | bytes,
                       rejects: list[tuple[int, str]] | None = None) -> list[MarketEvent]:
    """Parse a JSON-lines event stream, stable-sorted by timestamp.

    Blank lines are skipped. Bad records raise ``MalformedRecord`` /
    ``NonPositivePrice`` unless a ``rejects`` sink is supplied, in which
    case they are collected as ``(line_no, reason)`` and parsing continues.
    """
    if isinstance(source, bytes):
        source = io.StringIO(source.decode("utf-8"))
    elif isinstance(source, str):
        source = io.StringIO(source)
    events: list[MarketEvent] = []
    for line_no, raw in enumerate(source, start=1):
        if isinstance(raw, bytes):
            raw = raw.decode("utf-8")
        line = raw.strip()
        if not line:
            continue
        try:
            events.append(_parse_line(line, line_no))
        except (MalformedRecord, NonPositivePrice) as exc:
            if rejects is None:
                raise
            rejects.append((line_no, str(exc)))
    events.sort(key=lambda e: e.ts)  # stable: intra-timestamp input order kept
    return events


def event_to_json(event: MarketEvent) -> str:
    obj = {"ts": event.ts, "kind": event.kind.value}
    if event.side is not None:
        obj["side"] = event.side.value
    obj["price"] = event.price
    obj["qty"] = event.quantity
    return json.dumps(obj)


def write_event_stream(events: Iterable[MarketEvent], sink: IO[str]) -> None:
    for ev in events:
        sink.write(event_to_json(ev) + "\n")


def load_snapshot(source: IO | str | bytes) -> tuple[int, OrderBook]:
    """Read a snapshot JSON object into (timestamp, OrderBook)."""
    if hasattr(source, "read"):
        source = source.read()
    if isinstance(source, bytes):
        source = source.decode("utf-8")
    obj = json.loads(source)
    book = book_from_levels(obj["bids"], obj["asks"])
    return int(obj["ts"]), book


def dump_snapshot(ts: int, book: OrderBook) -> str:
    bids = [[from_ticks(p), book.bids[p]] for p in sorted(book.bids, reverse=True)]
    asks = [[from_ticks(p), book.asks[p]] for p in sorted(book.asks)]
    return json.dumps({"ts": ts, "bids": bids, "asks": asks})


def minute_floor(ts: int) -> int:
    return (ts // MS_PER_MINUTE) * MS_PER_MINUTE


def build_minute_ticks(trades: Sequence[MarketEvent],
                       t_start: int | None = None,
                       t_end: int | None = None) -> list[TickBar]:
    """Aggregate trades into per-minute OHLCV bars over [t_start, t_end).

    Bars start at the first minute that contains a trade; later minutes
    without trades carry the previous close forward as a flat zero-volume
    bar, so indicator windows stay contiguous.
    """
    for ev in trades:
        if ev.kind is not EventKind.TRADE:
            raise NonTradeEvent(f"{ev.kind} event passed to build_minute_ticks")
    trades = sorted(trades, key=lambda e: e.ts)
    if t_start is None:
        t_start = minute_floor(trades[0].ts) if trades else 0
    if t_end is None:
        t_end = minute_floor(trades[-1].ts) + MS_PER_MINUTE if trades else 0
    if t_start % MS_PER_MINUTE or t_end % MS_PER_MINUTE:
        raise ValueError("range endpoints must be minute-aligned")

    bars: list[TickBar] = []
    i = 0
    prev_close: float | None = None
    for minute in range(t_start, t_end, MS_PER_MINUTE):
        hi = minute + MS_PER_MINUTE
        j = i
        while j < len(trades) and trades[j].ts < hi:
            j += 1
        in_minute = [t for t in trades[i:j] if t.ts >= minute]
        i = j
        if in_minute:
            prices = [t.price for t in in_minute]
            bars.append(TickBar(
                open_time=minute,
                open=prices[0],
                high=max(prices),
                low=min(prices),
                close=prices[-1],
                volume=sum(t.quantity for t in in_minute),
            ))
            prev_close = prices[-1]
        elif prev_close is not None:
            bars.append(TickBar(minute, prev_close, prev_close, prev_close, prev_close, 0.0))
        # leading empty minutes have no close to carry forward; skip them
    return bars


def _apply_events(book: OrderBook, events: Iterable[MarketEvent]) -> OrderBook:
    for ev in events:
        if ev.kind is EventKind.TRADE:
            record_trade(book, ev)
        else:
            apply_delta(book, ev)
    return book


@dataclass
class BookTimeline:
    """An initial snapshot plus the ordered event stream that follows it.

    ``replay(until)`` folds every event with ``ts <= until`` into a copy of
    the snapshot. Minute-boundary book states are cached lazily (contiguous
    from the start) so repeated replays to nearby timestamps stay cheap.
    """

    snapshot_ts: int
    initial_snapshot: OrderBook
    events: list[MarketEvent]
    _ts_index: list[int] = field(init=False, repr=False)
    _grid0: int = field(init=False, repr=False)
    _minute_cache: dict[int, OrderBook] = field(init=False, repr=False, default_factory=dict)
    _cache_upto: int | None = field(init=False, repr=False, default=None)

    def __post_init__(self):
        for a, b in zip(self.events, self.events[1:]):
            if b.ts < a.ts:
                raise ValueError("timeline events must be sorted by timestamp")
        self._ts_index = [e.ts for e in self.events]
        first = min(self.snapshot_ts, self.events[0].ts) if self.events else self.snapshot_ts
        self._grid0 = minute_floor(first)

    @property
    def start_ts(self) -> int:
        return self.snapshot_ts

    @property
    def end_ts(self) -> int:
        return self.events[-1].ts if self.events else self.snapshot_ts

    def offset_after(self, ts: int) -> int:
        """Index of the first event with timestamp > ts."""
        return bisect.bisect_right(self._ts_index, ts)

    def events_between(self, t_from: int, t_until: int) -> list[MarketEvent]:
        """Events with t_from < ts <= t_until."""
        return self.events[self.offset_after(t_from):self.offset_after(t_until)]

    def replay(self, until: int) -> OrderBook:
        target = minute_floor(until)
        if self._cache_upto is not None and target > self._grid0:
            m = min(self._cache_upto, target)
            book = self._minute_cache[m].copy()
            cur_off, nxt = self.offset_after(m), m + MS_PER_MINUTE
        else:
            book = self.initial_snapshot.copy()
            cur_off, nxt = 0, self._grid0 + MS_PER_MINUTE
        while nxt <= target:
            off = self.offset_after(nxt)
            _apply_events(book, self.events[cur_off:off])
            self._minute_cache[nxt] = book.copy()
            self._cache_upto = nxt
            cur_off = off
            nxt += MS_PER_MINUTE
        _apply_events(book, self.events[cur_off:self.offset_after(until)])
        return book


def replay_book(timeline: BookTimeline, until: int) -> OrderBook:
    """Book state after applying all events with ts <= until to the snapshot."""
    return timeline.replay(until)


def split_train_test(series, boundary: int):
    """Split bars or a timeline at ``boundary``: strictly-before vs rest."""
    if isinstance(series, BookTimeline):
        if not series.events:
            raise BoundaryOutOfRange("cannot split an empty timeline")
        idx = bisect.bisect_left(series._ts_index, boundary)
        train = BookTimeline(series.snapshot_ts, series.initial_snapshot.copy(),
                             series.events[:idx])
        test_snapshot = _apply_events(series.initial_snapshot.copy(), series.events[:idx])
        test = BookTimeline(max(boundary, series.snapshot_ts), test_snapshot,
                            series.events[idx:])
        return train, test
    bars = list(series)
    if not bars:
        raise BoundaryOutOfRange("cannot split an empty series")
    idx = bisect.bisect_left([b.open_time for b in bars], boundary)
    return bars[:idx], bars[idx:]


TICKS_CSV_HEADER = ["open_time", "open", "high", "low", "close", "volume"]


def write_ticks_csv(bars: Iterable[TickBar], sink: IO[str]) -> None:
    writer = csv.writer(sink)
    writer.writerow(TICKS_CSV_HEADER)
    for b in bars:
        writer.writerow([b.open_time, b.open, b.high, b.low, b.close, b.volume])


def read_ticks_csv(source: IO[str]) -> list[TickBar]:
    reader = csv.reader(source)
    header = next(reader, None)
    if header != TICKS_CSV_HEADER:
        raise MalformedRecord(1, f"unexpected ticks CSV header: {header}")
    bars = []
    for row in reader:
        bars.append(TickBar(int(row[0]), float(row[1]), float(row[2]),
                            float(row[3]), float(row[4]), float(row[5])))
    return bars
