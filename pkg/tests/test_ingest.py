import io
import json

import hypothesis.strategies as st
import numpy as np
import pytest
from hypothesis import given, settings

from mmrl.errors import BoundaryOutOfRange, MalformedRecord, NonPositivePrice, NonTradeEvent
from mmrl.ingest import (BookTimeline, build_minute_ticks, dump_snapshot, event_to_json,
                         load_snapshot, parse_event_stream, read_ticks_csv, replay_book,
                         split_train_test, write_event_stream, write_ticks_csv)
from mmrl.orderbook import OrderBook, apply_delta, book_from_levels, record_trade, to_ticks
from mmrl.types import MS_PER_MINUTE, EventKind, MarketEvent, Side, TickBar

T0 = 1_541_030_400_000  # minute-aligned


def trade(ts, price, qty, side=Side.BUY):
    return MarketEvent(ts=ts, kind=EventKind.TRADE, price=price, quantity=qty, side=side)


# -- parse_event_stream --------------------------------------------------------

def test_parse_empty_stream():
    assert parse_event_stream("") == []


def test_parse_single_trade_identity():
    line = '{"ts":1000,"kind":"trade","side":"buy","price":5500.0,"qty":0.5}'
    (ev,) = parse_event_stream(line)
    assert ev == MarketEvent(ts=1000, kind=EventKind.TRADE, price=5500.0,
                             quantity=0.5, side=Side.BUY)


def test_parse_sorts_by_timestamp():
    lines = ('{"ts":2000,"kind":"bid","price":10.0,"qty":1}\n'
             '{"ts":1000,"kind":"ask","price":11.0,"qty":1}\n')
    events = parse_event_stream(lines)
    assert [e.ts for e in events] == [1000, 2000]


@settings(max_examples=50)
@given(st.lists(st.tuples(st.integers(0, 50), st.integers(1, 5)), max_size=40))
def test_parse_matches_stable_sort_oracle(items):
    # tag each record through the qty field to observe intra-timestamp order
    lines = "".join(
        json.dumps({"ts": ts, "kind": "bid", "price": 10.0, "qty": ts * 1000 + i}) + "\n"
        for i, (ts, _) in enumerate(items))
    events = parse_event_stream(lines)
    tagged = [(ts, i) for i, (ts, _) in enumerate(items)]
    expected = sorted(tagged, key=lambda p: p[0])  # python sort is stable
    assert [(e.ts, int(e.quantity) % 1000) for e in events] == expected


def test_parse_malformed_raises_with_line_number():
    with pytest.raises(MalformedRecord) as exc:
        parse_event_stream('{"ts":1,"kind":"bid","price":10.0,"qty":1}\nnot json\n')
    assert exc.value.line_no == 2


def test_parse_nonpositive_price():
    with pytest.raises(NonPositivePrice):
        parse_event_stream('{"ts":1,"kind":"bid","price":0.0,"qty":1}')


def test_parse_trade_without_side_rejected():
    with pytest.raises(MalformedRecord):
        parse_event_stream('{"ts":1,"kind":"trade","price":10.0,"qty":1}')


def test_parse_lenient_collects_rejects():
    stream = ('{"ts":1,"kind":"bid","price":10.0,"qty":1}\n'
              'garbage\n'
              '{"ts":2,"kind":"bid","price":-4.0,"qty":1}\n'
              '{"ts":3,"kind":"ask","price":11.0,"qty":1}\n')
    rejects = []
    events = parse_event_stream(stream, rejects=rejects)
    assert len(events) == 2
    assert [ln for ln, _ in rejects] == [2, 3]


def test_serialize_round_trip():
    stream = ('{"ts":5,"kind":"trade","side":"sell","price":10.5,"qty":0.25}\n'
              '{"ts":6,"kind":"bid","price":10.0,"qty":3.0}\n')
    events = parse_event_stream(stream)
    sink = io.StringIO()
    write_event_stream(events, sink)
    assert parse_event_stream(sink.getvalue()) == events


# -- build_minute_ticks --------------------------------------------------------

def test_minute_ticks_single_minute_aggregation():
    trades = [trade(T0 + i * 1000, p, 1.0) for i, p in enumerate([10.0, 12.0, 9.0, 11.0])]
    (bar,) = build_minute_ticks(trades, T0, T0 + MS_PER_MINUTE)
    assert (bar.open, bar.high, bar.low, bar.close, bar.volume) == (10.0, 12.0, 9.0, 11.0, 4.0)


def test_minute_ticks_single_trade():
    (bar,) = build_minute_ticks([trade(T0, 7.0, 2.0)], T0, T0 + MS_PER_MINUTE)
    assert (bar.open, bar.high, bar.low, bar.close, bar.volume) == (7.0, 7.0, 7.0, 7.0, 2.0)


def test_minute_ticks_forward_fill_empty_minute():
    trades = [trade(T0, 10.0, 1.0), trade(T0 + 30_000, 11.0, 1.0)]
    bars = build_minute_ticks(trades, T0, T0 + 2 * MS_PER_MINUTE)
    assert len(bars) == 2
    filled = bars[1]
    assert (filled.open, filled.high, filled.low, filled.close, filled.volume) == \
        (11.0, 11.0, 11.0, 11.0, 0.0)


def test_minute_ticks_skips_leading_empty_minutes():
    trades = [trade(T0 + MS_PER_MINUTE + 5, 10.0, 1.0)]
    bars = build_minute_ticks(trades, T0, T0 + 2 * MS_PER_MINUTE)
    assert len(bars) == 1
    assert bars[0].open_time == T0 + MS_PER_MINUTE


def test_minute_ticks_rejects_delta_events():
    with pytest.raises(NonTradeEvent):
        build_minute_ticks([MarketEvent(ts=T0, kind=EventKind.BID, price=10.0, quantity=1.0)])


def test_minute_ticks_rejects_unaligned_range():
    with pytest.raises(ValueError):
        build_minute_ticks([trade(T0, 10.0, 1.0)], T0 + 1, T0 + MS_PER_MINUTE)


@settings(max_examples=40)
@given(st.lists(st.tuples(st.integers(0, 10 * 60_000 - 1), st.floats(1.0, 100.0),
                          st.floats(0.01, 5.0)), min_size=1, max_size=60))
def test_minute_ticks_volume_conservation(raw):
    trades = [trade(T0 + off, price, qty) for off, price, qty in raw]
    bars = build_minute_ticks(trades, T0, T0 + 10 * MS_PER_MINUTE)
    assert sum(b.volume for b in bars) == pytest.approx(sum(q for _, _, q in raw))


# -- replay_book ---------------------------------------------------------------

def random_timeline(rng, n_events=500, start=T0):
    snapshot = book_from_levels([(100.0 - i, 1.0 + i) for i in range(5)],
                                [(101.0 + i, 1.0 + i) for i in range(5)])
    events = []
    ts = start
    for _ in range(n_events):
        ts += int(rng.integers(0, 400))
        r = rng.random()
        if r < 0.45:
            events.append(MarketEvent(ts=ts, kind=EventKind.BID,
                                      price=float(rng.integers(80, 101)),
                                      quantity=float(rng.choice([0.0, 1.0, 2.0]))))
        elif r < 0.9:
            events.append(MarketEvent(ts=ts, kind=EventKind.ASK,
                                      price=float(rng.integers(101, 122)),
                                      quantity=float(rng.choice([0.0, 1.0, 2.0]))))
        else:
            events.append(trade(ts, float(rng.integers(90, 111)), float(rng.random() + 0.1),
                                Side.BUY if rng.random() < 0.5 else Side.SELL))
    return BookTimeline(start, snapshot, events)


def fold_oracle(timeline, until):
    book = timeline.initial_snapshot.copy()
    for ev in timeline.events:
        if ev.ts > until:
            break
        if ev.kind is EventKind.TRADE:
            record_trade(book, ev)
        else:
            apply_delta(book, ev)
    return book


def test_replay_before_first_event_is_snapshot():
    tl = random_timeline(np.random.default_rng(0), n_events=10)
    book = replay_book(tl, T0 - 1)
    assert book.bids == tl.initial_snapshot.bids
    assert book.asks == tl.initial_snapshot.asks


def test_replay_level_removal():
    snapshot = book_from_levels([(100.0, 1.0)], [])
    tl = BookTimeline(T0, snapshot,
                      [MarketEvent(ts=T0 + 10, kind=EventKind.BID, price=100.0, quantity=0.0)])
    assert replay_book(tl, T0 + 10).bids == {}


def test_replay_matches_fold_oracle():
    rng = np.random.default_rng(7)
    tl = random_timeline(rng, n_events=500)
    for until in (T0, T0 + 20_000, T0 + 61_000, tl.end_ts, tl.end_ts + 99):
        got = replay_book(tl, until)
        want = fold_oracle(tl, until)
        assert got.bids == want.bids and got.asks == want.asks
        assert got.last_trade == want.last_trade


def test_replay_idempotent():
    tl = random_timeline(np.random.default_rng(3), n_events=200)
    t = T0 + 45_000
    a, b = replay_book(tl, t), replay_book(tl, t)
    assert a.bids == b.bids and a.asks == b.asks and a.last_trade == b.last_trade


def test_replay_prefix_consistency():
    tl = random_timeline(np.random.default_rng(11), n_events=400)
    t1, t2 = T0 + 30_000, T0 + 70_000
    stepped = replay_book(tl, t1)
    for ev in tl.events_between(t1, t2):
        if ev.kind is EventKind.TRADE:
            record_trade(stepped, ev)
        else:
            apply_delta(stepped, ev)
    direct = replay_book(tl, t2)
    assert direct.bids == stepped.bids and direct.asks == stepped.asks
    assert direct.last_trade == stepped.last_trade


# -- split_train_test ----------------------------------------------------------

def make_bars(n, start=T0):
    return [TickBar(start + i * MS_PER_MINUTE, 10.0, 10.0, 10.0, 10.0, 1.0) for i in range(n)]


def test_split_boundary_before_first():
    bars = make_bars(4)
    train, test = split_train_test(bars, T0 - MS_PER_MINUTE)
    assert train == [] and test == bars


def test_split_boundary_after_last():
    bars = make_bars(4)
    train, test = split_train_test(bars, T0 + 10 * MS_PER_MINUTE)
    assert train == bars and test == []


def test_split_sizes():
    bars = make_bars(10)
    train, test = split_train_test(bars, bars[6].open_time)
    assert (len(train), len(test)) == (6, 4)
    assert train + test == bars


def test_split_empty_series():
    with pytest.raises(BoundaryOutOfRange):
        split_train_test([], T0)


def test_split_timeline_partitions_events():
    tl = random_timeline(np.random.default_rng(5), n_events=100)
    boundary = T0 + 15_000
    train, test = split_train_test(tl, boundary)
    assert train.events + test.events == tl.events
    assert all(e.ts < boundary for e in train.events)
    assert all(e.ts >= boundary for e in test.events)
    # test timeline picks up from the book state at the boundary
    want = fold_oracle(tl, boundary - 1)
    assert test.initial_snapshot.bids == want.bids
    assert test.initial_snapshot.asks == want.asks


# -- serialization -------------------------------------------------------------

def test_snapshot_round_trip():
    book = book_from_levels([(100.0, 1.5), (99.0, 2.0)], [(101.0, 1.0)])
    ts, loaded = load_snapshot(dump_snapshot(T0, book))
    assert ts == T0
    assert loaded.bids == book.bids and loaded.asks == book.asks


def test_snapshot_ordering_in_dump():
    book = book_from_levels([(99.0, 2.0), (100.0, 1.5)], [(102.0, 1.0), (101.0, 1.0)])
    doc = json.loads(dump_snapshot(T0, book))
    assert [p for p, _ in doc["bids"]] == [100.0, 99.0]
    assert [p for p, _ in doc["asks"]] == [101.0, 102.0]


def test_ticks_csv_round_trip():
    bars = [TickBar(T0, 10.0, 12.0, 9.5, 11.0, 3.25),
            TickBar(T0 + MS_PER_MINUTE, 11.0, 11.0, 11.0, 11.0, 0.0)]
    sink = io.StringIO()
    write_ticks_csv(bars, sink)
    assert read_ticks_csv(io.StringIO(sink.getvalue())) == bars
