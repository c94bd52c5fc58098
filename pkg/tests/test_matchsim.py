import numpy as np
import pytest

from mmrl.errors import InsufficientDepth
from mmrl.matchsim import AgentOrder, OrderType, advance, cancel, place_limit, place_market
from mmrl.orderbook import book_from_levels, to_ticks, vwap
from mmrl.types import EventKind, MarketEvent, Side


def trade(ts, price, qty, side=Side.BUY):
    return MarketEvent(ts=ts, kind=EventKind.TRADE, price=price, quantity=qty, side=side)


def limit(side, price, qty, placed_at=0):
    return AgentOrder(side=side, kind=OrderType.LIMIT, quantity=qty,
                      limit_price=price, placed_at=placed_at)


# -- place_market --------------------------------------------------------------

def test_market_single_level_take():
    book = book_from_levels([], [(101.0, 1.0), (102.0, 1.0)])
    fills = place_market(book, Side.BUY, 1.0)
    assert [(f.price, f.quantity) for f in fills] == [(101.0, 1.0)]
    assert to_ticks(101.0) not in book.asks


def test_market_two_level_walk():
    book = book_from_levels([], [(101.0, 1.0), (102.0, 1.0)])
    fills = place_market(book, Side.BUY, 2.0)
    assert [(f.price, f.quantity) for f in fills] == [(101.0, 1.0), (102.0, 1.0)]
    assert vwap(fills) == 101.5


def test_market_exhaustion_partial_fill():
    book = book_from_levels([], [(101.0, 0.5)])
    with pytest.raises(InsufficientDepth) as exc:
        place_market(book, Side.BUY, 1.0)
    assert [(f.price, f.quantity) for f in exc.value.fills] == [(101.0, 0.5)]


def test_market_sell_walks_bids_best_first():
    book = book_from_levels([(100.0, 0.5), (99.0, 2.0)], [])
    fills = place_market(book, Side.SELL, 1.0)
    assert [(f.price, f.quantity) for f in fills] == [(100.0, 0.5), (99.0, 0.5)]
    assert book.bids[to_ticks(99.0)] == 1.5


# -- place_limit ---------------------------------------------------------------

def test_limit_aggressive_cross_price_improvement():
    book = book_from_levels([], [(101.0, 1.0)])
    resting = place_limit(book, limit(Side.BUY, 102.0, 1.0))
    assert [(f.price, f.quantity) for f in resting.fills] == [(101.0, 1.0)]
    assert resting.remaining == 0.0


def test_limit_passive_placement():
    book = book_from_levels([], [(101.0, 1.0)])
    resting = place_limit(book, limit(Side.BUY, 100.0, 1.0))
    assert resting.fills == []
    assert resting.remaining == 1.0
    assert resting.queue_ahead == 0.0


def test_limit_partial_cross_then_rest():
    book = book_from_levels([], [(101.0, 0.4), (102.0, 1.0)])
    resting = place_limit(book, limit(Side.BUY, 101.5, 1.0))
    assert [(f.price, f.quantity) for f in resting.fills] == [(101.0, 0.4)]
    assert resting.remaining == pytest.approx(0.6)


def test_limit_queue_ahead_from_displayed_quantity():
    book = book_from_levels([(100.0, 2.5)], [(101.0, 1.0)])
    resting = place_limit(book, limit(Side.BUY, 100.0, 1.0))
    assert resting.queue_ahead == 2.5


# -- advance -------------------------------------------------------------------

def test_advance_full_passive_fill():
    book = book_from_levels([(99.0, 1.0)], [])
    resting = place_limit(book, limit(Side.SELL, 100.0, 1.0))
    advance(resting, [trade(1, 100.0, 2.0)])
    assert [(f.price, f.quantity) for f in resting.fills] == [(100.0, 1.0)]
    assert resting.remaining == 0.0


def test_advance_non_crossing_trade_is_ignored():
    book = book_from_levels([(98.0, 1.0)], [])
    resting = place_limit(book, limit(Side.SELL, 100.0, 1.0))
    advance(resting, [trade(1, 99.0, 5.0)])
    assert resting.fills == []
    assert resting.remaining == 1.0


def test_advance_queue_consumption():
    book = book_from_levels([(98.0, 1.0)], [(100.0, 1.0)])
    resting = place_limit(book, limit(Side.SELL, 100.0, 1.0))
    assert resting.queue_ahead == 1.0
    advance(resting, [trade(1, 100.0, 1.5)])
    assert [(f.price, f.quantity) for f in resting.fills] == [(100.0, 0.5)]
    assert resting.remaining == 0.5
    assert resting.queue_ahead == 0.0


def test_advance_fills_at_resting_price_not_print_price():
    book = book_from_levels([(98.0, 1.0)], [])
    resting = place_limit(book, limit(Side.SELL, 100.0, 1.0))
    advance(resting, [trade(1, 103.0, 1.0)])  # print above our ask still crosses
    assert [(f.price, f.quantity) for f in resting.fills] == [(100.0, 1.0)]


def test_advance_buy_side_crossing_rule():
    book = book_from_levels([], [(102.0, 1.0)])
    resting = place_limit(book, limit(Side.BUY, 100.0, 1.0))
    advance(resting, [trade(1, 101.0, 5.0)])  # above limit: no cross for a buy
    assert resting.fills == []
    advance(resting, [trade(2, 99.5, 0.25)])
    assert [(f.price, f.quantity) for f in resting.fills] == [(100.0, 0.25)]


# -- cancel --------------------------------------------------------------------

def test_cancel_without_fills():
    book = book_from_levels([], [(101.0, 1.0)])
    resting = cancel(place_limit(book, limit(Side.BUY, 100.0, 1.0)))
    assert resting.cancelled and resting.remaining == 1.0 and resting.done


def test_cancel_preserves_partial_fills():
    book = book_from_levels([(98.0, 1.0)], [])
    resting = place_limit(book, limit(Side.SELL, 100.0, 1.0))
    advance(resting, [trade(1, 100.0, 0.3)])
    cancel(resting)
    assert [(f.price, f.quantity) for f in resting.fills] == [(100.0, 0.3)]
    assert resting.remaining == pytest.approx(0.7)


def test_advance_after_cancel_is_noop():
    book = book_from_levels([(98.0, 1.0)], [])
    resting = cancel(place_limit(book, limit(Side.SELL, 100.0, 1.0)))
    advance(resting, [trade(1, 100.0, 5.0)])
    assert resting.fills == [] and resting.remaining == 1.0


# -- invariants ----------------------------------------------------------------

def random_case(rng):
    bids = [(float(100 - i), round(float(rng.random() * 3 + 0.1), 3)) for i in range(rng.integers(0, 8))]
    asks = [(float(101 + i), round(float(rng.random() * 3 + 0.1), 3)) for i in range(rng.integers(0, 8))]
    book = book_from_levels(bids, asks)
    side = Side.BUY if rng.random() < 0.5 else Side.SELL
    qty = round(float(rng.random() * 4 + 0.01), 3)
    price = float(rng.integers(95, 107))
    events = [trade(i, float(rng.integers(95, 107)), round(float(rng.random() * 2 + 0.01), 3),
                    Side.BUY if rng.random() < 0.5 else Side.SELL)
              for i in range(int(rng.integers(0, 30)))]
    return book, side, qty, price, events


def test_limit_lifecycle_conservation_fuzz():
    rng = np.random.default_rng(99)
    for _ in range(300):
        book, side, qty, price, events = random_case(rng)
        resting = advance(place_limit(book, limit(side, price, qty)), events)
        assert resting.filled_quantity + resting.remaining == pytest.approx(qty, rel=1e-9)
        for f in resting.fills:
            if side is Side.BUY:
                assert f.price <= price + 1e-9
            else:
                assert f.price >= price - 1e-9


def test_market_vwap_never_better_than_top_of_book():
    rng = np.random.default_rng(17)
    for _ in range(200):
        book, side, qty, _, _ = random_case(rng)
        levels = book.asks if side is Side.BUY else book.bids
        if not levels:
            continue
        best = min(levels) if side is Side.BUY else max(levels)
        try:
            fills = place_market(book.copy(), side, qty)
        except InsufficientDepth as exc:
            fills = exc.fills
        if not fills:
            continue
        w = vwap(fills)
        if side is Side.BUY:
            assert w >= best / 100 - 1e-9
        else:
            assert w <= best / 100 + 1e-9


def test_determinism_identical_inputs_identical_fills():
    def run():
        rng = np.random.default_rng(5)
        book, side, qty, price, events = random_case(rng)
        return advance(place_limit(book, limit(side, price, qty)), events)

    a, b = run(), run()
    assert a.fills == b.fills and a.remaining == b.remaining
