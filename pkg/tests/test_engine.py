import itertools
import json

import numpy as np
import pytest

from ideamarket.engine import Engine, PAYOFF_UNITS
from ideamarket.errors import (
    DuplicateId,
    InsufficientCash,
    InsufficientHoldings,
    InvalidOrder,
    ReplayError,
    UnknownTrader,
    UnknownVenue,
    VenueSettled,
)
from ideamarket.ledger import TradeEvent, to_units
from ideamarket.venue import Design, GroundTruth, IdeaContract, Order, Side


def make_engine(n_ideas=4, design="multi", b=548.0, traders=("t1", "t2"), log_path=None):
    ticker = itertools.count(1)
    engine = Engine(log_path=log_path, clock=lambda: float(next(ticker)))
    ideas = [IdeaContract(f"i{j:02d}") for j in range(1, n_ideas + 1)]
    engine.open_venue("v", design, ideas, b=b)
    for trader in traders:
        engine.create_account(trader)
    return engine


def brute_force_payouts(holdings_by_trader, top_set, payoff=100.0):
    """Independent settlement rule: every share of a correct contract pays
    the fixed payoff.  Top/idea sides are correct inside the top set, flop
    outside it."""
    payouts = {}
    for trader, holdings in holdings_by_trader.items():
        total = 0.0
        for (idea_id, side), qty in holdings.items():
            in_top = idea_id in top_set
            if side == "flop":
                correct = not in_top
            else:
                correct = in_top
            if correct:
                total += qty * payoff
        payouts[trader] = total
    return payouts


def test_execute_updates_cash_and_holdings():
    engine = make_engine()
    fill = engine.execute("v", Order("t1", "i01", "top", "buy", 10))
    account = engine.book["t1"]
    assert account.holding("i01", "top") == 10
    assert account.cash == pytest.approx(5000.0 - fill.cash_delta)
    assert fill.event.seq == engine.seq
    assert fill.new_cash == account.cash
    sell = engine.execute("v", Order("t1", "i01", "top", "sell", 10))
    assert sell.cash_delta < 0
    assert account.holding("i01", "top") == 0


def test_cash_delta_is_rounded_once():
    engine = make_engine()
    quote = engine.quote("v", "i01", "top", "buy", 10)
    fill = engine.execute("v", Order("t1", "i01", "top", "buy", 10))
    assert fill.cash_delta == to_units(quote.cash_delta) / 10_000
    assert round(fill.cash_delta, 4) == fill.cash_delta


def test_insufficient_cash():
    engine = make_engine()
    with pytest.raises(InsufficientCash) as err:
        engine.execute("v", Order("t1", "i01", "top", "buy", 100_000))
    assert err.value.details["available"] == 5000.0
    assert err.value.details["required"] > 5000.0
    assert engine.book["t1"].cash == 5000.0  # rejected orders change nothing
    assert engine.book["t1"].holding("i01", "top") == 0


def test_insufficient_holdings():
    engine = make_engine()
    engine.execute("v", Order("t1", "i01", "top", "buy", 5))
    with pytest.raises(InsufficientHoldings):
        engine.execute("v", Order("t1", "i01", "top", "sell", 6))
    with pytest.raises(InsufficientHoldings):
        engine.execute("v", Order("t2", "i01", "top", "sell", 1))


def test_unknown_venue_and_trader():
    engine = make_engine()
    with pytest.raises(UnknownVenue):
        engine.execute("nope", Order("t1", "i01", "top", "buy", 1))
    with pytest.raises(UnknownTrader):
        engine.execute("v", Order("ghost", "i01", "top", "buy", 1))


def test_idea_ids_unique_across_venues():
    engine = make_engine()
    with pytest.raises(DuplicateId):
        engine.open_venue("v2", "multi", [IdeaContract("i01"), IdeaContract("x")], b=100.0)
    engine.open_venue("v2", "multi", [IdeaContract("y"), IdeaContract("x")], b=100.0)
    with pytest.raises(DuplicateId):
        engine.open_venue("v2", "multi", [IdeaContract("z"), IdeaContract("w")], b=100.0)


def test_cash_conservation_exact():
    # trader cash + market maker take equals the initial endowments, exactly,
    # through an arbitrary trade storm and settlement
    rng = np.random.default_rng(5)
    engine = make_engine(n_ideas=5, traders=("t1", "t2", "t3"))
    sides = [Side.TOP.value, Side.FLOP.value]
    for _ in range(400):
        trader = f"t{int(rng.integers(1, 4))}"
        idea = f"i{int(rng.integers(1, 6)):02d}"
        side = sides[int(rng.integers(2))]
        account = engine.book[trader]
        if rng.integers(2) == 0 and account.holding(idea, side) > 0:
            qty = int(rng.integers(1, account.holding(idea, side) + 1))
            direction = "sell"
        else:
            qty = int(rng.integers(1, 20))
            direction = "buy"
        try:
            engine.execute("v", Order(trader, idea, side, direction, qty))
        except InsufficientCash:
            pass
    total_trader_units = engine.book.total_cash_units()
    assert total_trader_units + engine.mm_units["v"] == 3 * to_units(5000.0)
    truth = GroundTruth({f"i{j:02d}": float(j) for j in range(1, 6)}, k=2)
    engine.settle("v", truth, 2)
    assert engine.book.total_cash_units() + engine.mm_units["v"] == 3 * to_units(5000.0)


def test_settlement_matches_brute_force_exhaustively():
    # every venue size n <= 6, k <= 3, 1..4 traders, both designs, randomized
    # positions: engine payouts must equal the independent rule exactly
    rng = np.random.default_rng(17)
    for design in ("single", "multi"):
        for n in range(2, 7):
            for k in range(1, min(3, n - 1) + 1):
                for n_traders in range(1, 5):
                    traders = tuple(f"t{i}" for i in range(1, n_traders + 1))
                    engine = make_engine(n_ideas=n, design=design, b=100.0, traders=traders)
                    sides = ["idea"] if design == "single" else ["top", "flop"]
                    for _ in range(n_traders * 6):
                        trader = traders[int(rng.integers(n_traders))]
                        idea = f"i{int(rng.integers(1, n + 1)):02d}"
                        side = sides[int(rng.integers(len(sides)))]
                        engine.execute("v", Order(trader, idea, side, "buy", int(rng.integers(1, 8))))
                    holdings = {
                        t: dict(engine.book[t].holdings) for t in traders
                    }
                    scores = {f"i{j:02d}": float(rng.permutation(n)[j - 1]) for j in range(1, n + 1)}
                    truth = GroundTruth(scores, k)
                    expected = brute_force_payouts(holdings, truth.top_set(k))
                    got = engine.settle("v", truth, k)
                    assert got == expected, (design, n, k, n_traders)


def test_settle_only_once():
    engine = make_engine(n_ideas=3)
    truth = GroundTruth({"i01": 3.0, "i02": 2.0, "i03": 1.0}, k=1)
    engine.settle("v", truth, 1)
    with pytest.raises(VenueSettled):
        engine.settle("v", truth, 1)
    with pytest.raises(VenueSettled):
        engine.execute("v", Order("t1", "i01", "top", "buy", 1))


def test_settle_requires_matching_truth():
    engine = make_engine(n_ideas=3)
    with pytest.raises(InvalidOrder):
        engine.settle("v", GroundTruth({"a": 1.0, "b": 2.0}, k=1), 1)


def test_settlement_pays_flops_outside_top():
    engine = make_engine(n_ideas=4)
    engine.execute("v", Order("t1", "i01", "top", "buy", 3))
    engine.execute("v", Order("t1", "i04", "flop", "buy", 2))
    engine.execute("v", Order("t2", "i04", "top", "buy", 7))
    truth = GroundTruth({"i01": 4.0, "i02": 3.0, "i03": 2.0, "i04": 1.0}, k=2)
    payouts = engine.settle("v", truth, 2)
    assert payouts["t1"] == 3 * 100.0 + 2 * 100.0  # top in, flop out: both pay
    assert payouts["t2"] == 0.0
    assert PAYOFF_UNITS == 1_000_000


def test_seq_is_gapless_and_ordered():
    engine = make_engine()
    engine.execute("v", Order("t1", "i01", "top", "buy", 1))
    engine.execute("v", Order("t2", "i02", "flop", "buy", 2))
    seqs = [e.seq for e in engine.log.events()]
    assert seqs == list(range(1, len(seqs) + 1))


def test_replay_reproduces_snapshot(tmp_path):
    path = tmp_path / "events.jsonl"
    engine = make_engine(n_ideas=4, traders=("t1", "t2"), log_path=str(path))
    rng = np.random.default_rng(3)
    for _ in range(60):
        trader = f"t{int(rng.integers(1, 3))}"
        idea = f"i{int(rng.integers(1, 5)):02d}"
        side = ["top", "flop"][int(rng.integers(2))]
        engine.execute("v", Order(trader, idea, side, "buy", int(rng.integers(1, 10))))
    truth = GroundTruth({f"i{j:02d}": float(j) for j in range(1, 5)}, k=2)
    engine.settle("v", truth, 2)
    engine.log.close()
    replayed = Engine.replay(str(path))
    assert replayed.snapshot() == engine.snapshot()


def test_replay_aborts_on_gap(tmp_path):
    path = tmp_path / "events.jsonl"
    engine = make_engine(log_path=str(path))
    for j in range(3):
        engine.execute("v", Order("t1", "i01", "top", "buy", 1))
    engine.log.close()
    lines = path.read_text().strip().split("\n")
    removed = [l for l in lines if json.loads(l)["seq"] != 3]
    path.write_text("\n".join(removed) + "\n")
    with pytest.raises(ReplayError, match="expected seq 3, found 4"):
        Engine.replay(str(path))


def test_replay_aborts_on_tampered_amount(tmp_path):
    path = tmp_path / "events.jsonl"
    engine = make_engine(log_path=str(path))
    engine.execute("v", Order("t1", "i01", "top", "buy", 10))
    engine.log.close()
    lines = path.read_text().strip().split("\n")
    row = json.loads(lines[-1])
    row["cash_delta"] = row["cash_delta"] + 1.0
    lines[-1] = json.dumps(row)
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(ReplayError, match="diverged"):
        Engine.replay(str(path))


def test_snapshot_is_json_safe():
    engine = make_engine()
    engine.execute("v", Order("t1", "i01", "top", "buy", 5))
    snap = engine.snapshot()
    assert json.loads(json.dumps(snap)) == snap


def test_event_listeners_observe_commits():
    engine = make_engine()
    seen = []
    engine.subscribe(seen.append)
    engine.execute("v", Order("t1", "i01", "top", "buy", 1))
    assert len(seen) == 1 and isinstance(seen[0], TradeEvent)
    engine.unsubscribe(seen.append)  # different object: must not blow up
