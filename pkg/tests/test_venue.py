import csv
import math

import pytest

from ideamarket.errors import DuplicateId, InvalidOrder, UnknownContract, VenueSettled
from ideamarket.venue import (
    CONTRACT_PAYOFF,
    DEFAULT_ENDOWMENT,
    ELASTICITY_PRESETS,
    Design,
    GroundTruth,
    IdeaContract,
    Order,
    Side,
    Stratum,
    Venue,
    generate_ideas,
    load_ideas_csv,
    rank_by_score,
    resolve_liquidity,
    write_ideas_csv,
)

# 50-digit reference values for quoting against a fresh b=548 binary market
QUOTE_1_TOP_FRESH = 0.500228102158132
QUOTE_10_TOP_FRESH = 5.02280990249724
TOL = 1e-9


def make_ideas(n):
    return [IdeaContract(f"i{j:02d}", title=f"Idea {j}") for j in range(1, n + 1)]


def test_platform_constants():
    assert CONTRACT_PAYOFF == 100.0
    assert DEFAULT_ENDOWMENT == 5000.0


def test_elasticity_presets():
    assert ELASTICITY_PRESETS["high"].b == 219.0
    assert ELASTICITY_PRESETS["high"].assumed_traders == 40
    assert ELASTICITY_PRESETS["moderate"].b == 548.0
    assert ELASTICITY_PRESETS["moderate"].assumed_traders == 60
    assert ELASTICITY_PRESETS["low"].b == 877.0
    assert ELASTICITY_PRESETS["low"].assumed_traders == 80


def test_resolve_liquidity():
    assert resolve_liquidity(elasticity="moderate") == 548.0
    assert resolve_liquidity(b=123.0) == 123.0
    with pytest.raises(InvalidOrder):
        resolve_liquidity()
    with pytest.raises(InvalidOrder):
        resolve_liquidity(elasticity="moderate", b=5.0)
    with pytest.raises(InvalidOrder):
        resolve_liquidity(elasticity="extreme")
    with pytest.raises(InvalidOrder):
        resolve_liquidity(b=-1.0)


def test_multi_quote_matches_reference():
    v = Venue("v", Design.MULTI, make_ideas(24), 548.0)
    q1 = v.quote("i01", Side.TOP, "buy", 1)
    assert abs(q1.cash_delta - QUOTE_1_TOP_FRESH) < TOL
    q10 = v.quote("i01", Side.TOP, "buy", 10)
    assert abs(q10.cash_delta - QUOTE_10_TOP_FRESH) < TOL


def test_multi_trade_is_local():
    v = Venue("v", Design.MULTI, make_ideas(24), 548.0)
    q = v.quote("i05", Side.TOP, "buy", 10)
    assert {(i, s) for i, s, _ in q.prices_after} == {("i05", "top"), ("i05", "flop")}
    before = dict(((i, s), p) for i, s, p in v.prices())
    v._commit(v._preview("i05", Side.TOP, "buy", 10))
    after = dict(((i, s), p) for i, s, p in v.prices())
    for key in before:
        if key[0] == "i05":
            assert before[key] != after[key]
        else:
            assert before[key] == after[key]


def test_single_trade_moves_every_price():
    v = Venue("v", Design.SINGLE, make_ideas(24), 548.0)
    q = v.quote("i05", Side.IDEA, "buy", 10)
    assert len(q.prices_after) == 24
    before = {i: p for i, _, p in v.prices()}
    v._commit(v._preview("i05", Side.IDEA, "buy", 10))
    after = {i: p for i, _, p in v.prices()}
    assert after["i05"] > before["i05"]
    for idea_id in before:
        if idea_id != "i05":
            assert after[idea_id] < before[idea_id]
    assert abs(math.fsum(after.values()) - 1.0) < TOL


def test_single_prices_and_pair_sums():
    v = Venue("v", Design.MULTI, make_ideas(6), 100.0)
    v._commit(v._preview("i02", Side.FLOP, "buy", 30))
    for idea_id in v.idea_ids:
        top = v.price(idea_id, Side.TOP)
        flop = v.price(idea_id, Side.FLOP)
        assert abs(top + flop - 1.0) < TOL


def test_sell_quote_is_negative():
    v = Venue("v", Design.MULTI, make_ideas(3), 100.0)
    v._commit(v._preview("i01", Side.TOP, "buy", 10))
    q = v.quote("i01", Side.TOP, "sell", 5)
    assert q.cash_delta < 0


def test_unknown_contract_errors():
    single = Venue("s", Design.SINGLE, make_ideas(3), 100.0)
    multi = Venue("m", Design.MULTI, make_ideas(3), 100.0)
    with pytest.raises(UnknownContract):
        single.quote("i01", Side.TOP, "buy", 1)  # wrong side for the design
    with pytest.raises(UnknownContract):
        multi.quote("i01", Side.IDEA, "buy", 1)
    with pytest.raises(UnknownContract):
        multi.quote("nope", Side.TOP, "buy", 1)


def test_quantity_validation():
    v = Venue("v", Design.MULTI, make_ideas(3), 100.0)
    with pytest.raises(InvalidOrder):
        v.quote("i01", Side.TOP, "buy", 0)
    with pytest.raises(InvalidOrder):
        v.quote("i01", Side.TOP, "buy", -3)
    with pytest.raises(InvalidOrder):
        v.quote("i01", Side.TOP, "buy", 1.5)
    with pytest.raises(InvalidOrder):
        Order("t", "i01", "top", "buy", 0)


def test_settled_venue_rejects_quotes():
    v = Venue("v", Design.MULTI, make_ideas(3), 100.0)
    v.settled = True
    with pytest.raises(VenueSettled):
        v.quote("i01", Side.TOP, "buy", 1)


def test_venue_construction_validation():
    with pytest.raises(InvalidOrder):
        Venue("v", Design.MULTI, make_ideas(1), 100.0)
    with pytest.raises(DuplicateId):
        Venue("v", Design.MULTI, [IdeaContract("a"), IdeaContract("a")], 100.0)
    with pytest.raises(InvalidOrder):
        Venue("v", Design.MULTI, make_ideas(3), 0.0)


def test_rank_by_score_tie_rule():
    ranking = rank_by_score({"b": 3.0, "a": 3.0, "c": 5.0, "d": 1.0})
    assert ranking == {"c": 1, "a": 2, "b": 3, "d": 4}


def test_ground_truth_top_set():
    scores = {f"i{j}": float(j) for j in range(1, 7)}
    truth = GroundTruth(scores, k=3)
    assert truth.top_k == {"i6", "i5", "i4"}
    assert truth.ranking["i6"] == 1
    assert truth.top_set(1) == {"i6"}
    with pytest.raises(ValueError):
        truth.top_set(0)
    with pytest.raises(ValueError):
        GroundTruth(scores, k=7)


def test_final_ranking_follows_prices():
    v = Venue("v", Design.MULTI, make_ideas(4), 100.0)
    v._commit(v._preview("i03", Side.TOP, "buy", 50))
    v._commit(v._preview("i01", Side.TOP, "buy", 20))
    ranking = v.final_ranking()
    assert ranking["i03"] == 1
    assert ranking["i01"] == 2
    # untouched ideas tie at 0.5 and break by id
    assert ranking["i02"] == 3
    assert ranking["i04"] == 4


def test_affordable_quantity_respects_budget():
    v = Venue("v", Design.MULTI, make_ideas(3), 548.0)
    qty = v.affordable_quantity("i01", Side.TOP, 100.0)
    assert qty >= 1
    assert v.quote("i01", Side.TOP, "buy", qty).cash_delta <= 100.0
    assert v.quote("i01", Side.TOP, "buy", qty + 1).cash_delta > 100.0
    assert v.affordable_quantity("i01", Side.TOP, 0.0) == 0


def test_generate_ideas_strata():
    ideas, scores = generate_ideas(24, 0)
    assert len(ideas) == 24
    by_stratum = {}
    for idea in ideas:
        by_stratum.setdefault(idea.stratum, []).append(scores[idea.idea_id])
    assert {len(v) for v in by_stratum.values()} == {8}
    assert min(by_stratum[Stratum.HIGH]) > max(by_stratum[Stratum.MEDIUM])
    assert min(by_stratum[Stratum.MEDIUM]) > max(by_stratum[Stratum.LOW])
    assert all(1.0 <= s <= 5.0 for s in scores.values())


def test_ideas_csv_round_trip(tmp_path):
    ideas, scores = generate_ideas(9, 3)
    path = tmp_path / "ideas.csv"
    write_ideas_csv(path, ideas, scores)
    loaded, loaded_scores = load_ideas_csv(path)
    assert [i.idea_id for i in loaded] == [i.idea_id for i in ideas]
    assert loaded_scores == scores
    assert [i.stratum for i in loaded] == [i.stratum for i in ideas]


def test_ideas_csv_validation(tmp_path):
    path = tmp_path / "bad.csv"

    def write_rows(rows, header="idea_id,title,description,quality_mean,stratum"):
        with open(path, "w", newline="") as fh:
            fh.write(header + "\n")
            w = csv.writer(fh)
            for row in rows:
                w.writerow(row)

    write_rows([["a", "t", "d", "9.0", "high"], ["b", "t", "d", "3.0", "low"]])
    with pytest.raises(ValueError, match="quality_mean"):
        load_ideas_csv(path)

    write_rows([["a", "t", "d", "3.0", "mythic"], ["b", "t", "d", "3.0", "low"]])
    with pytest.raises(ValueError, match="stratum"):
        load_ideas_csv(path)

    write_rows([["a", "t", "d", "3.0", "high"], ["a", "t", "d", "3.0", "low"]])
    with pytest.raises(ValueError, match="duplicate"):
        load_ideas_csv(path)

    write_rows([["a", "t", "d", "3.0", "high"]])
    with pytest.raises(ValueError, match="at least two"):
        load_ideas_csv(path)

    write_rows([], header="idea,name")
    with pytest.raises(ValueError, match="columns"):
        load_ideas_csv(path)
