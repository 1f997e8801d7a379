"""Market venues: contract tables over a pool of ideas.

A venue prices contracts on ideas under one of two designs:

* ``single``: one scoring-rule market whose outcomes are the ideas
  themselves.  Every trade moves every price; the vector sums to 1.
* ``multi``: one independent binary market per idea with a ``top`` side
  (pays if the idea finishes in the jury's top k) and a ``flop`` side
  (pays if it does not).  Trades only move the traded pair.

Venues quote and commit; cash and holdings belong to the ledger.
"""

from __future__ import annotations

import csv
import random
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping

from . import lmsr
from .errors import DuplicateId, InvalidOrder, UnknownContract, VenueSettled

CONTRACT_PAYOFF = 100.0
DEFAULT_ENDOWMENT = 5000.0
DEFAULT_TOP_K = 5


class Design(str, Enum):
    SINGLE = "single"
    MULTI = "multi"


class Side(str, Enum):
    IDEA = "idea"   # single design: the idea outcome itself
    TOP = "top"     # multi design: pays if idea ranks in the top k
    FLOP = "flop"   # multi design: pays if it does not


class Direction(str, Enum):
    BUY = "buy"
    SELL = "sell"


class Stratum(str, Enum):
    HIGH = "high"
    MEDIUM = "medium"
    LOW = "low"


def _as_side(value: "Side | str") -> Side:
    try:
        return Side(value)
    except ValueError:
        allowed = ", ".join(s.value for s in Side)
        raise InvalidOrder(f"side must be one of {allowed}, got {value!r}") from None


def _as_direction(value: "Direction | str") -> Direction:
    try:
        return Direction(value)
    except ValueError:
        raise InvalidOrder(f"direction must be buy or sell, got {value!r}") from None


@dataclass(frozen=True)
class IdeaContract:
    idea_id: str
    title: str = ""
    description: str = ""
    stratum: Stratum = Stratum.MEDIUM

    def __post_init__(self):
        if not self.idea_id:
            raise ValueError("idea_id must be nonempty")
        object.__setattr__(self, "stratum", Stratum(self.stratum))


@dataclass(frozen=True)
class ElasticityPreset:
    """Liquidity calibrated so prices stay responsive for an expected crowd size."""

    name: str
    b: float
    assumed_traders: int


ELASTICITY_PRESETS: dict[str, ElasticityPreset] = {
    "high": ElasticityPreset("high", 219.0, 40),
    "moderate": ElasticityPreset("moderate", 548.0, 60),
    "low": ElasticityPreset("low", 877.0, 80),
}


def resolve_liquidity(elasticity: str | None = None, b: float | None = None) -> float:
    """One of ``elasticity`` (preset name) or ``b`` (explicit) must be given."""
    if (elasticity is None) == (b is None):
        raise InvalidOrder("give exactly one of elasticity preset or explicit b")
    if b is not None:
        if b <= 0:
            raise InvalidOrder(f"liquidity must be positive, got {b}")
        return float(b)
    preset = ELASTICITY_PRESETS.get(elasticity)
    if preset is None:
        raise InvalidOrder(
            f"unknown elasticity preset {elasticity!r}",
            known=sorted(ELASTICITY_PRESETS),
        )
    return preset.b


@dataclass(frozen=True)
class Order:
    trader_id: str
    idea_id: str
    side: Side
    direction: Direction
    quantity: int

    def __post_init__(self):
        object.__setattr__(self, "side", _as_side(self.side))
        object.__setattr__(self, "direction", _as_direction(self.direction))
        if not isinstance(self.quantity, int) or isinstance(self.quantity, bool):
            raise InvalidOrder(f"quantity must be an integer, got {self.quantity!r}")
        if self.quantity < 1:
            raise InvalidOrder(f"quantity must be at least 1, got {self.quantity}")


@dataclass(frozen=True)
class Quote:
    """Cash delta the trader would pay (negative: receive) and the prices
    the venue would show after the fill, limited to contracts that move."""

    cash_delta: float
    prices_after: tuple[tuple[str, str, float], ...]


@dataclass(frozen=True)
class _Preview(Quote):
    market_key: str = ""
    new_state: lmsr.LmsrState | None = None


def rank_by_score(values: Mapping[str, float]) -> dict[str, int]:
    """Placement numbers 1..n, best first; ties broken by id ascending."""
    ordered = sorted(values, key=lambda i: (-values[i], i))
    return {idea_id: place for place, idea_id in enumerate(ordered, start=1)}


class GroundTruth:
    """Jury outcome: quality scores, the induced ranking, and the paid top set."""

    def __init__(self, scores: Mapping[str, float], k: int = DEFAULT_TOP_K):
        if len(scores) < 2:
            raise ValueError("ground truth needs at least two ideas")
        if not 1 <= k <= len(scores):
            raise ValueError(f"k must be in 1..{len(scores)}, got {k}")
        self.scores = dict(scores)
        self.k = k
        self.ranking = rank_by_score(self.scores)
        self.top_k = self.top_set(k)

    def top_set(self, k: int) -> frozenset[str]:
        if not 1 <= k <= len(self.scores):
            raise ValueError(f"k must be in 1..{len(self.scores)}, got {k}")
        return frozenset(i for i, place in self.ranking.items() if place <= k)


class Venue:
    """A contract table plus its scoring-rule state; settles exactly once."""

    def __init__(self, venue_id: str, design: Design | str, ideas: Iterable[IdeaContract], b: float):
        design = Design(design)
        ideas = tuple(ideas)
        if len(ideas) < 2:
            raise InvalidOrder("a venue needs at least two ideas")
        seen = set()
        for idea in ideas:
            if idea.idea_id in seen:
                raise DuplicateId(f"duplicate idea id {idea.idea_id!r}")
            seen.add(idea.idea_id)
        if b <= 0:
            raise InvalidOrder(f"liquidity must be positive, got {b}")

        self.venue_id = venue_id
        self.design = design
        self.ideas = ideas
        self.b = float(b)
        self.settled = False
        self._index = {idea.idea_id: pos for pos, idea in enumerate(ideas)}
        if design is Design.SINGLE:
            self._states: dict[str, lmsr.LmsrState] = {
                "*": lmsr.LmsrState.fresh(len(ideas), self.b)
            }
        else:
            self._states = {
                idea.idea_id: lmsr.LmsrState.fresh(2, self.b) for idea in ideas
            }

    @property
    def idea_ids(self) -> tuple[str, ...]:
        return tuple(idea.idea_id for idea in self.ideas)

    def contracts(self) -> tuple[tuple[str, Side], ...]:
        if self.design is Design.SINGLE:
            return tuple((i, Side.IDEA) for i in self.idea_ids)
        pairs = []
        for i in self.idea_ids:
            pairs.append((i, Side.TOP))
            pairs.append((i, Side.FLOP))
        return tuple(pairs)

    def _locate(self, idea_id: str, side: Side | str) -> tuple[str, lmsr.LmsrState, int]:
        side = _as_side(side)
        if idea_id not in self._index:
            raise UnknownContract(f"unknown idea {idea_id!r}", idea_id=idea_id)
        if self.design is Design.SINGLE:
            if side is not Side.IDEA:
                raise UnknownContract(
                    f"single-market venue has no {side.value!r} contracts", idea_id=idea_id
                )
            return "*", self._states["*"], self._index[idea_id]
        if side is Side.IDEA:
            raise UnknownContract(
                "multi-market venue trades top/flop contracts", idea_id=idea_id
            )
        return idea_id, self._states[idea_id], 0 if side is Side.TOP else 1

    def price(self, idea_id: str, side: Side | str) -> float:
        _, state, outcome = self._locate(idea_id, side)
        return lmsr.prices(state)[outcome]

    def prices(self) -> tuple[tuple[str, str, float], ...]:
        """Every contract's current price, in contract-table order."""
        rows = []
        if self.design is Design.SINGLE:
            ps = lmsr.prices(self._states["*"])
            for idea_id, pos in ((i, self._index[i]) for i in self.idea_ids):
                rows.append((idea_id, Side.IDEA.value, ps[pos]))
        else:
            for idea_id in self.idea_ids:
                top, flop = lmsr.prices(self._states[idea_id])
                rows.append((idea_id, Side.TOP.value, top))
                rows.append((idea_id, Side.FLOP.value, flop))
        return tuple(rows)

    def _prices_after(self, market_key: str, state: lmsr.LmsrState) -> tuple[tuple[str, str, float], ...]:
        if self.design is Design.SINGLE:
            ps = lmsr.prices(state)
            return tuple(
                (idea_id, Side.IDEA.value, ps[self._index[idea_id]])
                for idea_id in self.idea_ids
            )
        top, flop = lmsr.prices(state)
        return ((market_key, Side.TOP.value, top), (market_key, Side.FLOP.value, flop))

    def _preview(self, idea_id: str, side: Side | str, direction: Direction | str, quantity: int) -> _Preview:
        if self.settled:
            raise VenueSettled(f"venue {self.venue_id!r} is settled", venue_id=self.venue_id)
        direction = _as_direction(direction)
        if not isinstance(quantity, int) or isinstance(quantity, bool):
            raise InvalidOrder(f"quantity must be an integer, got {quantity!r}")
        if quantity < 1:
            raise InvalidOrder(f"quantity must be at least 1, got {quantity}")
        key, state, outcome = self._locate(idea_id, side)
        delta = quantity if direction is Direction.BUY else -quantity
        cash_delta = lmsr.trade_cost(state, outcome, delta)
        new_state = state.with_trade(outcome, delta)
        return _Preview(
            cash_delta=cash_delta,
            prices_after=self._prices_after(key, new_state),
            market_key=key,
            new_state=new_state,
        )

    def quote(self, idea_id: str, side: Side | str, direction: Direction | str, quantity: int) -> Quote:
        p = self._preview(idea_id, side, direction, quantity)
        return Quote(cash_delta=p.cash_delta, prices_after=p.prices_after)

    def _commit(self, preview: _Preview) -> None:
        self._states[preview.market_key] = preview.new_state

    def affordable_quantity(self, idea_id: str, side: Side | str, budget: float) -> int:
        """Most whole shares of a contract the budget buys at current state."""
        _, state, outcome = self._locate(idea_id, side)
        shares = lmsr.affordable_shares(state, outcome, budget)
        if shares == float("inf"):
            return 10**9
        # absorb float error when an exact integer quantity is affordable
        return max(0, int(shares + 1e-9))

    def final_ranking(self) -> dict[str, int]:
        """Placements implied by closing prices (top-side prices under multi)."""
        if self.design is Design.SINGLE:
            ps = lmsr.prices(self._states["*"])
            marks = {i: ps[self._index[i]] for i in self.idea_ids}
        else:
            marks = {i: lmsr.prices(self._states[i])[0] for i in self.idea_ids}
        return rank_by_score(marks)

    def market_state(self, idea_id: str | None = None) -> lmsr.LmsrState:
        if self.design is Design.SINGLE:
            return self._states["*"]
        if idea_id is None:
            raise UnknownContract("multi-market venue needs an idea id")
        if idea_id not in self._states:
            raise UnknownContract(f"unknown idea {idea_id!r}", idea_id=idea_id)
        return self._states[idea_id]


CSV_COLUMNS = ["idea_id", "title", "description", "quality_mean", "stratum"]


def load_ideas_csv(path) -> tuple[list[IdeaContract], dict[str, float]]:
    """Read the idea pool and jury quality scores from one CSV file.

    Columns: idea_id, title, description, quality_mean (1..5), stratum
    (high/medium/low).  Returns the contracts and the score map.
    """
    ideas: list[IdeaContract] = []
    scores: dict[str, float] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [c.strip() for c in reader.fieldnames] != CSV_COLUMNS:
            raise ValueError(
                f"expected columns {','.join(CSV_COLUMNS)}, got {reader.fieldnames}"
            )
        for lineno, row in enumerate(reader, start=2):
            idea_id = row["idea_id"].strip()
            if not idea_id:
                raise ValueError(f"line {lineno}: empty idea_id")
            if idea_id in scores:
                raise ValueError(f"line {lineno}: duplicate idea_id {idea_id!r}")
            try:
                quality = float(row["quality_mean"])
            except ValueError:
                raise ValueError(f"line {lineno}: quality_mean is not a number") from None
            if not 1.0 <= quality <= 5.0:
                raise ValueError(f"line {lineno}: quality_mean must be in [1, 5], got {quality}")
            try:
                stratum = Stratum(row["stratum"].strip().lower())
            except ValueError:
                raise ValueError(f"line {lineno}: unknown stratum {row['stratum']!r}") from None
            ideas.append(
                IdeaContract(
                    idea_id=idea_id,
                    title=row["title"].strip(),
                    description=row["description"].strip(),
                    stratum=stratum,
                )
            )
            scores[idea_id] = quality
    if len(ideas) < 2:
        raise ValueError("idea file needs at least two ideas")
    return ideas, scores


def generate_ideas(n: int = 24, seed: int = 0) -> tuple[list[IdeaContract], dict[str, float]]:
    """Synthetic idea pool stratified into thirds by jury quality."""
    if n < 3:
        raise ValueError("need at least three ideas to cover the three strata")
    rng = random.Random(seed)
    bands = {
        Stratum.HIGH: (3.6, 4.9),
        Stratum.MEDIUM: (2.6, 3.6),
        Stratum.LOW: (1.2, 2.6),
    }
    base, rem = divmod(n, 3)
    counts = {
        Stratum.HIGH: base + (1 if rem >= 1 else 0),
        Stratum.MEDIUM: base + (1 if rem >= 2 else 0),
        Stratum.LOW: base,
    }
    ideas: list[IdeaContract] = []
    scores: dict[str, float] = {}
    serial = 0
    for stratum in (Stratum.HIGH, Stratum.MEDIUM, Stratum.LOW):
        lo, hi = bands[stratum]
        for _ in range(counts[stratum]):
            serial += 1
            idea_id = f"idea-{serial:02d}"
            ideas.append(
                IdeaContract(
                    idea_id=idea_id,
                    title=f"Idea {serial:02d}",
                    description=f"Synthetic {stratum.value}-quality idea {serial:02d}",
                    stratum=stratum,
                )
            )
            scores[idea_id] = round(rng.uniform(lo, hi), 2)
    return ideas, scores


def write_ideas_csv(path, ideas: Iterable[IdeaContract], scores: Mapping[str, float]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for idea in ideas:
            writer.writerow(
                [idea.idea_id, idea.title, idea.description, scores[idea.idea_id], idea.stratum.value]
            )
