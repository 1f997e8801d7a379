"""Execution engine: one event log, one account book, any number of venues.

All mutating entry points run under a single lock, so a trade's quote,
commit, ledger update and log append are one atomic step (writes are
linearizable).  Every state change is emitted as an event with a gapless
``seq``; replaying the log through a fresh engine re-executes each trade
and fails loudly if anything disagrees with what was recorded.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass
from typing import Callable, Iterable

from .errors import (
    DuplicateId,
    InsufficientCash,
    InsufficientHoldings,
    InvalidOrder,
    ReplayError,
    UnknownTrader,
    UnknownVenue,
    VenueSettled,
)
from .ledger import (
    AccountBook,
    Account,
    AccountOpened,
    Event,
    EventLog,
    SettlementEvent,
    TradeEvent,
    VenueOpened,
    from_units,
    read_events,
    to_units,
)
from .venue import (
    CONTRACT_PAYOFF,
    DEFAULT_ENDOWMENT,
    DEFAULT_TOP_K,
    Design,
    Direction,
    GroundTruth,
    IdeaContract,
    Order,
    Quote,
    Side,
    Venue,
    resolve_liquidity,
)

PAYOFF_UNITS = to_units(CONTRACT_PAYOFF)


@dataclass(frozen=True)
class Fill:
    """Result of an executed order: the logged event plus trader-facing fields."""

    event: TradeEvent
    cash_delta: float
    new_cash: float
    prices_after: tuple[tuple[str, str, float], ...]


class Engine:
    def __init__(self, log_path=None, clock: Callable[[], float] = time.time):
        self._lock = threading.RLock()
        self._clock = clock
        self._seq = 0
        self.log = EventLog(log_path)
        self.book = AccountBook()
        self.venues: dict[str, Venue] = {}
        self.mm_units: dict[str, int] = {}
        self._claimed_ideas: dict[str, str] = {}
        self._listeners: list[Callable[[Event], None]] = []

    # -- plumbing ---------------------------------------------------------

    @property
    def seq(self) -> int:
        return self._seq

    def subscribe(self, listener: Callable[[Event], None]) -> None:
        with self._lock:
            self._listeners.append(listener)

    def unsubscribe(self, listener: Callable[[Event], None]) -> None:
        with self._lock:
            if listener in self._listeners:
                self._listeners.remove(listener)

    def _emit(self, event: Event) -> None:
        self.log.append(event)
        for listener in list(self._listeners):
            listener(event)

    def _ts(self, ts: float | None) -> float:
        return float(ts) if ts is not None else float(self._clock())

    def _venue(self, venue_id: str) -> Venue:
        venue = self.venues.get(venue_id)
        if venue is None:
            raise UnknownVenue(f"unknown venue {venue_id!r}", venue_id=venue_id)
        return venue

    # -- lifecycle --------------------------------------------------------

    def open_venue(
        self,
        venue_id: str,
        design: Design | str,
        ideas: Iterable[IdeaContract],
        b: float | None = None,
        elasticity: str | None = None,
        *,
        ts: float | None = None,
    ) -> Venue:
        liquidity = resolve_liquidity(elasticity=elasticity, b=b)
        with self._lock:
            if venue_id in self.venues:
                raise DuplicateId(f"venue {venue_id!r} already exists", venue_id=venue_id)
            ideas = tuple(ideas)
            for idea in ideas:
                owner = self._claimed_ideas.get(idea.idea_id)
                if owner is not None:
                    raise DuplicateId(
                        f"idea {idea.idea_id!r} already listed on venue {owner!r}",
                        idea_id=idea.idea_id,
                    )
            venue = Venue(venue_id, design, ideas, liquidity)
            self.venues[venue_id] = venue
            self.mm_units[venue_id] = 0
            for idea in ideas:
                self._claimed_ideas[idea.idea_id] = venue_id
            self._seq += 1
            event = VenueOpened(
                seq=self._seq,
                ts=self._ts(ts),
                venue_id=venue_id,
                design=venue.design.value,
                b=venue.b,
                ideas=tuple(
                    {
                        "idea_id": i.idea_id,
                        "title": i.title,
                        "description": i.description,
                        "stratum": i.stratum.value,
                    }
                    for i in ideas
                ),
            )
            self._emit(event)
            return venue

    def create_account(
        self,
        trader_id: str,
        endowment: float = DEFAULT_ENDOWMENT,
        *,
        ts: float | None = None,
    ) -> Account:
        with self._lock:
            account = self.book.open(trader_id, endowment)
            self._seq += 1
            self._emit(
                AccountOpened(
                    seq=self._seq, ts=self._ts(ts),
                    trader_id=trader_id, endowment=float(endowment),
                )
            )
            return account

    # -- trading ----------------------------------------------------------

    def quote(self, venue_id: str, idea_id: str, side, direction, quantity: int) -> Quote:
        with self._lock:
            return self._venue(venue_id).quote(idea_id, side, direction, quantity)

    def execute(self, venue_id: str, order: Order, *, ts: float | None = None) -> Fill:
        with self._lock:
            venue = self._venue(venue_id)
            if order.trader_id not in self.book:
                raise UnknownTrader(
                    f"trader {order.trader_id!r} is not registered", trader_id=order.trader_id
                )
            account = self.book[order.trader_id]
            preview = venue._preview(order.idea_id, order.side, order.direction, order.quantity)
            delta_units = to_units(preview.cash_delta)
            if order.direction is Direction.BUY:
                if delta_units > account.cash_units:
                    raise InsufficientCash(
                        "order cost exceeds available cash",
                        required=from_units(delta_units),
                        available=account.cash,
                    )
            else:
                held = account.holding(order.idea_id, order.side)
                if held < order.quantity:
                    raise InsufficientHoldings(
                        "cannot sell more shares than held",
                        held=held,
                        requested=order.quantity,
                    )
            venue._commit(preview)
            account.cash_units -= delta_units
            qty_delta = order.quantity if order.direction is Direction.BUY else -order.quantity
            account.adjust_holding(order.idea_id, order.side, qty_delta)
            account.transaction_count += 1
            self.mm_units[venue_id] += delta_units
            self._seq += 1
            event = TradeEvent(
                seq=self._seq,
                ts=self._ts(ts),
                venue_id=venue_id,
                trader_id=order.trader_id,
                idea_id=order.idea_id,
                side=order.side.value,
                direction=order.direction.value,
                qty=order.quantity,
                cash_delta=from_units(delta_units),
                prices_after=preview.prices_after,
            )
            self._emit(event)
            return Fill(
                event=event,
                cash_delta=event.cash_delta,
                new_cash=account.cash,
                prices_after=event.prices_after,
            )

    # -- settlement -------------------------------------------------------

    def settle(
        self,
        venue_id: str,
        truth: GroundTruth,
        k: int = DEFAULT_TOP_K,
        *,
        ts: float | None = None,
    ) -> dict[str, float]:
        with self._lock:
            venue = self._venue(venue_id)
            if set(truth.scores) != set(venue.idea_ids):
                raise InvalidOrder("ground truth does not cover exactly this venue's ideas")
            event = self._settle(venue_id, truth.top_set(k), k, self._ts(ts))
            return dict(event.payouts)

    def _settle(self, venue_id: str, top_set: frozenset[str], k: int, ts: float) -> SettlementEvent:
        venue = self._venue(venue_id)
        if venue.settled:
            raise VenueSettled(f"venue {venue_id!r} is already settled", venue_id=venue_id)
        idea_ids = set(venue.idea_ids)
        payouts: list[tuple[str, float]] = []
        credits: list[tuple[Account, int]] = []
        for trader_id in sorted(self.book.accounts):
            account = self.book[trader_id]
            units = 0
            for (idea_id, side), qty in account.holdings.items():
                if idea_id not in idea_ids:
                    continue
                if side == Side.FLOP.value:
                    wins = idea_id not in top_set
                else:
                    wins = idea_id in top_set
                if wins:
                    units += qty * PAYOFF_UNITS
            credits.append((account, units))
            payouts.append((trader_id, from_units(units)))
        for account, units in credits:
            account.cash_units += units
            self.mm_units[venue_id] -= units
        venue.settled = True
        self._seq += 1
        event = SettlementEvent(
            seq=self._seq,
            ts=ts,
            venue_id=venue_id,
            k=k,
            top_k=tuple(sorted(top_set)),
            payouts=tuple(payouts),
        )
        self._emit(event)
        return event

    # -- introspection ----------------------------------------------------

    def snapshot(self) -> dict:
        """Full platform state as plain JSON-safe data, deterministically ordered."""
        with self._lock:
            venues = {}
            for venue_id in sorted(self.venues):
                venue = self.venues[venue_id]
                venues[venue_id] = {
                    "design": venue.design.value,
                    "b": venue.b,
                    "settled": venue.settled,
                    "ideas": list(venue.idea_ids),
                    "prices": [[i, s, p] for i, s, p in venue.prices()],
                }
            accounts = {}
            for trader_id in sorted(self.book.accounts):
                account = self.book[trader_id]
                accounts[trader_id] = {
                    "cash": account.cash,
                    "holdings": [
                        [idea_id, side, qty]
                        for (idea_id, side), qty in sorted(account.holdings.items())
                    ],
                    "transaction_count": account.transaction_count,
                }
            return {
                "seq": self._seq,
                "venues": venues,
                "accounts": accounts,
                "market_maker_cash": {
                    vid: from_units(self.mm_units[vid]) for vid in sorted(self.mm_units)
                },
            }

    # -- replay -----------------------------------------------------------

    @classmethod
    def replay(cls, source) -> "Engine":
        """Rebuild an engine from a log file path or an event iterable.

        Trades and settlements are re-executed, not copied: the recomputed
        event must equal the recorded one field for field, otherwise the
        log is corrupt and replay aborts at that seq.
        """
        if isinstance(source, (str, bytes)) or hasattr(source, "__fspath__"):
            events: Iterable[Event] = read_events(source)
        else:
            events = source
        engine = cls()
        expected = 1
        for recorded in events:
            if recorded.seq != expected:
                raise ReplayError(
                    f"gap in event log: expected seq {expected}, found {recorded.seq}",
                    seq=recorded.seq,
                )
            expected += 1
            if isinstance(recorded, VenueOpened):
                ideas = [
                    IdeaContract(
                        idea_id=row["idea_id"],
                        title=row.get("title", ""),
                        description=row.get("description", ""),
                        stratum=row.get("stratum", "medium"),
                    )
                    for row in recorded.ideas
                ]
                engine.open_venue(
                    recorded.venue_id, recorded.design, ideas, b=recorded.b, ts=recorded.ts
                )
                produced = engine.log.events()[-1]
            elif isinstance(recorded, AccountOpened):
                engine.create_account(recorded.trader_id, recorded.endowment, ts=recorded.ts)
                produced = engine.log.events()[-1]
            elif isinstance(recorded, TradeEvent):
                order = Order(
                    trader_id=recorded.trader_id,
                    idea_id=recorded.idea_id,
                    side=recorded.side,
                    direction=recorded.direction,
                    quantity=recorded.qty,
                )
                produced = engine.execute(recorded.venue_id, order, ts=recorded.ts).event
            elif isinstance(recorded, SettlementEvent):
                with engine._lock:
                    produced = engine._settle(
                        recorded.venue_id, frozenset(recorded.top_k), recorded.k, recorded.ts
                    )
            else:  # pragma: no cover - event_from_dict already rejects these
                raise ReplayError(f"unknown event type at seq {recorded.seq}")
            if produced != recorded:
                raise ReplayError(
                    f"replay diverged at seq {recorded.seq}: recomputed event "
                    f"does not match the log",
                    seq=recorded.seq,
                )
        return engine
