"""Accounts and the append-only event log.

Cash is stored as integer ten-thousandths of a currency unit so that sums
over arbitrarily long trading sessions stay exact; each committed trade
rounds its double-precision cost to that grid exactly once (banker's
rounding).  Quotes that are never committed stay raw doubles.

The log is JSON lines, one event per line, written in commit order with a
gapless ``seq``.  Replaying a log through a fresh engine must reproduce
byte-identical state; the event vocabulary therefore includes venue and
account creation and settlement, not just trades.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterator

from .errors import DuplicateId, ReplayError
from .venue import CONTRACT_PAYOFF, DEFAULT_ENDOWMENT

CASH_SCALE = 10_000  # ledger grid: 1e-4 currency units


def to_units(amount: float) -> int:
    """Round a raw currency amount onto the ledger grid (half to even)."""
    return round(amount * CASH_SCALE)


def from_units(units: int) -> float:
    return units / CASH_SCALE


@dataclass
class Account:
    trader_id: str
    cash_units: int
    holdings: dict[tuple[str, str], int] = field(default_factory=dict)
    transaction_count: int = 0

    @property
    def cash(self) -> float:
        return from_units(self.cash_units)

    def holding(self, idea_id: str, side) -> int:
        side = getattr(side, "value", side)
        return self.holdings.get((idea_id, side), 0)

    def adjust_holding(self, idea_id: str, side, delta: int) -> None:
        side = getattr(side, "value", side)
        key = (idea_id, side)
        new = self.holdings.get(key, 0) + delta
        if new < 0:
            raise ValueError(f"holdings for {key} would go negative")
        if new == 0:
            self.holdings.pop(key, None)
        else:
            self.holdings[key] = new


@dataclass(frozen=True)
class VenueOpened:
    seq: int
    ts: float
    venue_id: str
    design: str
    b: float
    ideas: tuple[dict, ...]  # idea_id/title/description/stratum rows

    type = "venue_open"


@dataclass(frozen=True)
class AccountOpened:
    seq: int
    ts: float
    trader_id: str
    endowment: float

    type = "account_open"


@dataclass(frozen=True)
class TradeEvent:
    seq: int
    ts: float
    venue_id: str
    trader_id: str
    idea_id: str
    side: str
    direction: str
    qty: int
    cash_delta: float
    prices_after: tuple[tuple[str, str, float], ...]

    type = "trade"


@dataclass(frozen=True)
class SettlementEvent:
    seq: int
    ts: float
    venue_id: str
    k: int
    top_k: tuple[str, ...]
    payouts: tuple[tuple[str, float], ...]

    type = "settle"


Event = VenueOpened | AccountOpened | TradeEvent | SettlementEvent

_EVENT_TYPES = {
    cls.type: cls for cls in (VenueOpened, AccountOpened, TradeEvent, SettlementEvent)
}


def event_to_dict(event: Event) -> dict:
    out = {"type": event.type}
    if isinstance(event, VenueOpened):
        out.update(
            seq=event.seq, ts=event.ts, venue_id=event.venue_id,
            design=event.design, b=event.b, ideas=[dict(r) for r in event.ideas],
        )
    elif isinstance(event, AccountOpened):
        out.update(seq=event.seq, ts=event.ts, trader_id=event.trader_id, endowment=event.endowment)
    elif isinstance(event, TradeEvent):
        out.update(
            seq=event.seq, ts=event.ts, venue_id=event.venue_id,
            trader_id=event.trader_id, idea_id=event.idea_id, side=event.side,
            direction=event.direction, qty=event.qty, cash_delta=event.cash_delta,
            prices_after=[[i, s, p] for i, s, p in event.prices_after],
        )
    elif isinstance(event, SettlementEvent):
        out.update(
            seq=event.seq, ts=event.ts, venue_id=event.venue_id, k=event.k,
            top_k=list(event.top_k), payouts=[[t, a] for t, a in event.payouts],
        )
    else:
        raise TypeError(f"not an event: {event!r}")
    return out


def event_from_dict(row: dict) -> Event:
    kind = row.get("type")
    cls = _EVENT_TYPES.get(kind)
    if cls is None:
        raise ReplayError(f"unknown event type {kind!r}")
    data = {k: v for k, v in row.items() if k != "type"}
    try:
        if cls is VenueOpened:
            data["ideas"] = tuple(dict(r) for r in data["ideas"])
        elif cls is TradeEvent:
            data["prices_after"] = tuple(
                (i, s, float(p)) for i, s, p in data["prices_after"]
            )
        elif cls is SettlementEvent:
            data["top_k"] = tuple(data["top_k"])
            data["payouts"] = tuple((t, float(a)) for t, a in data["payouts"])
        return cls(**data)
    except (KeyError, TypeError, ValueError) as exc:
        raise ReplayError(f"malformed {kind!r} event: {exc}") from exc


class EventLog:
    """Append-only event sink, optionally mirrored to a JSON-lines file."""

    def __init__(self, path=None):
        self.path = path
        self._events: list[Event] = []
        self._fh = open(path, "w", encoding="utf-8") if path else None

    def append(self, event: Event) -> None:
        self._events.append(event)
        if self._fh is not None:
            self._fh.write(json.dumps(event_to_dict(event), separators=(",", ":")) + "\n")
            self._fh.flush()

    def events(self) -> tuple[Event, ...]:
        return tuple(self._events)

    def __len__(self) -> int:
        return len(self._events)

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None


def read_events(path) -> Iterator[Event]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ReplayError(f"line {lineno}: not valid JSON: {exc}") from exc
            yield event_from_dict(row)


class AccountBook:
    """All trader accounts for one engine; enforces unique registration."""

    def __init__(self):
        self.accounts: dict[str, Account] = {}

    def open(self, trader_id: str, endowment: float = DEFAULT_ENDOWMENT) -> Account:
        if not trader_id:
            raise ValueError("trader_id must be nonempty")
        if trader_id in self.accounts:
            raise DuplicateId(f"trader {trader_id!r} already registered", trader_id=trader_id)
        if endowment < 0:
            raise ValueError("endowment cannot be negative")
        account = Account(trader_id=trader_id, cash_units=to_units(endowment))
        self.accounts[trader_id] = account
        return account

    def __contains__(self, trader_id: str) -> bool:
        return trader_id in self.accounts

    def __getitem__(self, trader_id: str) -> Account:
        return self.accounts[trader_id]

    def __iter__(self):
        return iter(self.accounts.values())

    def __len__(self) -> int:
        return len(self.accounts)

    def total_cash_units(self) -> int:
        return sum(a.cash_units for a in self.accounts.values())


def portfolio_series(events, trader_id: str) -> list[dict]:
    """Portfolio value after every event since the trader registered.

    Value is cash plus open positions marked at the latest traded price
    times the contract payoff; positions on a settled venue stop counting
    (their worth moved into cash as the payout).  Folded from the event
    log alone, in integer cash units, so the series is exact.
    """
    cash_units: int | None = None
    holdings: dict[tuple[str, str], int] = {}
    marks: dict[tuple[str, str], float] = {}
    venue_ideas: dict[str, set[str]] = {}
    settled_ideas: set[str] = set()
    series: list[dict] = []
    for event in events:
        if isinstance(event, VenueOpened):
            venue_ideas[event.venue_id] = {row["idea_id"] for row in event.ideas}
        elif isinstance(event, AccountOpened):
            if event.trader_id == trader_id:
                cash_units = to_units(event.endowment)
        elif isinstance(event, TradeEvent):
            for idea_id, side, price in event.prices_after:
                marks[(idea_id, side)] = price
            if event.trader_id == trader_id and cash_units is not None:
                cash_units -= to_units(event.cash_delta)
                key = (event.idea_id, event.side)
                delta = event.qty if event.direction == "buy" else -event.qty
                holdings[key] = holdings.get(key, 0) + delta
        elif isinstance(event, SettlementEvent):
            settled_ideas |= venue_ideas.get(event.venue_id, set())
            if cash_units is not None:
                for payee, amount in event.payouts:
                    if payee == trader_id:
                        cash_units += to_units(amount)
        if cash_units is None:
            continue
        value = from_units(cash_units)
        for (idea_id, side), qty in holdings.items():
            if qty and idea_id not in settled_ideas:
                value += qty * marks.get((idea_id, side), 0.0) * CONTRACT_PAYOFF
        series.append({"seq": event.seq, "ts": event.ts, "value": value})
    return series


def portfolio_value(account: Account, venue) -> float:
    """Cash plus holdings marked to the venue's prices times contract payoff.

    Only positions on the given venue's ideas are counted; marks use the
    instantaneous price as the probability of the 100-unit payoff.
    """
    value = account.cash
    idea_ids = set(venue.idea_ids)
    for (idea_id, side), qty in account.holdings.items():
        if idea_id in idea_ids:
            value += qty * venue.price(idea_id, side) * CONTRACT_PAYOFF
    return value
