"""HTTP/JSON facade for human trading.

Traders register once with a single-use activation code and get a session
token plus a 5000-unit account.  Reads (venues, ideas, prices, portfolio,
FAQ) are open or session-scoped; writes go through the engine's single
lock, so order handling is linearizable.  A server-sent-events stream
pushes one message per committed trade with the contracts whose prices
changed; reconnecting clients pass ``from_seq`` and missed messages are
replayed from the event log.

Prices travel as decimal strings with 4 places.  Cash amounts travel as
JSON numbers; they sit on the ledger's 1e-4 grid, which doubles represent
exactly.
"""

from __future__ import annotations

import json
import os
import queue
import secrets
import threading
from dataclasses import dataclass, field, fields
from importlib import resources

import yaml
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, PlainTextResponse, StreamingResponse
from pydantic import BaseModel, Field

from .engine import Engine
from .errors import (
    ConfigError,
    DuplicateId,
    InsufficientCash,
    InsufficientHoldings,
    InvalidOrder,
    MarketError,
    UnknownContract,
    UnknownTrader,
    UnknownVenue,
    VenueSettled,
)
from .ledger import SettlementEvent, TradeEvent, portfolio_series
from .venue import (
    DEFAULT_ENDOWMENT,
    DEFAULT_TOP_K,
    GroundTruth,
    IdeaContract,
    Order,
    Venue,
    generate_ideas,
    load_ideas_csv,
)

DEFAULT_VENUE_ID = "main"


class AdminAuthError(MarketError):
    code = "admin_token_required"


_STATUS_BY_ERROR = {
    InsufficientCash: 409,
    InsufficientHoldings: 409,
    VenueSettled: 410,
    UnknownVenue: 404,
    UnknownContract: 422,
    InvalidOrder: 422,
    DuplicateId: 422,
    UnknownTrader: 401,
    ConfigError: 422,
    AdminAuthError: 403,
}


@dataclass
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8765
    admin_token: str | None = None      # generated at startup when unset
    activation_codes: list[str] = field(default_factory=list)
    activation_codes_file: str | None = None
    ideas_csv: str | None = None
    design: str = "multi"
    elasticity: str | None = "moderate"
    b: float | None = None
    k: int = DEFAULT_TOP_K
    endowment: float = DEFAULT_ENDOWMENT
    event_log: str | None = None
    n_ideas: int = 24
    idea_seed: int = 7

    _ENV = {
        "host": ("PM_HOST", str),
        "port": ("PM_PORT", int),
        "admin_token": ("PM_ADMIN_TOKEN", str),
        "activation_codes_file": ("PM_ACTIVATION_CODES_FILE", str),
        "ideas_csv": ("PM_IDEAS_CSV", str),
        "design": ("PM_DESIGN", str),
        "elasticity": ("PM_ELASTICITY", str),
        "b": ("PM_B", float),
        "k": ("PM_K", int),
        "endowment": ("PM_ENDOWMENT", float),
        "event_log": ("PM_EVENT_LOG", str),
        "n_ideas": ("PM_N_IDEAS", int),
        "idea_seed": ("PM_IDEA_SEED", int),
    }

    @classmethod
    def load(cls, path: str | None = None, env=os.environ) -> "ServiceConfig":
        """Precedence: environment over config file over built-in defaults."""
        cfg = cls()
        known = {f.name for f in fields(cls)}
        if path is not None:
            with open(path, encoding="utf-8") as fh:
                data = yaml.safe_load(fh) or {}
            if not isinstance(data, dict):
                raise ConfigError(f"config file {path} must hold a mapping")
            for key, value in data.items():
                if key not in known:
                    raise ConfigError(f"unknown config key {key!r}")
                setattr(cfg, key, value)
        for name, (var, cast) in cls._ENV.items():
            raw = env.get(var)
            if raw is None:
                continue
            try:
                setattr(cfg, name, cast(raw))
            except ValueError:
                raise ConfigError(f"bad value for {var}: {raw!r}") from None
        codes = env.get("PM_ACTIVATION_CODES")
        if codes is not None:
            cfg.activation_codes = [c.strip() for c in codes.split(",") if c.strip()]
        if cfg.b is not None and "PM_B" in env and "PM_ELASTICITY" not in env:
            cfg.elasticity = None
        if cfg.b is not None and cfg.elasticity is not None:
            # explicit b wins over a leftover preset name
            cfg.elasticity = None
        return cfg


def format_price(p: float) -> str:
    return f"{p:.4f}"


class RegisterBody(BaseModel):
    activation_code: str


class OrderBody(BaseModel):
    idea_id: str
    side: str
    direction: str
    quantity: int


class IdeaBody(BaseModel):
    idea_id: str
    title: str = ""
    description: str = ""
    stratum: str = "medium"


class CreateVenueBody(BaseModel):
    venue_id: str | None = None
    design: str
    elasticity: str | None = None
    b: float | None = None
    ideas: list[IdeaBody] | None = None
    ideas_csv: str | None = None
    n_ideas: int = 24
    idea_seed: int = 7


class SettleBody(BaseModel):
    scores: dict[str, float]
    k: int = Field(default=DEFAULT_TOP_K, ge=1)


@dataclass
class _Subscriber:
    venue_id: str
    inbox: "queue.Queue"


class MarketService:
    """Application state behind the HTTP handlers."""

    def __init__(self, config: ServiceConfig):
        self.config = config
        self.engine = Engine(log_path=config.event_log)
        self.admin_token = config.admin_token or secrets.token_urlsafe(16)
        self.sessions: dict[str, str] = {}
        self._unused_codes: set[str] = set(config.activation_codes)
        if config.activation_codes_file:
            with open(config.activation_codes_file, encoding="utf-8") as fh:
                self._unused_codes |= {line.strip() for line in fh if line.strip()}
        self._register_lock = threading.Lock()
        self._trader_serial = 0
        self._subscribers: list[_Subscriber] = []
        self._sub_lock = threading.Lock()
        self.engine.subscribe(self._fanout)
        self._open_default_venue()

    def _open_default_venue(self) -> None:
        cfg = self.config
        if cfg.ideas_csv:
            ideas, _ = load_ideas_csv(cfg.ideas_csv)
        else:
            ideas, _ = generate_ideas(cfg.n_ideas, cfg.idea_seed)
        self.engine.open_venue(
            DEFAULT_VENUE_ID, cfg.design, ideas, b=cfg.b, elasticity=cfg.elasticity
        )

    # -- registration and sessions -----------------------------------------

    def register(self, activation_code: str) -> dict | None:
        with self._register_lock:
            if activation_code not in self._unused_codes:
                return None
            self._unused_codes.discard(activation_code)
            self._trader_serial += 1
            trader_id = f"trader-{self._trader_serial:03d}"
            token = secrets.token_urlsafe(32)  # 256 bits
            self.sessions[token] = trader_id
        account = self.engine.create_account(trader_id, self.config.endowment)
        return {"token": token, "trader_id": trader_id, "cash": account.cash}

    def add_codes(self, codes) -> None:
        with self._register_lock:
            self._unused_codes |= set(codes)

    def trader_for(self, token: str | None) -> str | None:
        if token is None:
            return None
        return self.sessions.get(token)

    # -- streaming ----------------------------------------------------------

    def _fanout(self, event) -> None:
        if not isinstance(event, (TradeEvent, SettlementEvent)):
            return
        with self._sub_lock:
            targets = [s for s in self._subscribers if s.venue_id == event.venue_id]
        for sub in targets:
            sub.inbox.put(event)

    def _attach(self, venue_id: str) -> _Subscriber:
        sub = _Subscriber(venue_id=venue_id, inbox=queue.Queue())
        with self._sub_lock:
            self._subscribers.append(sub)
        return sub

    def _detach(self, sub: _Subscriber) -> None:
        with self._sub_lock:
            if sub in self._subscribers:
                self._subscribers.remove(sub)

    def stream_messages(self, venue_id: str, from_seq: int):
        """Yield SSE frames: one message per trade since ``from_seq``, in
        seq order with no gaps, then live; ends after the settle message."""
        self.engine._venue(venue_id)  # 404 before the stream starts
        sub = self._attach(venue_id)
        try:
            last = from_seq
            backlog = [
                e for e in self.engine.log.events()
                if isinstance(e, (TradeEvent, SettlementEvent))
                and e.venue_id == venue_id and e.seq > from_seq
            ]
            done = False
            for event in backlog:
                yield self._frame(event)
                last = event.seq
                if isinstance(event, SettlementEvent):
                    done = True
            while not done:
                try:
                    event = sub.inbox.get(timeout=15.0)
                except queue.Empty:
                    yield ": keep-alive\n\n"
                    continue
                if event.seq <= last:
                    continue
                yield self._frame(event)
                last = event.seq
                if isinstance(event, SettlementEvent):
                    done = True
        finally:
            self._detach(sub)

    @staticmethod
    def _frame(event) -> str:
        if isinstance(event, SettlementEvent):
            payload = {"type": "settled", "seq": event.seq, "venue_id": event.venue_id}
        else:
            payload = {
                "type": "trade",
                "seq": event.seq,
                "venue_id": event.venue_id,
                "changed_contracts": [
                    {"idea_id": i, "side": s, "price": format_price(p)}
                    for i, s, p in event.prices_after
                ],
            }
        return f"id: {event.seq}\ndata: {json.dumps(payload)}\n\n"

    # -- views ----------------------------------------------------------------

    def venue_summary(self, venue: Venue) -> dict:
        return {
            "venue_id": venue.venue_id,
            "design": venue.design.value,
            "b": venue.b,
            "status": "settled" if venue.settled else "open",
            "n_ideas": len(venue.ideas),
            "seq": self.engine.seq,
        }

    def idea_rows(self, venue: Venue) -> list[dict]:
        prices: dict[str, dict[str, str]] = {}
        for idea_id, side, price in venue.prices():
            prices.setdefault(idea_id, {})[side] = format_price(price)
        return [
            {
                "idea_id": idea.idea_id,
                "title": idea.title,
                "description": idea.description,
                "stratum": idea.stratum.value,
                "prices": prices[idea.idea_id],
            }
            for idea in venue.ideas
        ]


def _bearer_token(request: Request) -> str | None:
    auth = request.headers.get("authorization", "")
    if auth.lower().startswith("bearer "):
        return auth[7:].strip()
    return request.headers.get("x-session-token")


def create_app(config: ServiceConfig | None = None, service: MarketService | None = None) -> FastAPI:
    if service is None:
        service = MarketService(config or ServiceConfig())
    app = FastAPI(title="idea market", version="0.1.0")
    app.state.service = service
    engine = service.engine

    @app.exception_handler(MarketError)
    async def market_error_handler(_request, exc: MarketError):
        status = _STATUS_BY_ERROR.get(type(exc), 422)
        return JSONResponse(status_code=status, content=exc.to_dict())

    def require_session(request: Request) -> str:
        trader_id = service.trader_for(_bearer_token(request))
        if trader_id is None:
            raise UnknownTrader("missing or invalid session token")
        return trader_id

    def require_admin(request: Request) -> None:
        token = request.headers.get("x-admin-token")
        if token != service.admin_token:
            raise AdminAuthError("admin token required")

    @app.post("/register")
    def register(body: RegisterBody):
        result = service.register(body.activation_code)
        if result is None:
            return JSONResponse(
                status_code=403,
                content={"error": "invalid_activation_code",
                         "message": "activation code unknown or already used"},
            )
        return result

    @app.get("/venues")
    def list_venues():
        return [service.venue_summary(v) for v in engine.venues.values()]

    @app.post("/venues", status_code=201)
    def create_venue(body: CreateVenueBody, request: Request):
        require_admin(request)
        if body.ideas is not None:
            ideas = [
                IdeaContract(i.idea_id, i.title, i.description, i.stratum)
                for i in body.ideas
            ]
        elif body.ideas_csv is not None:
            ideas, _ = load_ideas_csv(body.ideas_csv)
        else:
            ideas, _ = generate_ideas(body.n_ideas, body.idea_seed)
        venue_id = body.venue_id or f"venue-{len(engine.venues) + 1}"
        venue = engine.open_venue(
            venue_id, body.design, ideas, b=body.b, elasticity=body.elasticity
        )
        return service.venue_summary(venue)

    @app.get("/venues/{venue_id}")
    def venue_detail(venue_id: str):
        venue = engine._venue(venue_id)
        out = service.venue_summary(venue)
        out["prices"] = [
            {"idea_id": i, "side": s, "price": format_price(p)}
            for i, s, p in venue.prices()
        ]
        return out

    @app.get("/venues/{venue_id}/ideas")
    def venue_ideas(venue_id: str):
        return service.idea_rows(engine._venue(venue_id))

    @app.get("/venues/{venue_id}/prices")
    def venue_prices(venue_id: str):
        venue = engine._venue(venue_id)
        with engine._lock:
            rows = venue.prices()
            seq = engine.seq
        return {
            "venue_id": venue_id,
            "seq": seq,
            "prices": [
                {"idea_id": i, "side": s, "price": format_price(p)} for i, s, p in rows
            ],
        }

    @app.post("/venues/{venue_id}/quote")
    def quote(venue_id: str, body: OrderBody, request: Request):
        require_session(request)
        q = engine.quote(venue_id, body.idea_id, body.side, body.direction, body.quantity)
        return {
            "cash_delta": q.cash_delta,
            "prices_after": [
                {"idea_id": i, "side": s, "price": format_price(p)}
                for i, s, p in q.prices_after
            ],
        }

    @app.post("/venues/{venue_id}/orders")
    def place_order(venue_id: str, body: OrderBody, request: Request):
        trader_id = require_session(request)
        order = Order(
            trader_id=trader_id,
            idea_id=body.idea_id,
            side=body.side,
            direction=body.direction,
            quantity=body.quantity,
        )
        fill = engine.execute(venue_id, order)
        return {
            "seq": fill.event.seq,
            "cash_delta": fill.cash_delta,
            "new_cash": fill.new_cash,
            "prices_after": [
                {"idea_id": i, "side": s, "price": format_price(p)}
                for i, s, p in fill.prices_after
            ],
        }

    @app.get("/portfolio")
    def portfolio(request: Request):
        trader_id = require_session(request)
        with engine._lock:
            account = engine.book[trader_id]
            holdings = [
                {"idea_id": idea_id, "side": side, "quantity": qty}
                for (idea_id, side), qty in sorted(account.holdings.items())
            ]
            series = portfolio_series(engine.log.events(), trader_id)
            return {
                "trader_id": trader_id,
                "cash": account.cash,
                "holdings": holdings,
                "transaction_count": account.transaction_count,
                "value_series": series,
            }

    @app.post("/venues/{venue_id}/settle")
    def settle(venue_id: str, body: SettleBody, request: Request):
        require_admin(request)
        truth = GroundTruth(body.scores, body.k)
        payouts = engine.settle(venue_id, truth, body.k)
        return {"venue_id": venue_id, "k": body.k, "payouts": payouts}

    @app.get("/faq", response_class=PlainTextResponse)
    def faq():
        return resources.files("ideamarket").joinpath("faq.md").read_text(encoding="utf-8")

    @app.get("/venues/{venue_id}/stream")
    def stream(venue_id: str, from_seq: int = 0):
        return StreamingResponse(
            service.stream_messages(venue_id, from_seq),
            media_type="text/event-stream",
            headers={"cache-control": "no-cache", "x-accel-buffering": "no"},
        )

    return app


def run(config: ServiceConfig) -> None:  # pragma: no cover - exercised manually
    import uvicorn

    app = create_app(config)
    uvicorn.run(app, host=config.host, port=config.port, log_level="info")
