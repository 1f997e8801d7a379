"""Domain errors shared across the engine, CLI and HTTP layers.

Every error carries a stable machine-readable ``code`` so the CLI can emit
JSON on stderr and the service can map to HTTP statuses without string
matching.
"""

from __future__ import annotations


class MarketError(Exception):
    """Base class for rule violations; ``code`` is a stable identifier."""

    code = "market_error"

    def __init__(self, message: str, **details):
        super().__init__(message)
        self.message = message
        self.details = details

    def to_dict(self) -> dict:
        out = {"error": self.code, "message": self.message}
        out.update(self.details)
        return out


class UnknownContract(MarketError):
    code = "unknown_contract"


class UnknownVenue(MarketError):
    code = "unknown_venue"


class UnknownTrader(MarketError):
    code = "unknown_trader"


class DuplicateId(MarketError):
    code = "duplicate_id"


class VenueSettled(MarketError):
    code = "venue_settled"


class InsufficientCash(MarketError):
    code = "insufficient_cash"


class InsufficientHoldings(MarketError):
    code = "insufficient_holdings"


class InvalidOrder(MarketError):
    code = "invalid_order"


class ReplayError(MarketError):
    """Event log is corrupt, gapped, or disagrees with recomputation."""

    code = "replay_error"


class ConfigError(MarketError):
    code = "config_error"
