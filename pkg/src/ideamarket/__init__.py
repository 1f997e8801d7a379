"""Play-money prediction markets for ranking ideas.

The package is layered: a pure scoring-rule kernel (`lmsr`), venues that
turn it into contract tables (`venue`), an event-sourced ledger and
execution engine (`ledger`, `engine`), accuracy and performance metrics
(`metrics`), an agent simulator (`simulator`), an HTTP/SSE service
(`service`) and a command line (`cli`).
"""

from .engine import Engine, Fill
from .errors import (
    ConfigError,
    DuplicateId,
    InsufficientCash,
    InsufficientHoldings,
    InvalidOrder,
    MarketError,
    ReplayError,
    UnknownContract,
    UnknownTrader,
    UnknownVenue,
    VenueSettled,
)
from .ledger import Account, EventLog, read_events
from .lmsr import LmsrState, cost, max_loss, prices, trade_cost
from .metrics import kendall_tau, mape, summarize, trading_performance
from .simulator import ExperimentConfig, Strategy, run_experiment, run_suite
from .venue import (
    CONTRACT_PAYOFF,
    DEFAULT_ENDOWMENT,
    DEFAULT_TOP_K,
    Design,
    Direction,
    ELASTICITY_PRESETS,
    GroundTruth,
    IdeaContract,
    Order,
    Side,
    Venue,
)

__version__ = "0.1.0"

__all__ = [
    "Account",
    "ConfigError",
    "CONTRACT_PAYOFF",
    "DEFAULT_ENDOWMENT",
    "DEFAULT_TOP_K",
    "Design",
    "Direction",
    "DuplicateId",
    "ELASTICITY_PRESETS",
    "Engine",
    "EventLog",
    "ExperimentConfig",
    "Fill",
    "GroundTruth",
    "IdeaContract",
    "InsufficientCash",
    "InsufficientHoldings",
    "InvalidOrder",
    "LmsrState",
    "MarketError",
    "Order",
    "ReplayError",
    "Side",
    "Strategy",
    "UnknownContract",
    "UnknownTrader",
    "UnknownVenue",
    "Venue",
    "VenueSettled",
    "cost",
    "kendall_tau",
    "mape",
    "max_loss",
    "prices",
    "read_events",
    "run_experiment",
    "run_suite",
    "summarize",
    "trade_cost",
    "trading_performance",
    "__version__",
]
