"""Logarithmic market scoring rule kernel.

A market maker over ``n`` mutually exclusive outcomes quotes against the
cost function

    C(q) = b * ln(sum_i exp(q_i / b))

where ``q`` is the outstanding share vector and ``b`` the liquidity
parameter.  Buying ``d`` shares of outcome ``i`` costs ``C(q + d*e_i) -
C(q)``; selling is the same with negative ``d``.  Instantaneous prices are
the softmax of ``q / b`` and always form a probability vector.

All log-sum-exp evaluations subtract the running maximum first, so states
whose shifted exponents would overflow a double still price correctly.
The kernel is pure: states are immutable, trades return numbers, and the
caller decides whether to commit a new state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class LmsrState:
    """Market maker state: liquidity ``b`` and per-outcome share inventory ``q``."""

    b: float
    q: tuple[float, ...]

    def __post_init__(self):
        b = float(self.b)
        if not math.isfinite(b) or b <= 0:
            raise ValueError(f"liquidity parameter must be finite and positive, got {self.b!r}")
        q = tuple(float(x) for x in self.q)
        if len(q) < 2:
            raise ValueError("a market needs at least two outcomes")
        for x in q:
            if not math.isfinite(x):
                raise ValueError("share inventory must be finite")
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "q", q)

    @classmethod
    def fresh(cls, n: int, b: float) -> "LmsrState":
        """Untraded market: zero shares of each of ``n`` outcomes."""
        if n < 2:
            raise ValueError("a market needs at least two outcomes")
        return cls(b=b, q=(0.0,) * n)

    @property
    def n(self) -> int:
        return len(self.q)

    def with_trade(self, outcome: int, delta: float) -> "LmsrState":
        """State after ``delta`` more shares of ``outcome`` (negative sells)."""
        if not 0 <= outcome < len(self.q):
            raise ValueError(f"outcome index {outcome} out of range for {len(self.q)} outcomes")
        q = list(self.q)
        q[outcome] += delta
        return LmsrState(b=self.b, q=tuple(q))


def _shifted_terms(state: LmsrState) -> tuple[float, list[float], float]:
    """Max-shifted exponentials: returns (shift, exp terms, their sum)."""
    xs = [qi / state.b for qi in state.q]
    shift = max(xs)
    terms = [math.exp(x - shift) for x in xs]
    return shift, terms, math.fsum(terms)


def cost(state: LmsrState) -> float:
    """C(q) = b * ln(sum exp(q_i / b)), evaluated max-shifted."""
    shift, _, total = _shifted_terms(state)
    return state.b * (shift + math.log(total))


def prices(state: LmsrState) -> tuple[float, ...]:
    """Instantaneous price of each outcome; sums to 1 by construction."""
    _, terms, total = _shifted_terms(state)
    return tuple(t / total for t in terms)


def price(state: LmsrState, outcome: int) -> float:
    return prices(state)[outcome]


def trade_cost(state: LmsrState, outcome: int, delta: float) -> float:
    """Cash the trader pays (negative: receives) to move ``outcome`` by ``delta``.

    Pure quote; the caller commits ``state.with_trade(outcome, delta)``
    separately.  Cost depends only on the start and end state, so any
    sequence of trades between the same two states sums to the same total.
    """
    if delta == 0:
        raise ValueError("trade size must be nonzero")
    if not math.isfinite(delta):
        raise ValueError("trade size must be finite")
    after = state.with_trade(outcome, delta)
    return cost(after) - cost(state)


def affordable_shares(state: LmsrState, outcome: int, budget: float) -> float:
    """Largest ``d`` with trade_cost(state, outcome, d) <= budget.

    Closed form from inverting the cost function:

        d = budget + b * ln((S - (S - S_i) * exp(-budget/b)) / S_i)

    with S the shifted exponential sum and S_i the outcome's term.  Written
    this way the expression stays finite for budgets far beyond exp range.
    Returns +inf when the outcome's term has underflowed to zero (its price
    is below double resolution, so any finite budget buys astronomically).
    """
    if not 0 <= outcome < state.n:
        raise ValueError(f"outcome index {outcome} out of range for {state.n} outcomes")
    if budget <= 0:
        return 0.0
    _, terms, total = _shifted_terms(state)
    si = terms[outcome]
    if si == 0.0:
        return math.inf
    inner = total - (total - si) * math.exp(-budget / state.b)
    return budget + state.b * math.log(inner / si)


def max_loss(b: float, n: int) -> float:
    """Worst-case market maker loss b * ln(n) when liability is 1 per share."""
    if b <= 0:
        raise ValueError("liquidity parameter must be positive")
    if n < 2:
        raise ValueError("a market needs at least two outcomes")
    return b * math.log(n)
