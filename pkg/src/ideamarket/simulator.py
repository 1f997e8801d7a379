"""Agent-based market simulation.

Each agent privately rates every idea (jury quality plus Gaussian noise,
clamped to the 1..5 scale), converts its ratings into target probabilities
of each idea finishing in the paid top set, and trades toward those
targets round by round.  Three behaviours are supported:

* ``noisy_signal``: trades straight toward its targets.
* ``favorite_longshot``: same targets, distorted by a Prelec probability
  weighting function, so longshots are overbought and near-certainties
  underbought.
* ``random``: uniform noise trader; supplies volume, no information.

Runs are deterministic for a given seed: one generator drives belief
draws, per-round scheduling shuffles and noise-trader choices, and the
engine clock is a logical counter, so two runs with the same
configuration produce byte-identical event logs.
"""

from __future__ import annotations

import itertools
import json
import math
import os
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Mapping, Sequence

import numpy as np

from .engine import Engine
from .errors import ConfigError
from .ledger import TradeEvent
from .metrics import (
    RunResult,
    SuiteReport,
    kendall_tau,
    mape,
    summarize,
    trading_performance,
    write_performance_csv,
)
from .venue import (
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
    generate_ideas,
    load_ideas_csv,
)

RATING_MIN, RATING_MAX = 1.0, 5.0


class Strategy(str, Enum):
    NOISY_SIGNAL = "noisy_signal"
    FAVORITE_LONGSHOT = "favorite_longshot"
    RANDOM = "random"


def _phi(x: np.ndarray) -> np.ndarray:
    """Standard normal CDF."""
    return 0.5 * (1.0 + np.vectorize(math.erf)(x / math.sqrt(2.0)))


def waterfill(weights: Sequence[float], k: int) -> np.ndarray:
    """Scale nonnegative weights to sum to ``k`` with every entry capped at 1.

    Entries that would scale past 1 are pinned there and the remaining
    budget is re-spread proportionally over the rest.
    """
    w = np.asarray(weights, dtype=float)
    n = w.size
    if not 1 <= k <= n:
        raise ValueError(f"k must be in 1..{n}, got {k}")
    if (w < 0).any():
        raise ValueError("weights must be nonnegative")
    p = np.zeros(n)
    free = np.ones(n, dtype=bool)
    budget = float(k)
    while budget > 1e-15 and free.any():
        total = float(w[free].sum())
        if total <= 0.0:
            p[free] = budget / free.sum()
            break
        factor = budget / total
        over = free & (w * factor >= 1.0)
        if not over.any():
            p[free] = w[free] * factor
            break
        p[over] = 1.0
        budget -= float(over.sum())
        free &= ~over
    return np.clip(p, 0.0, 1.0)


def topk_probabilities(beliefs: Sequence[float], k: int, noise_sd: float) -> np.ndarray:
    """Per-idea probability of finishing in the top ``k``, given one agent's
    ratings.

    With zero rating noise this is the exact membership indicator (ties at
    the boundary split their slots evenly).  With noise, membership is
    graded through a normal CDF around the top-k boundary: the boundary is
    the midpoint between the k-th and (k+1)-th sorted rating, the scale is
    the rating noise of a pairwise comparison, and the graded weights are
    rescaled to put total mass k on the board (no idea above 1).
    """
    b = np.asarray(beliefs, dtype=float)
    n = b.size
    if not 1 <= k <= n:
        raise ValueError(f"k must be in 1..{n}, got {k}")
    if noise_sd < 0:
        raise ValueError("noise_sd cannot be negative")
    if k == n:
        return np.ones(n)
    if noise_sd == 0:
        stronger = (b[None, :] > b[:, None]).sum(axis=1)
        tied = (b[None, :] == b[:, None]).sum(axis=1)  # includes self
        return np.clip((k - stronger) / tied, 0.0, 1.0)
    order = np.sort(b)[::-1]
    boundary = (order[k - 1] + order[k]) / 2.0
    scale = noise_sd * math.sqrt(2.0)
    graded = _phi((b - boundary) / scale)
    return waterfill(graded, k)


def prelec_weight(p, alpha: float):
    """Prelec probability weighting w(p) = exp(-(-ln p)^alpha).

    For alpha in (0, 1) small probabilities are inflated and large ones
    deflated; alpha = 1 is the identity.  Endpoints map to themselves.
    """
    if not 0 < alpha <= 1:
        raise ValueError(f"alpha must be in (0, 1], got {alpha}")
    arr = np.asarray(p, dtype=float)
    if (arr < 0).any() or (arr > 1).any():
        raise ValueError("probabilities must be in [0, 1]")
    out = np.empty_like(arr)
    interior = (arr > 0) & (arr < 1)
    out[~interior] = arr[~interior]
    out[interior] = np.exp(-((-np.log(arr[interior])) ** alpha))
    if np.isscalar(p) or np.ndim(p) == 0:
        return float(out)
    return out


def build_targets(
    design: Design,
    idea_ids: Sequence[str],
    beliefs: Sequence[float],
    k: int,
    noise_sd: float,
    strategy: Strategy,
    alpha: float,
) -> dict[tuple[str, str], float]:
    """Target price per contract for one agent."""
    p = topk_probabilities(beliefs, k, noise_sd)
    if design is Design.SINGLE:
        if strategy is Strategy.FAVORITE_LONGSHOT:
            p = waterfill(prelec_weight(p, alpha), k)
        return {(idea_id, Side.IDEA.value): float(p[i]) for i, idea_id in enumerate(idea_ids)}
    if strategy is Strategy.FAVORITE_LONGSHOT:
        w_top = prelec_weight(p, alpha)
        w_flop = prelec_weight(1.0 - p, alpha)
        p = w_top / (w_top + w_flop)
    targets: dict[tuple[str, str], float] = {}
    for i, idea_id in enumerate(idea_ids):
        targets[(idea_id, Side.TOP.value)] = float(p[i])
        targets[(idea_id, Side.FLOP.value)] = float(1.0 - p[i])
    return targets


@dataclass
class Agent:
    trader_id: str
    strategy: Strategy
    trade_step: int
    budget_reserve: float
    position_saturation: float
    targets: dict[tuple[str, str], float] = field(default_factory=dict)


def agent_order(agent: Agent, venue: Venue, account, rng: np.random.Generator) -> Order | None:
    """Pick the agent's next order, or None when nothing worth doing is
    affordable."""
    if agent.strategy is Strategy.RANDOM:
        return _random_order(agent, venue, account, rng)

    candidates: list[tuple[float, int, str, str, Direction]] = []
    for pos, (idea_id, side_value, price) in enumerate(venue.prices()):
        target = agent.targets[(idea_id, side_value)]
        gap = target - price
        held = account.holding(idea_id, side_value)
        if gap > 0:
            score = gap / (1.0 + held / agent.position_saturation)
            candidates.append((score, pos, idea_id, side_value, Direction.BUY))
        elif gap < 0 and held > 0:
            candidates.append((-gap, pos, idea_id, side_value, Direction.SELL))
    candidates.sort(key=lambda c: (-c[0], c[1]))

    budget = account.cash - agent.budget_reserve
    for _, _, idea_id, side_value, direction in candidates:
        if direction is Direction.BUY:
            if budget <= 0:
                continue
            qty = min(agent.trade_step, venue.affordable_quantity(idea_id, side_value, budget))
        else:
            qty = min(agent.trade_step, account.holding(idea_id, side_value))
        if qty >= 1:
            return Order(
                trader_id=agent.trader_id,
                idea_id=idea_id,
                side=side_value,
                direction=direction,
                quantity=int(qty),
            )
    return None


def _random_order(agent: Agent, venue: Venue, account, rng: np.random.Generator) -> Order | None:
    contracts = venue.contracts()
    idea_id, side = contracts[int(rng.integers(len(contracts)))]
    direction = Direction.BUY if int(rng.integers(2)) == 0 else Direction.SELL
    wanted = int(rng.integers(1, agent.trade_step + 1))
    if direction is Direction.SELL:
        qty = min(wanted, account.holding(idea_id, side.value))
    else:
        budget = account.cash - agent.budget_reserve
        if budget <= 0:
            return None
        qty = min(wanted, venue.affordable_quantity(idea_id, side.value, budget))
    if qty < 1:
        return None
    return Order(
        trader_id=agent.trader_id,
        idea_id=idea_id,
        side=side.value,
        direction=direction,
        quantity=int(qty),
    )


@dataclass
class ExperimentConfig:
    design: str = "multi"
    elasticity: str | None = "moderate"
    b: float | None = None
    n_agents: int = 60
    rounds: int = 30
    seed: int = 0
    k: int = DEFAULT_TOP_K
    noise_sd: float = 0.5
    distortion_alpha: float = 0.65
    trade_step: int = 10
    budget_reserve: float = 0.0
    position_saturation: float = 3.0
    endowment: float = DEFAULT_ENDOWMENT
    agent_mix: dict[str, float] = field(default_factory=lambda: {"noisy_signal": 1.0})
    ideas_csv: str | None = None
    n_ideas: int = 24
    idea_seed: int = 7

    def liquidity(self) -> tuple[float, str]:
        """Resolved b and the elasticity label used in reports."""
        if self.b is not None:
            if self.b <= 0:
                raise ConfigError(f"b must be positive, got {self.b}")
            return float(self.b), "custom"
        preset = ELASTICITY_PRESETS.get(self.elasticity or "")
        if preset is None:
            raise ConfigError(
                f"unknown elasticity preset {self.elasticity!r}",
                known=sorted(ELASTICITY_PRESETS),
            )
        return preset.b, preset.name

    def validate(self) -> None:
        if self.design not in (Design.SINGLE.value, Design.MULTI.value):
            raise ConfigError(f"design must be single or multi, got {self.design!r}")
        self.liquidity()
        if self.n_agents < 1:
            raise ConfigError("n_agents must be at least 1")
        if self.rounds < 1:
            raise ConfigError("rounds must be at least 1")
        if self.noise_sd < 0:
            raise ConfigError("noise_sd cannot be negative")
        if not 0 < self.distortion_alpha <= 1:
            raise ConfigError("distortion_alpha must be in (0, 1]")
        if self.trade_step < 1:
            raise ConfigError("trade_step must be at least 1")
        if self.budget_reserve < 0:
            raise ConfigError("budget_reserve cannot be negative")
        if self.position_saturation <= 0:
            raise ConfigError("position_saturation must be positive")
        if self.endowment <= 0:
            raise ConfigError("endowment must be positive")
        if not self.agent_mix:
            raise ConfigError("agent_mix cannot be empty")
        for name, frac in self.agent_mix.items():
            if name not in Strategy._value2member_map_:
                raise ConfigError(
                    f"unknown strategy {name!r}",
                    known=[s.value for s in Strategy],
                )
            if frac < 0:
                raise ConfigError("agent_mix fractions cannot be negative")
        if abs(sum(self.agent_mix.values()) - 1.0) > 1e-9:
            raise ConfigError("agent_mix fractions must sum to 1")
        n_ideas = self.n_ideas
        if self.ideas_csv is None and n_ideas < 3:
            raise ConfigError("n_ideas must be at least 3")
        if not 1 <= self.k < max(n_ideas, 2):
            raise ConfigError(f"k must be in 1..{n_ideas - 1}")


def _mix_counts(mix: Mapping[str, float], n: int) -> dict[Strategy, int]:
    """Integer strategy counts by largest remainder, deterministic order."""
    items = sorted(mix.items())
    base = {name: int(math.floor(frac * n)) for name, frac in items}
    remainder = n - sum(base.values())
    by_frac = sorted(items, key=lambda kv: (-(kv[1] * n - base[kv[0]]), kv[0]))
    for name, _ in by_frac[:remainder]:
        base[name] += 1
    return {Strategy(name): count for name, count in base.items() if count > 0}


def _load_pool(config: ExperimentConfig) -> tuple[list[IdeaContract], dict[str, float]]:
    if config.ideas_csv is not None:
        return load_ideas_csv(config.ideas_csv)
    return generate_ideas(config.n_ideas, config.idea_seed)


@dataclass(frozen=True)
class _CloseOfTrading:
    trader_id: str
    cash: float


def run_experiment(config: ExperimentConfig, out_dir: str | None = None) -> RunResult:
    """Run one market to settlement and score it.

    With ``out_dir`` set, writes ``events.jsonl`` (the full event log),
    ``report.json`` and ``performance.csv`` there.
    """
    config.validate()
    liquidity, elasticity_label = config.liquidity()
    ideas, scores = _load_pool(config)
    if not 1 <= config.k < len(ideas):
        raise ConfigError(f"k must be in 1..{len(ideas) - 1} for this idea pool")
    truth = GroundTruth(scores, config.k)

    log_path = None
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        log_path = os.path.join(out_dir, "events.jsonl")

    ticker = itertools.count(1)
    engine = Engine(log_path=log_path, clock=lambda: float(next(ticker)))
    venue = engine.open_venue("market", config.design, ideas, b=liquidity)

    rng = np.random.default_rng(config.seed)
    idea_ids = venue.idea_ids
    quality = np.array([scores[i] for i in idea_ids])

    agents: list[Agent] = []
    counts = _mix_counts(config.agent_mix, config.n_agents)
    roster: list[Strategy] = []
    for strategy in (Strategy.NOISY_SIGNAL, Strategy.FAVORITE_LONGSHOT, Strategy.RANDOM):
        roster.extend([strategy] * counts.get(strategy, 0))
    for i, strategy in enumerate(roster, start=1):
        trader_id = f"agent-{i:03d}"
        engine.create_account(trader_id, config.endowment)
        beliefs = np.clip(
            quality + rng.normal(0.0, config.noise_sd, len(idea_ids))
            if config.noise_sd > 0
            else quality,
            RATING_MIN,
            RATING_MAX,
        )
        targets = (
            {}
            if strategy is Strategy.RANDOM
            else build_targets(
                venue.design, idea_ids, beliefs, config.k,
                config.noise_sd, strategy, config.distortion_alpha,
            )
        )
        agents.append(
            Agent(
                trader_id=trader_id,
                strategy=strategy,
                trade_step=config.trade_step,
                budget_reserve=config.budget_reserve,
                position_saturation=config.position_saturation,
                targets=targets,
            )
        )

    for _ in range(config.rounds):
        for idx in rng.permutation(len(agents)):
            agent = agents[idx]
            order = agent_order(agent, venue, engine.book[agent.trader_id], rng)
            if order is not None:
                engine.execute("market", order)

    market_ranking = venue.final_ranking()
    if venue.design is Design.SINGLE:
        closing_marks = {
            idea_id: price for idea_id, _, price in venue.prices()
        }
    else:
        closing_marks = {
            idea_id: price
            for idea_id, side, price in venue.prices()
            if side == Side.TOP.value
        }

    close = [_CloseOfTrading(a.trader_id, engine.book[a.trader_id].cash) for a in agents]
    payouts = engine.settle("market", truth, config.k)

    total_trades = sum(1 for e in engine.log.events() if isinstance(e, TradeEvent))
    normalizer = total_trades / len(agents) if agents else 0.0
    if total_trades > 0:
        records = tuple(
            trading_performance(snap, payouts.get(snap.trader_id, 0.0), normalizer)
            for snap in close
        )
        run_mape = mape(truth.ranking, market_ranking)
        run_tau = kendall_tau(truth.ranking, market_ranking)
    else:
        records = ()
        run_mape = None
        run_tau = None

    result = RunResult(
        design=config.design,
        elasticity=elasticity_label,
        b=liquidity,
        seed=config.seed,
        n_traders=len(agents),
        rounds=config.rounds,
        total_trades=total_trades,
        normalizer=normalizer,
        mape=run_mape,
        tau=run_tau,
        market_ranking=market_ranking,
        truth_ranking=truth.ranking,
        records=records,
        closing_marks=closing_marks,
    )

    if out_dir is not None:
        with open(os.path.join(out_dir, "report.json"), "w", encoding="utf-8") as fh:
            json.dump(result.to_dict(), fh, indent=2)
            fh.write("\n")
        write_performance_csv(os.path.join(out_dir, "performance.csv"), [result])
    engine.log.close()
    return result


def run_suite(
    seeds: Sequence[int],
    base: ExperimentConfig,
    out_dir: str | None = None,
    designs: Sequence[str] = (Design.SINGLE.value, Design.MULTI.value),
    elasticities: Sequence[str] = ("high", "moderate", "low"),
    scale_agents: bool = True,
    progress=None,
) -> tuple[SuiteReport, list[RunResult]]:
    """Full factorial design x elasticity sweep, every cell over the same seeds.

    With ``scale_agents`` the crowd size follows each elasticity preset's
    calibration; otherwise ``base.n_agents`` is used everywhere.
    """
    runs: list[RunResult] = []
    for design in designs:
        for elasticity in elasticities:
            preset = ELASTICITY_PRESETS.get(elasticity)
            if preset is None:
                raise ConfigError(f"unknown elasticity preset {elasticity!r}")
            n_agents = preset.assumed_traders if scale_agents else base.n_agents
            for seed in seeds:
                cfg = replace(
                    base, design=design, elasticity=elasticity, b=None,
                    seed=seed, n_agents=n_agents,
                )
                sub = (
                    os.path.join(out_dir, f"{design}-{elasticity}-seed{seed}")
                    if out_dir is not None
                    else None
                )
                run = run_experiment(cfg, sub)
                runs.append(run)
                if progress is not None:
                    progress(run)
    report = summarize(runs)
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "suite_report.json"), "w", encoding="utf-8") as fh:
            json.dump(report.to_dict(), fh, indent=2)
            fh.write("\n")
        write_performance_csv(os.path.join(out_dir, "performance.csv"), runs)
    return report, runs
