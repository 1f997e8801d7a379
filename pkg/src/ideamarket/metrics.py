"""Forecast accuracy and trader performance measures.

Accuracy compares the ranking implied by closing prices against the jury
ranking: mean absolute percentage error over placement numbers, and the
Kendall rank correlation (tau-b, so tied placements are handled).  Trader
performance is final cash plus settlement payout, normalized by the run's
mean number of executed trades per trader so that differently active
markets stay comparable.
"""

from __future__ import annotations

import csv
import math
import statistics
from dataclasses import dataclass, field
from typing import Mapping, Sequence


def _check_ranking(name: str, ranking: Mapping[str, int]) -> None:
    n = len(ranking)
    if n < 2:
        raise ValueError(f"{name} needs at least two placements")
    if sorted(ranking.values()) != list(range(1, n + 1)):
        raise ValueError(f"{name} must use each placement 1..{n} exactly once")


def mape(actual: Mapping[str, int], forecast: Mapping[str, int]) -> float:
    """Mean absolute percentage error between two placement assignments.

    (1/n) * sum_i |actual_i - forecast_i| / actual_i, placements counted
    from 1 so the denominator is never zero.
    """
    if set(actual) != set(forecast):
        raise ValueError("rankings cover different idea sets")
    _check_ranking("actual", actual)
    _check_ranking("forecast", forecast)
    n = len(actual)
    return math.fsum(abs(actual[i] - forecast[i]) / actual[i] for i in actual) / n


def kendall_tau(a: Mapping[str, float], b: Mapping[str, float]) -> float:
    """Kendall tau-b by direct pair counting.

    Works on any numeric scores, not just placements; pairs tied in both
    inputs drop out entirely, pairs tied in one input enter only the other
    side's denominator factor.
    """
    if set(a) != set(b):
        raise ValueError("inputs cover different idea sets")
    ids = sorted(a)
    n = len(ids)
    if n < 2:
        raise ValueError("need at least two items")
    concordant = discordant = ties_only_a = ties_only_b = 0
    for i in range(n):
        for j in range(i + 1, n):
            da = a[ids[i]] - a[ids[j]]
            db = b[ids[i]] - b[ids[j]]
            if da == 0 and db == 0:
                continue
            if da == 0:
                ties_only_a += 1
            elif db == 0:
                ties_only_b += 1
            elif (da > 0) == (db > 0):
                concordant += 1
            else:
                discordant += 1
    denom = math.sqrt(
        (concordant + discordant + ties_only_b)
        * (concordant + discordant + ties_only_a)
    )
    if denom == 0:
        raise ValueError("tau undefined: one input is constant")
    return (concordant - discordant) / denom


@dataclass(frozen=True)
class PerformanceRecord:
    trader_id: str
    raw: float          # cash at close plus settlement payout
    normalizer: float   # executed trades per trader in this run
    normalized: float


def trading_performance(account, payout: float, normalizer: float) -> PerformanceRecord:
    """Score one trader.  ``account.cash`` must be the close-of-trading cash,
    before the payout is credited."""
    if normalizer <= 0:
        raise ValueError("normalizer must be positive")
    raw = account.cash + payout
    return PerformanceRecord(
        trader_id=account.trader_id,
        raw=raw,
        normalizer=normalizer,
        normalized=raw / normalizer,
    )


@dataclass
class RunResult:
    """Everything one simulated market run contributes to the suite report."""

    design: str
    elasticity: str
    b: float
    seed: int
    n_traders: int
    rounds: int
    total_trades: int
    normalizer: float
    mape: float | None
    tau: float | None
    market_ranking: dict[str, int]
    truth_ranking: dict[str, int]
    records: tuple[PerformanceRecord, ...] = ()
    closing_marks: dict[str, float] = field(default_factory=dict)

    @property
    def cell(self) -> str:
        return f"{self.design}/{self.elasticity}"

    @property
    def traded(self) -> bool:
        return self.total_trades > 0

    def to_dict(self) -> dict:
        return {
            "design": self.design,
            "elasticity": self.elasticity,
            "b": self.b,
            "seed": self.seed,
            "n_traders": self.n_traders,
            "rounds": self.rounds,
            "total_trades": self.total_trades,
            "normalizer": self.normalizer,
            "mape": self.mape,
            "tau": self.tau,
            "market_ranking": self.market_ranking,
            "truth_ranking": self.truth_ranking,
            "closing_marks": self.closing_marks,
            "records": [
                {
                    "trader_id": r.trader_id,
                    "raw": r.raw,
                    "normalizer": r.normalizer,
                    "normalized": r.normalized,
                }
                for r in self.records
            ],
        }


def _mean_sd(values: Sequence[float]) -> tuple[float, float]:
    if not values:
        return float("nan"), float("nan")
    mean = statistics.fmean(values)
    sd = statistics.stdev(values) if len(values) > 1 else 0.0
    return mean, sd


@dataclass
class CellStats:
    design: str
    elasticity: str
    n_runs: int
    mean_mape: float
    sd_mape: float
    mean_tau: float
    sd_tau: float
    mean_normalized: float
    sd_normalized: float
    mean_trades: float

    def to_dict(self) -> dict:
        return self.__dict__.copy()


@dataclass
class SuiteReport:
    cells: dict[str, CellStats] = field(default_factory=dict)
    tau_labels: list[str] = field(default_factory=list)
    tau_matrix: list[list[float | None]] = field(default_factory=list)
    excluded_runs: int = 0

    def to_dict(self) -> dict:
        return {
            "cells": {name: stats.to_dict() for name, stats in self.cells.items()},
            "pairwise_tau": {"labels": self.tau_labels, "mean": self.tau_matrix},
            "excluded_runs": self.excluded_runs,
        }


def pairwise_tau_table(runs: Sequence[RunResult]) -> tuple[list[str], list[list[float | None]]]:
    """Mean rank correlation between every pair of cell rankings, plus the jury.

    Cells are compared seed by seed (same seed, same idea pool) and the per
    seed correlations averaged; only seeds present in both cells count.
    """
    by_cell: dict[str, dict[int, RunResult]] = {}
    for run in runs:
        if run.traded:
            by_cell.setdefault(run.cell, {})[run.seed] = run
    labels = sorted(by_cell) + ["jury"]

    def ranking_for(label: str, seed: int, anchor: RunResult) -> dict[str, int] | None:
        if label == "jury":
            return anchor.truth_ranking
        run = by_cell.get(label, {}).get(seed)
        return run.market_ranking if run is not None else None

    matrix: list[list[float | None]] = []
    for li in labels:
        row: list[float | None] = []
        for lj in labels:
            if li == lj:
                row.append(1.0)
                continue
            taus = []
            seed_pool = by_cell.get(li) or by_cell.get(lj) or {}
            for seed, anchor in sorted(seed_pool.items()):
                ra = ranking_for(li, seed, anchor)
                rb = ranking_for(lj, seed, anchor)
                if ra is None or rb is None:
                    continue
                taus.append(kendall_tau(ra, rb))
            row.append(statistics.fmean(taus) if taus else None)
        matrix.append(row)
    return labels, matrix


def summarize(runs: Sequence[RunResult]) -> SuiteReport:
    """Aggregate run results into per-cell statistics and the tau table.

    Runs in which no trade executed carry no information and are excluded
    (counted in ``excluded_runs``).
    """
    report = SuiteReport()
    traded = [r for r in runs if r.traded]
    report.excluded_runs = len(runs) - len(traded)
    by_cell: dict[str, list[RunResult]] = {}
    for run in traded:
        by_cell.setdefault(run.cell, []).append(run)
    for cell_name in sorted(by_cell):
        cell_runs = by_cell[cell_name]
        mean_mape, sd_mape = _mean_sd([r.mape for r in cell_runs])
        mean_tau, sd_tau = _mean_sd([r.tau for r in cell_runs])
        pooled = [rec.normalized for r in cell_runs for rec in r.records]
        mean_norm, sd_norm = _mean_sd(pooled)
        design, elasticity = cell_name.split("/", 1)
        report.cells[cell_name] = CellStats(
            design=design,
            elasticity=elasticity,
            n_runs=len(cell_runs),
            mean_mape=mean_mape,
            sd_mape=sd_mape,
            mean_tau=mean_tau,
            sd_tau=sd_tau,
            mean_normalized=mean_norm,
            sd_normalized=sd_norm,
            mean_trades=statistics.fmean([r.total_trades for r in cell_runs]),
        )
    report.tau_labels, report.tau_matrix = pairwise_tau_table(traded)
    return report


def format_cell_table(report: SuiteReport) -> str:
    """Design x elasticity grid of cell means, one line per design."""
    elasticities = ["high", "moderate", "low"]
    designs = sorted({stats.design for stats in report.cells.values()})
    extra = sorted(
        {s.elasticity for s in report.cells.values()} - set(elasticities)
    )
    columns = [e for e in elasticities if any(
        s.elasticity == e for s in report.cells.values()
    )] + extra
    lines = []
    header = f"{'design':<10}" + "".join(f"{e:>24}" for e in columns)
    lines.append(header)
    lines.append("-" * len(header))
    for design in designs:
        cells = []
        for e in columns:
            stats = report.cells.get(f"{design}/{e}")
            if stats is None:
                cells.append(f"{'-':>24}")
            else:
                cells.append(
                    f"{stats.mean_normalized:>11.2f} (mape {stats.mean_mape:.2f})"
                    .rjust(24)
                )
        lines.append(f"{design:<10}" + "".join(cells))
    return "\n".join(lines)


def write_performance_csv(path, runs: Sequence[RunResult]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["design", "elasticity", "b", "seed", "trader_id", "raw", "normalizer", "normalized"]
        )
        for run in runs:
            for rec in run.records:
                writer.writerow(
                    [run.design, run.elasticity, run.b, run.seed,
                     rec.trader_id, rec.raw, rec.normalizer, rec.normalized]
                )
