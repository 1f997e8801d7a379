"""Command line entry point (installed as ``pm``).

Failures exit nonzero and print one machine-readable JSON object on
stderr, so scripted callers never have to parse tracebacks.
"""

from __future__ import annotations

import functools
import json
import secrets
import sys

import click

from .engine import Engine
from .errors import ConfigError, MarketError
from .metrics import format_cell_table
from .service import MarketService, ServiceConfig, create_app
from .simulator import ExperimentConfig, run_experiment, run_suite
from .venue import DEFAULT_TOP_K, generate_ideas, write_ideas_csv


def _cli_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except MarketError as exc:
            click.echo(json.dumps(exc.to_dict()), err=True)
            sys.exit(1)
        except (ValueError, OSError) as exc:
            click.echo(json.dumps({"error": "invalid_input", "message": str(exc)}), err=True)
            sys.exit(1)

    return wrapper


def _parse_mix(text: str) -> dict[str, float]:
    mix: dict[str, float] = {}
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise ConfigError(f"bad mix entry {part!r}, expected name=fraction")
        name, _, frac = part.partition("=")
        try:
            mix[name.strip()] = float(frac)
        except ValueError:
            raise ConfigError(f"bad fraction in mix entry {part!r}") from None
    return mix


@click.group()
@click.version_option(package_name="artifact", prog_name="pm")
def main():
    """Prediction-market platform: simulate, replay, serve."""


@main.command()
@click.option("--design", type=click.Choice(["single", "multi"]), default="multi", show_default=True)
@click.option("--elasticity", type=click.Choice(["high", "moderate", "low"]), default=None,
              help="Liquidity preset; mutually exclusive with --b.")
@click.option("--b", "b_value", type=float, default=None, help="Explicit liquidity parameter.")
@click.option("--agents", type=int, default=60, show_default=True)
@click.option("--rounds", type=int, default=30, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--ideas", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Idea pool CSV; omitted = synthetic 24-idea pool.")
@click.option("--k", type=int, default=DEFAULT_TOP_K, show_default=True)
@click.option("--noise-sd", type=float, default=0.5, show_default=True)
@click.option("--alpha", type=float, default=0.65, show_default=True,
              help="Probability-weighting exponent for favorite_longshot agents.")
@click.option("--mix", default="noisy_signal=1", show_default=True,
              help="Strategy mix, e.g. 'noisy_signal=0.8,random=0.2'.")
@click.option("--trade-step", type=int, default=10, show_default=True)
@click.option("--reserve", type=float, default=0.0, show_default=True,
              help="Cash floor agents will not trade through.")
@click.option("--out", type=click.Path(file_okay=False), default=None,
              help="Directory for events.jsonl, report.json, performance.csv.")
@_cli_errors
def simulate(design, elasticity, b_value, agents, rounds, seed, ideas, k,
             noise_sd, alpha, mix, trade_step, reserve, out):
    """Run one market to settlement and print its scores."""
    if b_value is None and elasticity is None:
        elasticity = "moderate"
    cfg = ExperimentConfig(
        design=design, elasticity=elasticity, b=b_value, n_agents=agents,
        rounds=rounds, seed=seed, k=k, noise_sd=noise_sd, distortion_alpha=alpha,
        agent_mix=_parse_mix(mix), trade_step=trade_step, budget_reserve=reserve,
        ideas_csv=ideas,
    )
    result = run_experiment(cfg, out)
    summary = {
        "design": result.design,
        "elasticity": result.elasticity,
        "b": result.b,
        "seed": result.seed,
        "total_trades": result.total_trades,
        "normalizer": result.normalizer,
        "mape": result.mape,
        "tau": result.tau,
        "market_top_k": sorted(
            i for i, place in result.market_ranking.items() if place <= cfg.k
        ),
    }
    if out:
        summary["out"] = out
    click.echo(json.dumps(summary, indent=2))


@main.command()
@click.option("--seeds", type=int, default=20, show_default=True,
              help="Number of seeds per cell (0..N-1).")
@click.option("--agents", type=int, default=None,
              help="Fixed crowd size; default scales with each elasticity preset.")
@click.option("--rounds", type=int, default=30, show_default=True)
@click.option("--noise-sd", type=float, default=0.5, show_default=True)
@click.option("--alpha", type=float, default=0.65, show_default=True)
@click.option("--mix", default="noisy_signal=1", show_default=True)
@click.option("--ideas", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--k", type=int, default=DEFAULT_TOP_K, show_default=True)
@click.option("--out", type=click.Path(file_okay=False), default=None,
              help="Directory for per-run logs and the suite report.")
@_cli_errors
def suite(seeds, agents, rounds, noise_sd, alpha, mix, ideas, k, out):
    """Run the full design x elasticity factorial, every cell on the same seeds."""
    base = ExperimentConfig(
        rounds=rounds, noise_sd=noise_sd, distortion_alpha=alpha,
        agent_mix=_parse_mix(mix), ideas_csv=ideas, k=k,
        n_agents=agents if agents is not None else 60,
    )
    done = {"count": 0}

    def progress(run):
        done["count"] += 1
        click.echo(
            f"[{done['count']:3d}] {run.cell:<16} seed={run.seed:<3d} "
            f"trades={run.total_trades:<5d} mape={run.mape if run.mape is None else round(run.mape, 3)}",
            err=True,
        )

    report, _runs = run_suite(
        range(seeds), base, out_dir=out,
        scale_agents=agents is None, progress=progress,
    )
    click.echo(format_cell_table(report))
    click.echo("")
    click.echo("pairwise rank correlation (mean tau):")
    labels = report.tau_labels
    click.echo(" " * 18 + "".join(f"{l:>16}" for l in labels))
    for label, row in zip(labels, report.tau_matrix):
        cells = "".join(
            f"{'--' if v is None else format(v, '.3f'):>16}" for v in row
        )
        click.echo(f"{label:<18}{cells}")
    if out:
        click.echo(f"\nreport written to {out}/suite_report.json")


@main.command()
@click.argument("eventlog", type=click.Path(exists=True, dir_okay=False))
@_cli_errors
def replay(eventlog):
    """Rebuild state from an event log and print the final snapshot."""
    engine = Engine.replay(eventlog)
    click.echo(json.dumps(engine.snapshot(), indent=2))


@main.command("make-ideas")
@click.option("--n", type=int, default=24, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@_cli_errors
def make_ideas(n, seed, out):
    """Write a synthetic stratified idea pool CSV."""
    ideas, scores = generate_ideas(n, seed)
    write_ideas_csv(out, ideas, scores)
    click.echo(json.dumps({"written": out, "n_ideas": n}))


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="YAML config; environment variables override it.")
@click.option("--port", type=int, default=None, help="Override the listen port.")
@click.option("--gen-codes", type=int, default=0, show_default=True,
              help="Generate this many fresh activation codes and print them.")
@_cli_errors
def serve(config_path, port, gen_codes):
    """Start the trading service."""
    import uvicorn

    cfg = ServiceConfig.load(config_path)
    if port is not None:
        cfg.port = port
    service = MarketService(cfg)
    if cfg.admin_token is None:
        click.echo(f"admin token: {service.admin_token}", err=True)
    if gen_codes > 0:
        codes = [secrets.token_urlsafe(8) for _ in range(gen_codes)]
        service.add_codes(codes)
        for code in codes:
            click.echo(f"activation code: {code}", err=True)
    app = create_app(service=service)
    uvicorn.run(app, host=cfg.host, port=cfg.port, log_level="info")


if __name__ == "__main__":
    main()
