import json

from click.testing import CliRunner

from ideamarket.cli import main


def test_simulate_prints_summary(tmp_path):
    runner = CliRunner()
    out = tmp_path / "run"
    result = runner.invoke(main, [
        "simulate", "--agents", "8", "--rounds", "3", "--seed", "1",
        "--out", str(out),
    ])
    assert result.exit_code == 0, result.output
    summary = json.loads(result.output)
    assert summary["design"] == "multi"
    assert summary["elasticity"] == "moderate"
    assert summary["total_trades"] > 0
    assert len(summary["market_top_k"]) == 5
    assert (out / "events.jsonl").exists()


def test_simulate_rejects_bad_mix():
    runner = CliRunner()
    result = runner.invoke(main, ["simulate", "--mix", "zen"])
    assert result.exit_code == 1
    err = json.loads(result.stderr)
    assert err["error"] == "config_error"


def test_make_ideas_then_simulate_from_csv(tmp_path):
    runner = CliRunner()
    csv_path = tmp_path / "pool.csv"
    result = runner.invoke(main, [
        "make-ideas", "--n", "12", "--seed", "2", "--out", str(csv_path),
    ])
    assert result.exit_code == 0, result.output
    assert json.loads(result.output) == {"written": str(csv_path), "n_ideas": 12}

    result = runner.invoke(main, [
        "simulate", "--agents", "6", "--rounds", "2", "--ideas", str(csv_path),
        "--k", "3",
    ])
    assert result.exit_code == 0, result.output
    assert len(json.loads(result.output)["market_top_k"]) == 3


def test_replay_round_trips_simulation_log(tmp_path):
    runner = CliRunner()
    out = tmp_path / "run"
    assert runner.invoke(main, [
        "simulate", "--agents", "6", "--rounds", "2", "--out", str(out),
    ]).exit_code == 0

    result = runner.invoke(main, ["replay", str(out / "events.jsonl")])
    assert result.exit_code == 0, result.output
    snapshot = json.loads(result.output)
    assert snapshot["venues"]["market"]["settled"] is True
    assert snapshot["seq"] > 0


def test_replay_reports_corruption(tmp_path):
    runner = CliRunner()
    out = tmp_path / "run"
    assert runner.invoke(main, [
        "simulate", "--agents", "6", "--rounds", "2", "--out", str(out),
    ]).exit_code == 0
    log = out / "events.jsonl"
    lines = log.read_text().splitlines()
    del lines[2]  # open a gap
    log.write_text("\n".join(lines) + "\n")

    result = runner.invoke(main, ["replay", str(log)])
    assert result.exit_code == 1
    err = json.loads(result.stderr)
    assert err["error"] == "replay_error"
    assert "gap" in err["message"]


def test_suite_smoke(tmp_path):
    runner = CliRunner()
    result = runner.invoke(main, [
        "suite", "--seeds", "1", "--agents", "6", "--rounds", "2",
        "--out", str(tmp_path / "suite"),
    ])
    assert result.exit_code == 0, result.output
    assert "single/high" in result.output
    assert "jury" in result.output
    assert (tmp_path / "suite" / "suite_report.json").exists()
