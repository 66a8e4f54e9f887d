# ======================================================================================
# Copyright and other protections apply. Please see the accompanying LICENSE file for
# rights and restrictions governing use of this software. All rights not expressly
# waived or licensed are reserved. If that file is missing or appears to be modified
# from its original, then please contact the author before viewing or using this
# software in any capacity.
# ======================================================================================

import csv
import json
import pathlib

import numpy as np
import pytest

from zogames.games import Game
from zogames.geometry import DgfKind
from zogames.harness import (
    ConfigError,
    ExperimentConfig,
    GameKind,
    GameSpec,
    RunFormat,
    build_game,
    load_run,
    main,
    prepare_game,
    read_run_header,
    replay,
    run_experiment,
    serialize_run,
    summarize,
)
from zogames.learners import Algorithm, Regime, RunRecord

from .gamebank import SET_A, unit_boxes

__all__ = ()


# ---- Data ----------------------------------------------------------------------------


_SCHEDULE = """
[schedule]
c_gamma = 1.0
b_gamma = 2000.0
a_gamma = 0.95
c_delta = 1.0
b_delta = 100.0
a_delta = 0.75
"""


# ---- Functions -----------------------------------------------------------------------


def _ini(
    experiment: str = "",
    game: str = "kind = synthetic\nplayers = 2\n",
    schedule: str = _SCHEDULE,
) -> str:
    return (
        "[experiment]\nname = trial\nalgorithm = omd\niterations = 120\nseeds = 1, 2\n"
        + experiment
        + schedule
        + "\n[game]\n"
        + game
    )


def _write(tmp_path: pathlib.Path, text: str, name: str = "trial.ini") -> pathlib.Path:
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")

    return path


def _record(values: tuple) -> RunRecord:
    n = len(values)

    return RunRecord(
        algorithm="omd",
        dgf="euclidean",
        seed=0,
        initial=(0.5,),
        iterations=tuple(range(1, n + 1)),
        steps=(0.1,) * n,
        radii=(0.01,) * n,
        bases=((0.5,),) * n,
        perturbed=((0.5,),) * n,
        ergodic=((0.5,),) * n,
        metrics={"estimate-norm": values},
    )


# ---- Tests ---------------------------------------------------------------------------


def test_config_defaults_and_round_trip() -> None:
    cfg = ExperimentConfig.from_ini(_ini())
    assert cfg.algorithm is Algorithm.OMD
    assert cfg.dgf is DgfKind.EUCLIDEAN
    assert cfg.regime is Regime.ALMOST_SURE
    assert cfg.metrics == ("distance-to-cp",)
    assert cfg.formats == (RunFormat.CSV,)
    assert cfg.schedule == SET_A
    assert cfg.game == GameSpec(GameKind.SYNTHETIC, 0, (("players", "2"),))
    assert ExperimentConfig.from_ini(cfg.to_ini()) == cfg
    assert ExperimentConfig.from_ini(cfg.to_ini()).config_hash == cfg.config_hash

    full = ExperimentConfig.from_ini(
        _ini(
            "dgf = negentropy\nregime = strong-rate\nmetrics = merit, estimate-norm\n"
            "formats = csv, json-lines\nsvg = yes\nworkers = 3\nstrict = on\nseeds = 1-3, 9\n",
            "kind = thermal\nseed = 4\nbuildings = 2\nhorizon = 3\n",
        ).replace("seeds = 1, 2\n", "")
    )
    assert full.seeds == (1, 2, 3, 9)
    assert full.formats == (RunFormat.CSV, RunFormat.JSON_LINES)
    assert (full.svg, full.strict, full.workers) == (True, True, 3)
    assert full.game.seed == 4
    assert ExperimentConfig.from_ini(full.to_ini()) == full
    assert full.config_hash != cfg.config_hash


def test_config_errors_name_their_location() -> None:
    with pytest.raises(ConfigError) as info:
        ExperimentConfig.from_ini(_ini(game="kind = synthetic\nplayer = 2\n"), path="t.ini")

    assert (info.value.path, info.value.section, info.value.key) == ("t.ini", "game", "player")
    assert info.value.line == 17
    assert str(info.value) == "t.ini:17: [game] player: unknown key"

    with pytest.raises(ConfigError) as info:
        ExperimentConfig.from_ini(_ini(schedule=_SCHEDULE.replace("b_gamma = 2000.0", "b_gamma = lots")))

    assert (info.value.section, info.value.key, info.value.line) == ("schedule", "b_gamma", 9)

    with pytest.raises(ConfigError) as info:
        ExperimentConfig.from_ini(_ini(schedule=_SCHEDULE.replace("0.95", "1.5")))

    assert info.value.section == "schedule"

    with pytest.raises(ConfigError) as info:
        ExperimentConfig.from_ini(_ini().replace("iterations = 120\n", ""))

    assert (info.value.section, info.value.key) == ("experiment", "iterations")

    for broken in (
        _ini("svg = maybe\n"),
        _ini("formats = xml\n"),
        _ini().replace("algorithm = omd", "algorithm = sgd"),
        _ini(game="kind = chess\n"),
        _ini() + "\n[extra]\nkey = 1\n",
        "not an ini file",
    ):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_ini(broken)


def test_seeds_are_required() -> None:
    with pytest.raises(ConfigError) as info:
        ExperimentConfig.from_ini(_ini().replace("seeds = 1, 2", "seeds ="))

    assert info.value.key == "seeds"
    cfg = ExperimentConfig.from_ini(_ini())

    with pytest.raises(ConfigError, match="at least one seed required"):
        ExperimentConfig(cfg.name, cfg.algorithm, cfg.dgf, cfg.iterations, (), cfg.schedule, cfg.game)


def test_missing_config_file(tmp_path: pathlib.Path) -> None:
    with pytest.raises(ConfigError):
        ExperimentConfig.load(tmp_path / "absent.ini")


def test_build_quadratic_game() -> None:
    spec = GameSpec(
        GameKind.QUADRATIC,
        params=(("m", "1, 0; 0, 1"), ("q", "-0.3, -0.6"), ("lower", "0, 0"), ("upper", "1, 1")),
    )
    g = build_game(spec)
    assert g.dims == (1, 1)
    assert g.critical_point.tolist() == pytest.approx([0.3, 0.6])

    with pytest.raises(ConfigError):
        build_game(GameSpec(GameKind.QUADRATIC, params=(("m", "1"),)))


def test_prepare_game_solves_for_the_critical_point() -> None:
    cfg = ExperimentConfig.from_ini(_ini(game="kind = thermal\nbuildings = 2\nhorizon = 1\n"))
    g = prepare_game(cfg)
    assert g.critical_point is not None
    assert g.contains(g.critical_point)

    with pytest.raises(ConfigError):
        prepare_game(ExperimentConfig.from_ini(_ini("metrics = potential-gap\n")))


def test_csv_trace_layout(tmp_path: pathlib.Path) -> None:
    cfg = ExperimentConfig.from_ini(_ini().replace("iterations = 120", "iterations = 2"))
    result = run_experiment(cfg, tmp_path)
    lines = (result.directory / "seed-1.csv").read_text(encoding="utf-8").splitlines()
    assert len(lines) == 3
    assert lines[0] == "iteration,distance-to-cp"
    assert [line.split(",")[0] for line in lines[1:]] == ["1", "2"]
    assert sorted(p.name for p in result.directory.iterdir()) == [
        "seed-1.csv",
        "seed-2.csv",
        "summary-distance-to-cp.csv",
    ]


def test_csv_keeps_full_precision(tmp_path: pathlib.Path) -> None:
    path = serialize_run(_record((1.0 / 3.0, 2.0 / 3.0)), tmp_path / "r.csv")

    with path.open(newline="", encoding="utf-8") as f:
        rows = list(csv.reader(f))

    assert float(rows[1][1]) == 1.0 / 3.0
    assert float(rows[2][1]) == 2.0 / 3.0


def test_json_lines_round_trip(tmp_path: pathlib.Path) -> None:
    record = _record((1.0 / 3.0, 0.25, 1e-300))
    path = serialize_run(record, tmp_path / "r.jsonl", RunFormat.JSON_LINES, "[experiment]\n")
    header = read_run_header(path)
    assert header["config"] == "[experiment]\n"
    assert header["metrics"] == ["estimate-norm"]
    assert load_run(path) == record

    with pytest.raises(ValueError):
        read_run_header(serialize_run(record, tmp_path / "r.csv"))


def test_reruns_are_byte_identical(tmp_path: pathlib.Path) -> None:
    cfg = ExperimentConfig.from_ini(_ini("metrics = distance-to-cp, merit\n"))
    first = run_experiment(cfg, tmp_path / "a")
    second = run_experiment(cfg, tmp_path / "b")

    for name in ("seed-1.csv", "seed-2.csv", "summary-merit.csv"):
        assert (first.directory / name).read_bytes() == (second.directory / name).read_bytes()


def test_parallel_runs_match_serial_runs(tmp_path: pathlib.Path, monkeypatch: pytest.MonkeyPatch) -> None:
    cfg = ExperimentConfig.from_ini(_ini())
    serial = run_experiment(cfg, tmp_path / "serial", workers=1)
    monkeypatch.setenv("ZOGAMES_WORKERS", "2")
    parallel = run_experiment(cfg, tmp_path / "parallel")
    assert serial.records == parallel.records


def test_output_directory_from_environment(tmp_path: pathlib.Path, monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.setenv("ZOGAMES_OUTPUT_DIR", str(tmp_path))
    result = run_experiment(ExperimentConfig.from_ini(_ini().replace("iterations = 120", "iterations = 5")))
    assert result.directory == tmp_path / "trial"


def test_summary_envelope(tmp_path: pathlib.Path) -> None:
    cfg = ExperimentConfig.from_ini(_ini("seeds = 1-4\n").replace("seeds = 1, 2\n", ""))
    result = run_experiment(cfg, tmp_path)
    (summary,) = result.summaries
    assert summary.iterations == result.records[0].iterations
    assert np.all(summary.lower <= summary.mean + 1e-15)
    assert np.all(summary.mean <= summary.upper + 1e-15)

    with pytest.raises(ValueError):
        summarize([], "distance-to-cp")


def test_summary_svg(tmp_path: pathlib.Path) -> None:
    pytest.importorskip("matplotlib")
    cfg = ExperimentConfig.from_ini(_ini("svg = yes\n"))
    result = run_experiment(cfg, tmp_path)
    assert (result.directory / "summary-distance-to-cp.svg").read_text(encoding="utf-8").lstrip().startswith("<?xml")


def test_validate_checks_oracles_against_finite_differences(
    tmp_path: pathlib.Path,
    capsys: pytest.CaptureFixture,
    monkeypatch: pytest.MonkeyPatch,
) -> None:
    good = _write(tmp_path, _ini())
    assert main("validate", str(good)) == 0
    assert "pseudogradient vs finite differences: PASS" in capsys.readouterr().out

    mislabeled = Game(
        "mislabeled",
        unit_boxes([1]),
        lambda x: 0.5 * x * x - 0.3 * x,
        pseudogradient_fn=lambda x: 2.0 * x,
    )
    monkeypatch.setattr("zogames.harness.build_game", lambda spec: mislabeled)
    assert main("validate", str(good)) == 3
    out = capsys.readouterr().out
    assert "almost-sure: PASS" in out
    assert "pseudogradient vs finite differences: FAIL" in out



def test_replay(tmp_path: pathlib.Path) -> None:
    cfg = ExperimentConfig.from_ini(_ini("formats = json-lines\nmetrics = distance-to-cp, estimate-norm\n"))
    result = run_experiment(cfg, tmp_path)
    path = result.directory / "seed-2.jsonl"
    assert read_run_header(path)["config_hash"] == cfg.config_hash
    assert replay(path)

    lines = path.read_text(encoding="utf-8").splitlines()
    row = json.loads(lines[5])
    row["base"][0] += 1e-9
    lines[5] = json.dumps(row)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    assert not replay(path)


def test_command_line(tmp_path: pathlib.Path, capsys: pytest.CaptureFixture) -> None:
    good = _write(tmp_path, _ini("formats = csv, json-lines\n"))
    assert main("validate", str(good)) == 0
    assert "almost-sure: PASS" in capsys.readouterr().out

    assert main("run", str(good), "-o", str(tmp_path / "out")) == 0
    directory = pathlib.Path(capsys.readouterr().out.strip())
    assert (directory / "seed-1.jsonl").is_file()
    assert main("replay", str(directory / "seed-1.jsonl")) == 0
    assert main("--log-level", "ERROR", "replay", str(directory / "seed-1.csv")) == 3

    assert main("probe", str(good), "-n", "200") == 0
    assert "violations: 0" in capsys.readouterr().out
    assert main("solve", str(good)) == 0
    assert "converged: True" in capsys.readouterr().out
    assert main("solve", str(good), "--method", "projected-descent") == 0
    assert "converged: True" in capsys.readouterr().out

    failing = _write(tmp_path, _ini(schedule=_SCHEDULE.replace("0.75", "0.95")), "failing.ini")
    assert main("validate", str(failing)) == 3
    assert "FAIL" in capsys.readouterr().out

    broken = _write(tmp_path, _ini(game="kind = synthetic\nplayer = 2\n"), "broken.ini")
    assert main("run", str(broken)) == 2
    assert "broken.ini:17: [game] player: unknown key" in capsys.readouterr().err
    assert main("validate", str(tmp_path / "absent.ini")) == 2

    portfolio = _write(tmp_path, _ini(game="kind = portfolio\nmu = 0.1, 0.2\nsigma = 1, 0; 0, 1\nr = 0.12\n"), "p.ini")
    assert main("probe", str(portfolio), "-n", "100") == 0
