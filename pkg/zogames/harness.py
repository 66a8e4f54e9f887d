# ======================================================================================
# Copyright and other protections apply. Please see the accompanying LICENSE file for
# rights and restrictions governing use of this software. All rights not expressly
# waived or licensed are reserved. If that file is missing or appears to be modified
# from its original, then please contact the author before viewing or using this
# software in any capacity.
# ======================================================================================

r"""
Experiment configuration files, replicated runs across seeds, run persistence and the
``zogames`` command line.
"""

import argparse
import configparser
import csv
import dataclasses
import enum
import hashlib
import json
import logging
import os
import pathlib
import re
import sys
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable, Dict, Iterable, List, Mapping, Optional, Tuple, Union

import numpy as np

from .analysis import SolveMethod, monotonicity_probe, solve_cp
from .estimator import derive_stream
from .games import (
    Game,
    Regularity,
    ThermalParams,
    check_potential,
    check_pseudogradient,
    make_portfolio_game,
    make_quadratic_game,
    make_synthetic_quadratic_game,
    make_thermal_game,
    sample_lse_game,
    sample_portfolio_game,
    sample_thermal_params,
)
from .geometry import Dgf, DgfKind, FeasibleSet
from .learners import Algorithm, Regime, RunRecord, Schedule, run_learning, validate_schedule
from .metrics import METRICS, check_metrics

__all__ = (
    "ConfigError",
    "ExperimentConfig",
    "ExperimentResult",
    "GameKind",
    "GameSpec",
    "PARSER",
    "RunFormat",
    "Summary",
    "build_game",
    "load_run",
    "main",
    "prepare_game",
    "read_run_header",
    "replay",
    "run_experiment",
    "serialize_run",
    "summarize",
    "write_summary",
)

_LOGGER = logging.getLogger(__name__)

_PathT = Union[str, "os.PathLike[str]"]


# ---- Types ---------------------------------------------------------------------------


class GameKind(str, enum.Enum):
    QUADRATIC = "quadratic"
    SYNTHETIC = "synthetic"
    PORTFOLIO = "portfolio"
    LSE = "lse"
    THERMAL = "thermal"


class RunFormat(str, enum.Enum):
    CSV = "csv"
    JSON_LINES = "json-lines"

    @property
    def suffix(self) -> str:
        return ".csv" if self is RunFormat.CSV else ".jsonl"


class ConfigError(ValueError):
    r"""
    A problem with an experiment configuration, located as precisely as possible.

    ``` python
    >>> from zogames.harness import ConfigError
    >>> print(ConfigError("not a number", path="x.ini", section="schedule", key="c_gamma", line=4))
    x.ini:4: [schedule] c_gamma: not a number

    ```
    """

    def __init__(
        self,
        message: str,
        path: Optional[str] = None,
        section: Optional[str] = None,
        key: Optional[str] = None,
        line: Optional[int] = None,
    ):
        super().__init__(message)
        self.message = message
        self.path = path
        self.section = section
        self.key = key
        self.line = line

    def __str__(self) -> str:
        where = ""

        if self.path is not None:
            where = self.path if self.line is None else f"{self.path}:{self.line}"
            where += ": "

        if self.section is not None:
            where += f"[{self.section}] "

        if self.key is not None:
            where += f"{self.key}: "

        return where + self.message


# ---- Data ----------------------------------------------------------------------------


_EXPERIMENT_KEYS = (
    "name",
    "algorithm",
    "dgf",
    "iterations",
    "seeds",
    "metrics",
    "regime",
    "output",
    "formats",
    "svg",
    "workers",
    "strict",
)
_SCHEDULE_KEYS = ("c_gamma", "b_gamma", "a_gamma", "c_delta", "b_delta", "a_delta")
_GAME_KEYS: Dict[GameKind, Tuple[str, ...]] = {
    GameKind.QUADRATIC: ("m", "q", "dims", "lower", "upper", "action_margin"),
    GameKind.SYNTHETIC: ("players", "dim", "modulus"),
    GameKind.PORTFOLIO: ("assets", "mu", "sigma", "r"),
    GameKind.LSE: ("features", "samples", "w_bar", "lambda_bar"),
    GameKind.THERMAL: (
        "buildings",
        "horizon",
        "comfort_lower",
        "comfort_upper",
        "capacity",
        "price_lower",
        "price_upper",
        "demand_rate",
        "smoothing",
    ),
}
_TRUTHY = ("1", "on", "t", "true", "y", "yes")
_FALSY = ("0", "off", "f", "false", "n", "no")
# residual target for critical points solved on the fly; polytope projections settle near 1e-10
_CP_TOL = 1e-8
# relative error allowed between analytic oracles and central differences
_ORACLE_TOL = 1e-5


# ---- Classes -------------------------------------------------------------------------


@dataclass(frozen=True)
class GameSpec:
    r"""
    A game kind, the seed its random instances derive from and its kind-specific
    parameters as written in the configuration.
    """

    kind: GameKind
    seed: int = 0
    params: Tuple[Tuple[str, str], ...] = ()

    def get(self, key: str, default: Optional[str] = None) -> Optional[str]:
        return dict(self.params).get(key, default)


@dataclass(frozen=True)
class ExperimentConfig:
    r"""
    One experiment: a game, an algorithm with its schedule and the seeds to replicate
    over.
    Configurations parse from and serialize to INI text; serialization is canonical so
    parsing what [``to_ini``][zogames.harness.ExperimentConfig.to_ini] wrote gives back
    an equal configuration.
    """

    name: str
    algorithm: Algorithm
    dgf: DgfKind
    iterations: int
    seeds: Tuple[int, ...]
    schedule: Schedule
    game: GameSpec
    metrics: Tuple[str, ...] = ("distance-to-cp",)
    regime: Regime = Regime.ALMOST_SURE
    output: str = "runs"
    formats: Tuple[RunFormat, ...] = (RunFormat.CSV,)
    svg: bool = False
    workers: int = 1
    strict: bool = False

    def __post_init__(self) -> None:
        if not self.seeds:
            raise ConfigError("at least one seed required", section="experiment", key="seeds")

        if self.iterations < 0:
            raise ConfigError("must be nonnegative", section="experiment", key="iterations")

        if self.workers < 1:
            raise ConfigError("must be positive", section="experiment", key="workers")

    @property
    def dgf_object(self) -> Dgf:
        return Dgf.euclidean() if self.dgf is DgfKind.EUCLIDEAN else Dgf.negentropy()

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(self.to_ini().encode("utf-8")).hexdigest()[:16]

    @classmethod
    def load(cls, path: _PathT) -> "ExperimentConfig":
        p = pathlib.Path(path)

        try:
            text = p.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read configuration ({exc.strerror})", path=str(p)) from exc

        return cls.from_ini(text, path=str(p))

    @classmethod
    def from_ini(cls, text: str, path: str = "<string>") -> "ExperimentConfig":
        r"""
        ``` python
        >>> from zogames.harness import ExperimentConfig
        >>> text = '''
        ... [experiment]
        ... name = demo
        ... algorithm = omd
        ... iterations = 100
        ... seeds = 1, 2, 3
        ...
        ... [schedule]
        ... c_gamma = 1.0
        ... b_gamma = 2000.0
        ... a_gamma = 0.95
        ... c_delta = 1.0
        ... b_delta = 100.0
        ... a_delta = 0.75
        ...
        ... [game]
        ... kind = synthetic
        ... players = 2
        ... '''
        >>> cfg = ExperimentConfig.from_ini(text)
        >>> cfg.seeds, cfg.game.get("players")
        ((1, 2, 3), '2')
        >>> ExperimentConfig.from_ini(cfg.to_ini()) == cfg
        True
        >>> ExperimentConfig.from_ini(text.replace("players", "player"), path="demo.ini")
        Traceback (most recent call last):
          ...
        zogames.harness.ConfigError: demo.ini:18: [game] player: unknown key

        ```
        """
        parser = configparser.ConfigParser(interpolation=None, default_section="\0")
        parser.optionxform = str  # type: ignore [assignment,method-assign]

        try:
            parser.read_string(text, source=path)
        except configparser.Error as exc:
            raise ConfigError(str(exc).splitlines()[0], path=path, line=getattr(exc, "lineno", None)) from exc

        reader = _Reader(parser, text, path)

        for section in parser.sections():
            if section not in ("experiment", "schedule", "game"):
                raise ConfigError("unknown section", path, section, line=reader.line(section))

        reader.reject_unknown("experiment", _EXPERIMENT_KEYS)
        reader.reject_unknown("schedule", _SCHEDULE_KEYS)
        kind = reader.get("game", "kind", GameKind)
        reader.reject_unknown("game", ("kind", "seed") + _GAME_KEYS[kind])
        game = GameSpec(
            kind,
            reader.get("game", "seed", int, 0),
            tuple(
                (key, parser.get("game", key))
                for key in parser.options("game")
                if key not in ("kind", "seed")
            ),
        )
        schedule = reader.call(
            "schedule",
            None,
            lambda: Schedule(*(reader.get("schedule", key, float) for key in _SCHEDULE_KEYS)),
        )

        return reader.call(
            "experiment",
            None,
            lambda: cls(
                name=reader.get("experiment", "name", str, "experiment"),
                algorithm=reader.get("experiment", "algorithm", Algorithm),
                dgf=reader.get("experiment", "dgf", DgfKind, DgfKind.EUCLIDEAN),
                iterations=reader.get("experiment", "iterations", int),
                seeds=reader.get("experiment", "seeds", _parse_seeds),
                schedule=schedule,
                game=game,
                metrics=reader.get("experiment", "metrics", _parse_names, ("distance-to-cp",)),
                regime=reader.get("experiment", "regime", Regime, Regime.ALMOST_SURE),
                output=reader.get("experiment", "output", str, "runs"),
                formats=reader.get("experiment", "formats", _parse_formats, (RunFormat.CSV,)),
                svg=reader.get("experiment", "svg", _parse_bool, False),
                workers=reader.get("experiment", "workers", int, 1),
                strict=reader.get("experiment", "strict", _parse_bool, False),
            ),
        )

    def to_ini(self) -> str:
        s = self.schedule
        lines = [
            "[experiment]",
            f"name = {self.name}",
            f"algorithm = {self.algorithm.value}",
            f"dgf = {self.dgf.value}",
            f"iterations = {self.iterations}",
            f"seeds = {', '.join(str(seed) for seed in self.seeds)}",
            f"metrics = {', '.join(self.metrics)}",
            f"regime = {self.regime.value}",
            f"output = {self.output}",
            f"formats = {', '.join(f.value for f in self.formats)}",
            f"svg = {'yes' if self.svg else 'no'}",
            f"workers = {self.workers}",
            f"strict = {'yes' if self.strict else 'no'}",
            "",
            "[schedule]",
        ]
        lines.extend(f"{key} = {getattr(s, key)!r}" for key in _SCHEDULE_KEYS)
        lines.extend(["", "[game]", f"kind = {self.game.kind.value}", f"seed = {self.game.seed}"])
        lines.extend(f"{key} = {value}" for key, value in self.game.params)

        return "\n".join(lines) + "\n"


@dataclass(frozen=True, eq=False)
class Summary:
    r"""
    Per-iteration mean and min/max envelope of one metric across seeds.
    """

    metric: str
    iterations: Tuple[int, ...]
    mean: np.ndarray
    lower: np.ndarray
    upper: np.ndarray


@dataclass(frozen=True, eq=False)
class ExperimentResult:
    config: ExperimentConfig
    records: Tuple[RunRecord, ...]
    summaries: Tuple[Summary, ...]
    directory: pathlib.Path


class _Reader:
    def __init__(self, parser: configparser.ConfigParser, text: str, path: str):
        self._parser = parser
        self._lines = text.splitlines()
        self._path = path

    def line(self, section: str, key: Optional[str] = None) -> Optional[int]:
        current = None

        for number, raw in enumerate(self._lines, start=1):
            stripped = raw.strip()
            header = re.fullmatch(r"\[([^\]]+)\]", stripped)

            if header:
                current = header.group(1).strip()

                if key is None and current == section:
                    return number
            elif key is not None and current == section:
                match = re.match(r"([^=:]+?)\s*[=:]", stripped)

                if match and match.group(1) == key:
                    return number

        return None

    def reject_unknown(self, section: str, known: Iterable[str]) -> None:
        if not self._parser.has_section(section):
            return

        for key in self._parser.options(section):
            if key not in known:
                raise ConfigError("unknown key", self._path, section, key, self.line(section, key))

    def get(self, section: str, key: str, convert: Callable[[str], Any], *default: Any) -> Any:
        if not self._parser.has_option(section, key):
            if default:
                return default[0]

            raise ConfigError("missing required key", self._path, section, key, self.line(section))

        raw = self._parser.get(section, key)

        return self.call(section, key, lambda: convert(raw.strip()))

    def call(self, section: str, key: Optional[str], fn: Callable[[], Any]) -> Any:
        try:
            return fn()
        except ConfigError as exc:
            if exc.path is not None:
                raise

            raise ConfigError(
                exc.message,
                self._path,
                exc.section or section,
                exc.key or key,
                self.line(exc.section or section, exc.key or key),
            ) from exc
        except ValueError as exc:
            raise ConfigError(str(exc), self._path, section, key, self.line(section, key)) from exc


# ---- Functions -----------------------------------------------------------------------


def build_game(spec: GameSpec) -> Game:
    r"""
    Constructs the game a [``GameSpec``][zogames.harness.GameSpec] describes.
    Random instances derive from ``spec.seed``.
    """

    def number(key: str, default: float) -> float:
        raw = spec.get(key)

        return default if raw is None else float(raw)

    def integer(key: str, default: int) -> int:
        raw = spec.get(key)

        return default if raw is None else int(raw)

    def required(key: str) -> str:
        raw = spec.get(key)

        if raw is None:
            raise ConfigError(f"{spec.kind.value} games need this key", section="game", key=key)

        return raw

    if spec.kind is GameKind.SYNTHETIC:
        return make_synthetic_quadratic_game(
            integer("players", 5), integer("dim", 2), number("modulus", 0.5), spec.seed
        )

    if spec.kind is GameKind.PORTFOLIO:
        if spec.get("mu") is None:
            return sample_portfolio_game(integer("assets", 6), spec.seed)

        return make_portfolio_game(
            _parse_floats(required("mu")),
            _parse_matrix(required("sigma")),
            float(required("r")),
        )

    if spec.kind is GameKind.LSE:
        return sample_lse_game(
            spec.seed,
            integer("features", 5),
            integer("samples", 10),
            number("w_bar", 5.0),
            number("lambda_bar", 5.0),
        )

    if spec.kind is GameKind.THERMAL:
        params: ThermalParams = sample_thermal_params(
            spec.seed,
            integer("buildings", 10),
            integer("horizon", 2),
            (number("comfort_lower", 1.0), number("comfort_upper", 4.0)),
            number("capacity", 3.0),
            (number("price_lower", 0.5), number("price_upper", 1.0)),
            number("demand_rate", 1.0),
            number("smoothing", 20.0),
        )

        return make_thermal_game(params)

    m = _parse_matrix(required("m"))
    q = _parse_floats(required("q"))
    dims = [int(d) for d in _parse_floats(spec.get("dims") or ", ".join(["1"] * len(q)))]
    lower = _parse_floats(required("lower"))
    upper = _parse_floats(required("upper"))
    offsets = np.concatenate(([0], np.cumsum(dims)))
    sets = [
        FeasibleSet.box(lower[lo:hi], upper[lo:hi]) for lo, hi in zip(offsets[:-1], offsets[1:])
    ]

    return make_quadratic_game(m, q, sets, number("action_margin", 0.25))


def prepare_game(config: ExperimentConfig) -> Game:
    r"""
    Builds the configured game and, when a requested metric needs the critical point
    and the game does not know it, solves for it with
    [``solve_cp``][zogames.analysis.solve_cp].
    """
    game = build_game(config.game)
    needs_cp = any(
        METRICS[name].needs_critical_point for name in config.metrics if name in METRICS
    )

    if needs_cp and game.critical_point is None:
        if not game.has_pseudogradient:
            raise ConfigError(
                f"metrics need a critical point that {game.name} cannot provide",
                section="experiment",
                key="metrics",
            )

        solution = solve_cp(game, tol=_CP_TOL)
        _LOGGER.info(
            "solved %s for its critical point (residual %.3e)", game.name, solution.residual
        )
        game = game.with_critical_point(solution.point)

    try:
        check_metrics(config.metrics, game)
    except ValueError as exc:
        raise ConfigError(str(exc), section="experiment", key="metrics") from exc

    return game


def run_experiment(
    config: ExperimentConfig,
    output_dir: Optional[_PathT] = None,
    workers: Optional[int] = None,
) -> ExperimentResult:
    r"""
    Runs every seed of *config* (concurrently when more than one worker is allowed),
    writes one trace per seed and format plus a summary CSV per metric, and returns the
    records in seed order.

    The output directory is *output_dir*, else ``ZOGAMES_OUTPUT_DIR``, else the
    configured one; the experiment's files go in a subdirectory named after it.
    """
    game = prepare_game(config)
    critical_point = None if game.critical_point is None else tuple(game.critical_point.tolist())
    pool_size = _resolve_workers(config, workers)
    seeds = list(config.seeds)

    if pool_size > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=min(pool_size, len(seeds))) as executor:
            records = tuple(
                executor.map(_run_seed, [config] * len(seeds), seeds, [critical_point] * len(seeds))
            )
    else:
        records = tuple(_run_seed(config, seed, critical_point, game) for seed in seeds)

    base = pathlib.Path(output_dir or os.environ.get("ZOGAMES_OUTPUT_DIR") or config.output)
    directory = base / config.name
    directory.mkdir(parents=True, exist_ok=True)
    text = config.to_ini()

    for record in records:
        for fmt in config.formats:
            serialize_run(record, directory / f"seed-{record.seed}{fmt.suffix}", fmt, text)

    summaries = tuple(summarize(records, metric) for metric in config.metrics)

    for summary in summaries:
        write_summary(summary, directory / f"summary-{summary.metric}.csv")

        if config.svg:
            _plot_summary(summary, directory / f"summary-{summary.metric}.svg")

    _LOGGER.info("wrote %d runs of %s to %s", len(records), config.name, directory)

    return ExperimentResult(config, records, summaries, directory)


def summarize(records: Iterable[RunRecord], metric: str) -> Summary:
    runs = list(records)

    if not runs:
        raise ValueError("at least one seed required")

    iterations = runs[0].iterations

    if any(r.iterations != iterations for r in runs):
        raise ValueError("runs were logged at different iterations")

    values = np.asarray([r.metrics[metric] for r in runs], dtype=np.float64).reshape(len(runs), -1)

    return Summary(
        metric,
        iterations,
        values.mean(axis=0),
        values.min(axis=0),
        values.max(axis=0),
    )


def write_summary(summary: Summary, path: _PathT) -> pathlib.Path:
    p = pathlib.Path(path)

    with p.open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(("iteration", "mean", "min", "max"))

        for k, mean, lower, upper in zip(summary.iterations, summary.mean, summary.lower, summary.upper):
            writer.writerow((k, _float(mean), _float(lower), _float(upper)))

    return p


def serialize_run(
    record: RunRecord,
    path: _PathT,
    fmt: RunFormat = RunFormat.CSV,
    config_text: str = "",
) -> pathlib.Path:
    r"""
    Writes *record* as CSV (``iteration`` and one column per metric, 17 significant
    digits) or as json-lines (a header line carrying the configuration and its hash,
    then one line per logged iteration).
    """
    p = pathlib.Path(path)
    names = list(record.metrics)

    if fmt is RunFormat.CSV:
        with p.open("w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(["iteration"] + names)

            for i, k in enumerate(record.iterations):
                writer.writerow([k] + [_float(record.metrics[name][i]) for name in names])

        return p

    header = {
        "config_hash": record.config_hash,
        "config": config_text,
        "algorithm": record.algorithm,
        "dgf": record.dgf,
        "seed": record.seed,
        "initial": list(record.initial),
        "metrics": names,
        "safeguard_events": record.safeguard_events,
        "max_estimate_norm": record.max_estimate_norm,
        "max_estimate_iteration": record.max_estimate_iteration,
        "duration": record.duration,
    }

    with p.open("w", encoding="utf-8") as f:
        f.write(json.dumps(header) + "\n")

        for i, k in enumerate(record.iterations):
            row = {
                "iteration": k,
                "gamma": record.steps[i],
                "delta": record.radii[i],
                "base": list(record.bases[i]),
                "perturbed": list(record.perturbed[i]),
                "ergodic": list(record.ergodic[i]),
                "metrics": {name: record.metrics[name][i] for name in names},
            }
            f.write(json.dumps(row) + "\n")

    return p


def read_run_header(path: _PathT) -> Dict[str, Any]:
    with pathlib.Path(path).open(encoding="utf-8") as f:
        first = f.readline()

    try:
        header = json.loads(first)
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path} is not a json-lines run record") from exc

    if not isinstance(header, dict) or "config_hash" not in header:
        raise ValueError(f"{path} is not a json-lines run record")

    return header


def load_run(path: _PathT) -> RunRecord:
    r"""
    Parses a json-lines run record back into a [``RunRecord``][zogames.learners.RunRecord].
    """
    header = read_run_header(path)
    names: List[str] = header["metrics"]
    rows = []

    with pathlib.Path(path).open(encoding="utf-8") as f:
        next(f)
        rows = [json.loads(line) for line in f if line.strip()]

    def column(key: str) -> Tuple[Tuple[float, ...], ...]:
        return tuple(tuple(row[key]) for row in rows)

    return RunRecord(
        algorithm=header["algorithm"],
        dgf=header["dgf"],
        seed=header["seed"],
        initial=tuple(header["initial"]),
        iterations=tuple(row["iteration"] for row in rows),
        steps=tuple(row["gamma"] for row in rows),
        radii=tuple(row["delta"] for row in rows),
        bases=column("base"),
        perturbed=column("perturbed"),
        ergodic=column("ergodic"),
        metrics={name: tuple(row["metrics"][name] for row in rows) for name in names},
        safeguard_events=header["safeguard_events"],
        max_estimate_norm=header["max_estimate_norm"],
        max_estimate_iteration=header["max_estimate_iteration"],
        config_hash=header["config_hash"],
        duration=header["duration"],
    )


def replay(path: _PathT) -> bool:
    r"""
    Re-runs the seed a json-lines record was produced from and reports whether every
    logged value reproduces exactly.
    """
    header = read_run_header(path)
    config = ExperimentConfig.from_ini(header["config"], path=f"{path} (embedded config)")
    stored = load_run(path)
    game = prepare_game(config)
    critical_point = None if game.critical_point is None else tuple(game.critical_point.tolist())
    rerun = _run_seed(config, stored.seed, critical_point, game)

    if rerun != stored:
        _LOGGER.warning("replay of %s diverged from the stored record", path)
        return False

    return True


def _run_seed(
    config: ExperimentConfig,
    seed: int,
    critical_point: Optional[Tuple[float, ...]],
    game: Optional[Game] = None,
) -> RunRecord:
    if game is None:
        game = build_game(config.game)

        if critical_point is not None:
            game = game.with_critical_point(critical_point)

    record = run_learning(
        game,
        config.algorithm,
        config.dgf_object,
        config.schedule,
        config.iterations,
        seed,
        metrics=config.metrics,
        regime=config.regime,
        strict=config.strict,
    )
    _LOGGER.info("seed %d of %s finished in %.2fs", seed, config.name, record.duration)

    return dataclasses.replace(record, config_hash=config.config_hash)


def _resolve_workers(config: ExperimentConfig, workers: Optional[int]) -> int:
    if workers is not None:
        return max(1, workers)

    env = os.environ.get("ZOGAMES_WORKERS")

    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"ZOGAMES_WORKERS must be an integer (got {env!r})") from None

    return config.workers


def _plot_summary(summary: Summary, path: pathlib.Path) -> bool:
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        _LOGGER.warning("matplotlib is not installed; not writing %s", path)
        _LOGGER.debug(traceback.format_exc())

        return False

    k = np.asarray(summary.iterations, dtype=np.float64)
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.fill_between(k, summary.lower, summary.upper, alpha=0.3, linewidth=0.0)
    ax.plot(k, summary.mean, linewidth=1.5, label=f"{summary.metric} (mean)")

    if k.size and k.min() > 0.0:
        ax.set_xscale("log")

    if summary.lower.size and summary.lower.min() > 0.0:
        ax.set_yscale("log")

    ax.set_xlabel("iteration")
    ax.set_ylabel(summary.metric)
    ax.legend(loc="best")
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
    _LOGGER.info("wrote %s", path)

    return True


def _float(value: Any) -> str:
    return format(float(value), ".17g")


def _parse_floats(text: str) -> List[float]:
    return [float(part) for part in text.split(",") if part.strip()]


def _parse_matrix(text: str) -> List[List[float]]:
    return [_parse_floats(row) for row in text.split(";") if row.strip()]


def _parse_names(text: str) -> Tuple[str, ...]:
    return tuple(part.strip() for part in text.split(",") if part.strip())


def _parse_seeds(text: str) -> Tuple[int, ...]:
    seeds: List[int] = []

    for part in _parse_names(text):
        lo, sep, hi = part.partition("-")

        if sep and lo:
            seeds.extend(range(int(lo), int(hi) + 1))
        else:
            seeds.append(int(part))

    if not seeds:
        raise ValueError("at least one seed required")

    return tuple(seeds)


def _parse_formats(text: str) -> Tuple[RunFormat, ...]:
    return tuple(RunFormat(name) for name in _parse_names(text))


def _parse_bool(text: str) -> bool:
    lowered = text.lower()

    if lowered in _TRUTHY:
        return True

    if lowered in _FALSY:
        return False

    raise ValueError(f"expected a boolean (got {text!r})")


# ---- Command line --------------------------------------------------------------------


PARSER = argparse.ArgumentParser(
    prog="zogames",
    description="Run and inspect bandit learning experiments on continuous games.",
)
PARSER.add_argument(
    "--log-level",
    metavar="LEVEL",
    help="set logging verbosity to LEVEL (default: WARNING)",
    choices=["CRITICAL", "DEBUG", "ERROR", "INFO", "WARNING"],
    default="WARNING",
)
_VERBS = PARSER.add_subparsers(dest="verb", metavar="VERB", required=True)
_RUN = _VERBS.add_parser("run", help="run every seed of an experiment")
_RUN.add_argument("config", metavar="CONFIG")
_RUN.add_argument("-o", "--output", metavar="DIR", help="write under DIR", default=None)
_RUN.add_argument("-w", "--workers", metavar="N", type=int, help="run N seeds at once", default=None)
_VALIDATE = _VERBS.add_parser("validate", help="check the schedule and build the game")
_VALIDATE.add_argument("config", metavar="CONFIG")
_REPLAY = _VERBS.add_parser("replay", help="re-run a json-lines record and compare")
_REPLAY.add_argument("record", metavar="RECORD")
_PROBE = _VERBS.add_parser("probe", help="sample the game's declared regularity class")
_PROBE.add_argument("config", metavar="CONFIG")
_PROBE.add_argument("-n", "--pairs", metavar="N", type=int, help="sample N pairs (default: 10000)", default=10_000)
_SOLVE = _VERBS.add_parser("solve", help="compute the ground-truth critical point")
_SOLVE.add_argument("config", metavar="CONFIG")
_SOLVE.add_argument("--tol", metavar="TOL", type=float, help="residual tolerance (default: 1e-10)", default=1e-10)
_SOLVE.add_argument(
    "--method",
    metavar="METHOD",
    help="mirror-prox or projected-descent (default: mirror-prox)",
    choices=[m.value for m in SolveMethod],
    default=SolveMethod.MIRROR_PROX.value,
)


def main(*args: str) -> int:
    parsed_args = PARSER.parse_args(args) if args else PARSER.parse_args()
    logging.basicConfig(format="%(levelname)s %(name)s: %(message)s")
    logging.getLogger().setLevel(parsed_args.log_level)

    try:
        return _COMMANDS[parsed_args.verb](parsed_args)
    except ConfigError as exc:
        print(f"zogames: {exc}", file=sys.stderr)

        return 2
    except Exception as exc:
        _LOGGER.debug(traceback.format_exc())
        print(f"zogames: {type(exc).__name__}: {exc}", file=sys.stderr)

        return 3


def _cmd_run(parsed_args: argparse.Namespace) -> int:
    config = ExperimentConfig.load(parsed_args.config)
    result = run_experiment(config, parsed_args.output, parsed_args.workers)
    print(result.directory)

    return 0


def _cmd_validate(parsed_args: argparse.Namespace) -> int:
    config = ExperimentConfig.load(parsed_args.config)
    report = validate_schedule(config.schedule, config.regime)
    game = build_game(config.game)
    print(report)
    print(f"game: {game.name}, dims {game.dims}, smallest ball radius {game.min_radius:.6g}")
    passed = report.passed
    stream = derive_stream(config.game.seed, "check")
    checks: List[Tuple[str, float]] = []

    if game.has_pseudogradient:
        checks.append(("pseudogradient", check_pseudogradient(game, stream)))

    if game.has_potential:
        checks.append(("potential", check_potential(game, stream)))

    for oracle, error in checks:
        verdict = "PASS" if error <= _ORACLE_TOL else "FAIL"
        print(f"{oracle} vs finite differences: {verdict} (relative error {error:.3g})")
        passed = passed and error <= _ORACLE_TOL

    return 0 if passed else 3


def _cmd_replay(parsed_args: argparse.Namespace) -> int:
    if replay(parsed_args.record):
        print(f"{parsed_args.record}: reproduced")

        return 0

    print(f"{parsed_args.record}: DIVERGED")

    return 3


def _cmd_probe(parsed_args: argparse.Namespace) -> int:
    config = ExperimentConfig.load(parsed_args.config)
    game = build_game(config.game)

    if game.regularity is Regularity.UNKNOWN:
        raise ConfigError(f"{game.name} declares no regularity class to probe", section="game", key="kind")

    report = monotonicity_probe(
        game, game.regularity, parsed_args.pairs, derive_stream(config.game.seed, "probe")
    )
    print(report)

    for violation in report.violations[:10]:
        print(f"  {violation.clause}: {violation.quantity:.6g} at x={violation.x.tolist()} y={violation.y.tolist()}")

    return 0


def _cmd_solve(parsed_args: argparse.Namespace) -> int:
    config = ExperimentConfig.load(parsed_args.config)
    game = build_game(config.game)
    solution = solve_cp(game, tol=parsed_args.tol, method=SolveMethod(parsed_args.method))
    print(f"converged: {solution.converged} after {solution.iterations} iterations")
    print(f"residual: {solution.residual:.6g}")

    if solution.merit is not None:
        print(f"merit: {solution.merit:.6g}")

    print("point: " + ", ".join(_float(v) for v in solution.point))

    return 0 if solution.converged else 3


_COMMANDS: Mapping[str, Callable[[argparse.Namespace], int]] = {
    "run": _cmd_run,
    "validate": _cmd_validate,
    "replay": _cmd_replay,
    "probe": _cmd_probe,
    "solve": _cmd_solve,
}
