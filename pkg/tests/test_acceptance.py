# ======================================================================================
# Copyright and other protections apply. Please see the accompanying LICENSE file for
# rights and restrictions governing use of this software. All rights not expressly
# waived or licensed are reserved. If that file is missing or appears to be modified
# from its original, then please contact the author before viewing or using this
# software in any capacity.
# ======================================================================================

r"""
Long-running experiments at desk scale.
Enabled by setting ``ZOGAMES_ACCEPTANCE`` (``tox -e acceptance`` does).
"""

import dataclasses
import os
import pathlib
from typing import List

import numpy as np
import pytest

from zogames.analysis import monotonicity_probe, rate_fit, recurrence_bound_check, smooth_trace, solve_cp
from zogames.estimator import adjust_feasibility, derive_stream, estimate_moments
from zogames.games import (
    Game,
    Regularity,
    bandit_view,
    check_potential,
    check_pseudogradient,
    make_synthetic_quadratic_game,
    make_thermal_game,
    sample_lse_game,
    sample_portfolio_game,
    sample_thermal_params,
)
from zogames.geometry import EUCLIDEAN, FeasibleSet, bregman_div, project_polytope, prox_map
from zogames.harness import ExperimentConfig, run_experiment
from zogames.learners import Algorithm, Schedule, run_learning

from .gamebank import SET_A, SET_B, active_set_projection, lemma_portfolio, random_polytope, small_synthetic

__all__ = ()

pytestmark = [
    pytest.mark.acceptance,
    pytest.mark.skipif(
        os.environ.get("ZOGAMES_ACCEPTANCE", "").lower() not in ("1", "on", "t", "true", "y", "yes"),
        reason="set ZOGAMES_ACCEPTANCE to run long experiments",
    ),
]


# ---- Data ----------------------------------------------------------------------------


_SEEDS = (0, 1, 2, 3, 4)
_LSE_SCHEDULE = Schedule(0.3, 10_000.0, 0.8, 1.0, 100.0, 0.25)
_RECIPES = pathlib.Path(__file__).parent.parent / "recipes"


# ---- Functions -----------------------------------------------------------------------


def _benchmark_game() -> Game:
    return make_synthetic_quadratic_game(players=5, dim=2, modulus=0.5, seed=0)


# ---- Tests ---------------------------------------------------------------------------


def test_polytope_projection_at_scale() -> None:
    rng = np.random.default_rng(99)
    worst = 0.0

    for _ in range(100):
        dim = int(rng.integers(1, 6))
        s = random_polytope(rng, dim, int(rng.integers(1, 5)))

        for x in rng.uniform(-1.0, 2.0, size=(2, dim)):
            worst = max(worst, float(np.linalg.norm(project_polytope(s, x) - active_set_projection(s, x))))

    assert worst <= 1e-6


def test_prox_inequalities_at_scale() -> None:
    rng = np.random.default_rng(98)
    s = FeasibleSet.box([0.0, 0.0, 0.0], [1.0, 1.0, 1.0])
    wider = s.enlarged(0.25)
    worst = np.inf

    for x, p in zip(s.sample(rng, 1000), s.sample(rng, 1000)):
        y1, y2 = rng.normal(size=(2, 3))
        plus = prox_map(EUCLIDEAN, s, x, y2)
        wide_plus = prox_map(EUCLIDEAN, wider, x, y1)
        three_point = (
            bregman_div(EUCLIDEAN, p, x)
            - float(y2 @ (p - plus))
            - bregman_div(EUCLIDEAN, plus, x)
            - bregman_div(EUCLIDEAN, p, plus)
        )
        # the leading step may land in a superset of the feasible set
        superset = (
            bregman_div(EUCLIDEAN, p, x)
            + float(y2 @ (wide_plus - p))
            + 0.5 * float((y2 - y1) @ (y2 - y1))
            - 0.5 * float((wide_plus - x) @ (wide_plus - x))
            - bregman_div(EUCLIDEAN, p, plus)
        )
        worst = min(worst, three_point, superset)

    assert worst >= -1e-7


def test_residual_estimate_is_unbiased_at_scale() -> None:
    g = small_synthetic(seed=11, players=3)
    base = g.centers
    moments = estimate_moments(
        bandit_view(g), base, 0.05, derive_stream(0, "unbiased"), 1_000_000, prev_payoffs=g.payoffs(base)
    )
    assert float(np.linalg.norm(moments.mean - g.pseudogradient(base))) <= 4.0 * moments.stderr_norm


def test_residual_estimate_bias_halves_at_scale() -> None:
    g = lemma_portfolio()
    x = np.array([0.2])
    target = g.pseudogradient(x)
    biases = []

    for delta in (0.1, 0.05):
        adjusted = adjust_feasibility(x, delta, g.balls[0], np.zeros(1))
        moments = estimate_moments(
            bandit_view(g),
            adjusted,
            delta,
            derive_stream(2, f"bias-{delta}"),
            1_000_000,
            prev_payoffs=g.payoffs(adjusted),
        )
        bias = float(np.linalg.norm(moments.mean - target))
        assert moments.stderr_norm < 0.1 * bias
        biases.append(bias)

    assert 0.3 <= biases[1] / biases[0] <= 0.7


def test_residual_estimates_stay_bounded() -> None:
    g = _benchmark_game()
    early = 0

    for seed in _SEEDS:
        record = run_learning(g, Algorithm.OMD, EUCLIDEAN, SET_A, 100_000, seed)
        early += record.max_estimate_iteration < 10_000

    assert early >= 4


def test_one_point_estimates_grow_like_inverse_radius() -> None:
    g = _benchmark_game()
    record = run_learning(g, Algorithm.BASELINE_ONE_POINT, EUCLIDEAN, SET_A, 100_000, 0, metrics=("estimate-norm",))
    norms = np.asarray(record.metrics["estimate-norm"])
    radii = np.asarray(record.radii)
    slope, _ = np.polyfit(np.log(1.0 / radii), np.log(norms), 1)
    assert slope == pytest.approx(1.0, abs=0.2)


@pytest.mark.parametrize("algorithm", (Algorithm.OMD, Algorithm.RMD))
def test_iterates_reach_the_critical_point(algorithm: Algorithm) -> None:
    g = _benchmark_game()
    solution = solve_cp(g)
    assert solution.residual < 1e-10
    assert np.allclose(solution.point, g.critical_point, atol=1e-9)
    records = [
        run_learning(g, algorithm, EUCLIDEAN, SET_A, 100_000, seed, metrics=("distance-to-cp",)) for seed in _SEEDS
    ]
    assert np.mean([r.metrics["distance-to-cp"][-1] for r in records]) < 0.05

    if algorithm is Algorithm.RMD:
        assert all(r.safeguard_events == 0 for r in records)


def test_squared_distance_decays_at_the_guaranteed_rate() -> None:
    g = _benchmark_game()
    slopes: List[float] = []

    for schedule in (SET_A, SET_B):
        records = [
            run_learning(g, Algorithm.OMD, EUCLIDEAN, schedule, 100_000, seed, metrics=("squared-distance",))
            for seed in _SEEDS
        ]
        mean = np.mean([r.metrics["squared-distance"] for r in records], axis=0)
        fit = rate_fit(records[0].iterations, mean)
        guaranteed = -(schedule.a_gamma + schedule.a_delta - 1.0)
        assert fit.slope == pytest.approx(guaranteed, abs=0.2)
        slopes.append(fit.slope)

    assert slopes[0] < slopes[1]


@pytest.mark.parametrize("algorithm", (Algorithm.OMD, Algorithm.RMD))
def test_ergodic_merit_decreases_on_least_squares(algorithm: Algorithm) -> None:
    g = sample_lse_game(seed=0)
    record = run_learning(g, algorithm, EUCLIDEAN, _LSE_SCHEDULE, 100_000, 0, metrics=("merit",))
    k = np.asarray(record.iterations)
    merit = np.asarray(record.metrics["merit"])
    assert merit[-1] <= 0.1 * merit[k == 100][0]

    late = k >= 10_000
    _, smoothed = smooth_trace(k[late], merit[late], 1_000.0)
    assert np.all(np.diff(smoothed) <= 0.0)


def test_benchmark_games_are_well_built() -> None:
    lse = sample_lse_game(seed=1)
    xs = lse.sample(derive_stream(0, "check"), 1000)
    assert np.abs(lse.payoffs(xs).sum(axis=-1)).max() <= 1e-12

    thermal = make_thermal_game(sample_thermal_params(seed=1, buildings=4, horizon=4))
    portfolio = sample_portfolio_game(assets=5, seed=1)

    for g in (_benchmark_game(), lse, portfolio, thermal):
        assert check_pseudogradient(g, derive_stream(1, "check"), points=50) <= 1e-5

    assert check_potential(thermal, derive_stream(2, "check"), points=50) <= 1e-5

    for g, regularity in (
        (_benchmark_game(), Regularity.STRONGLY_MONOTONE),
        (lse, Regularity.MONOTONE),
        (portfolio, Regularity.PSEUDO_MONOTONE),
        (thermal, Regularity.STRONGLY_MONOTONE),
        (thermal, Regularity.PSEUDOCONVEX_POTENTIAL),
    ):
        report = monotonicity_probe(g, regularity, 10_000, derive_stream(3, "probe"))
        assert report.passed, str(report)


def test_smoothed_peak_is_sandwiched() -> None:
    p = sample_thermal_params(seed=2, buildings=1, horizon=4, demand_rate=1.0)
    g = make_thermal_game(p)
    xs = g.sample(derive_stream(0, "sandwich"), 1000)
    private = xs @ p.price + np.sum(p.weights[0] * xs * xs, axis=-1)
    slack = np.log(p.horizon) / p.smoothing
    # the singleton clique pays V(x) - V(empty) with V(empty) = ln(T) / C
    peak = g.payoffs(xs)[:, 0] - private + slack
    assert np.all(peak >= xs.max(axis=-1) - 1e-12)
    assert np.all(peak <= xs.max(axis=-1) + slack + 1e-12)


def test_recurrence_bound_over_random_parameters() -> None:
    rng = np.random.default_rng(7)

    for _ in range(50):
        s = float(rng.uniform(0.55, 0.9))
        t = float(rng.uniform(s + 0.01, 0.99))
        check = recurrence_bound_check(
            float(rng.uniform(0.5, 2.0)),
            float(rng.uniform(0.0, 2.0)),
            s,
            t,
            float(rng.uniform(0.0, 5.0)),
            1_000_000,
        )
        assert check.passed, (check.K, check.worst_slack)


def test_recipes_rerun_byte_identically(tmp_path: pathlib.Path) -> None:
    cfg = ExperimentConfig.load(_RECIPES / "synthetic-quadratic.ini")
    cfg = dataclasses.replace(cfg, iterations=10_000)
    first = run_experiment(cfg, tmp_path / "a", workers=1)
    second = run_experiment(cfg, tmp_path / "b", workers=1)

    for path in sorted(first.directory.glob("*.csv")):
        assert path.read_bytes() == (second.directory / path.name).read_bytes()


@pytest.mark.parametrize("recipe", sorted(p.name for p in _RECIPES.glob("*.ini")))
def test_recipes_parse_and_validate(recipe: str) -> None:
    cfg = ExperimentConfig.load(_RECIPES / recipe)
    assert ExperimentConfig.from_ini(cfg.to_ini()) == cfg
