# ======================================================================================
# Copyright and other protections apply. Please see the accompanying LICENSE file for
# rights and restrictions governing use of this software. All rights not expressly
# waived or licensed are reserved. If that file is missing or appears to be modified
# from its original, then please contact the author before viewing or using this
# software in any capacity.
# ======================================================================================

import numpy as np
import pytest

from zogames.estimator import (
    BaselineKind,
    EstimateDiagnostics,
    EstimatorState,
    QueryDirection,
    adjust_feasibility,
    baseline_estimate,
    derive_stream,
    estimate_moments,
    rpg_estimate,
    sample_unit_sphere,
)
from zogames.games import bandit_view
from zogames.geometry import InteriorBall

from .gamebank import interval_game, lemma_portfolio, small_synthetic

__all__ = ()


# ---- Tests ---------------------------------------------------------------------------


def test_streams_are_labeled_and_reproducible() -> None:
    a = derive_stream(3, "directions").uniform(size=5)
    b = derive_stream(3, "directions").uniform(size=5)
    c = derive_stream(4, "directions").uniform(size=5)
    d = derive_stream(3, "multistart").uniform(size=5)
    assert a.tolist() == b.tolist()
    assert a.tolist() != c.tolist()
    assert a.tolist() != d.tolist()
    # negative and oversized seeds fold into 64 bits
    derive_stream(-1, "directions")
    derive_stream(2**70, "directions")


def test_unit_sphere_samples() -> None:
    rng = np.random.default_rng(0)
    single = sample_unit_sphere(3, rng)
    assert single.shape == (3,)
    assert np.linalg.norm(single) == pytest.approx(1.0)
    batch = sample_unit_sphere(4, rng, 1000)
    assert batch.shape == (1000, 4)
    assert np.allclose(np.linalg.norm(batch, axis=1), 1.0)
    assert np.all(np.abs(batch.mean(axis=0)) < 0.1)


def test_query_directions_are_unit_per_player() -> None:
    u = QueryDirection.sample((2, 1, 3), np.random.default_rng(1))
    assert u.stacked.shape == (6,)
    assert [float(np.linalg.norm(part)) for part in u.per_player] == pytest.approx([1.0, 1.0, 1.0])
    v = QueryDirection.from_parts([[1.0, 0.0], [-1.0]])
    assert v.dims == (2, 1)
    assert v.stacked.tolist() == [1.0, 0.0, -1.0]

    with pytest.raises(ValueError):
        QueryDirection((0,), [])


def test_adjust_feasibility() -> None:
    ball = InteriorBall([0.5], 0.5)
    assert adjust_feasibility([1.0], 0.1, ball, [1.0]).tolist() == [1.0]
    assert adjust_feasibility([1.0], 0.1, ball, [-1.0]).tolist() == pytest.approx([0.8])
    assert adjust_feasibility([0.3], 0.0, ball, [1.0]).tolist() == [0.3]

    with pytest.raises(ValueError):
        adjust_feasibility([0.5], 0.5, ball, [1.0])

    with pytest.raises(ValueError):
        adjust_feasibility([0.5], -0.1, ball, [1.0])

    # any point of the box stays feasible for any direction
    rng = np.random.default_rng(9)
    ball2 = InteriorBall([0.5, 0.5], 0.5)

    for x, u in zip(rng.uniform(size=(200, 2)), sample_unit_sphere(2, rng, 200)):
        adjusted = adjust_feasibility(x, 0.3, ball2, u)
        assert np.all(adjusted >= -1e-12) and np.all(adjusted <= 1.0 + 1e-12)


def test_rpg_estimate() -> None:
    state = EstimatorState.initial([1.0])
    g, state = rpg_estimate(state, [1.3], QueryDirection((2,), [1.0, 0.0]), 0.1)
    assert g.tolist() == pytest.approx([6.0, 0.0])
    assert state.prev_payoffs.tolist() == [1.3]
    assert state.prev_radius == 0.1

    g, _ = rpg_estimate(state, [1.3], QueryDirection((2,), [0.6, 0.8]), 0.05)
    assert g.tolist() == [0.0, 0.0]

    with pytest.raises(ValueError):
        rpg_estimate(state, [1.3], QueryDirection((2,), [1.0, 0.0]), 0.0)

    with pytest.raises(ValueError):
        rpg_estimate(state, [1.3, 2.0], QueryDirection((1, 1), [1.0, 1.0]), 0.1)

    with pytest.raises(FloatingPointError):
        rpg_estimate(state, [float("nan")], QueryDirection((1,), [1.0]), 0.1)


def test_baseline_estimates() -> None:
    g = interval_game(m=0.0, q=3.0)
    u = QueryDirection((1,), [1.0])
    assert baseline_estimate(BaselineKind.TWO_POINT, bandit_view(g), [0.2], u, 0.01).tolist() == pytest.approx([3.0])
    # the one-point estimate carries the payoff level divided by the radius
    one_point = baseline_estimate(BaselineKind.ONE_POINT, bandit_view(g), [0.2], u, 0.01)
    assert one_point.tolist() == pytest.approx([3.0 * 0.21 / 0.01])


def test_diagnostics_track_running_max() -> None:
    d = EstimateDiagnostics()
    d = d.update(np.array([3.0, 4.0]), 1)
    d = d.update(np.array([1.0, 0.0]), 2)
    d = d.update(np.array([6.0, 8.0]), 3)
    d = d.update(np.array([0.0, 0.0]), 4)
    assert (d.running_max_norm, d.argmax_iteration, d.count, d.estimate_norm) == (10.0, 3, 4, 0.0)


def test_residual_estimate_is_unbiased_for_quadratic_payoffs() -> None:
    g = small_synthetic(seed=4, players=2)
    base = g.centers
    moments = estimate_moments(
        bandit_view(g),
        base,
        0.1,
        derive_stream(0, "unbiased"),
        200_000,
        prev_payoffs=g.payoffs(base),
    )
    error = float(np.linalg.norm(moments.mean - g.pseudogradient(base)))
    assert error <= 4.0 * moments.stderr_norm


def test_residual_estimate_bias_shrinks_linearly_with_radius() -> None:
    g = lemma_portfolio()
    x = np.array([0.2])
    ball = g.balls[0]
    target = g.pseudogradient(x)
    biases = []

    for delta in (0.1, 0.05):
        adjusted = adjust_feasibility(x, delta, ball, np.zeros(1))
        moments = estimate_moments(
            bandit_view(g),
            adjusted,
            delta,
            derive_stream(1, f"bias-{delta}"),
            50_000,
            prev_payoffs=g.payoffs(adjusted),
        )
        bias = float(np.linalg.norm(moments.mean - target))
        assert moments.stderr_norm < 0.1 * bias
        biases.append(bias)

    assert 0.3 <= biases[1] / biases[0] <= 0.7


def test_moment_arguments() -> None:
    g = interval_game()

    with pytest.raises(ValueError):
        estimate_moments(bandit_view(g), [0.5], 0.1, np.random.default_rng(0), 10)

    with pytest.raises(ValueError):
        estimate_moments(bandit_view(g), [0.5], 0.1, np.random.default_rng(0), 10, prev_base=[0.5], prev_payoffs=[0.0])

    fresh = estimate_moments(bandit_view(g), [0.5], 0.1, np.random.default_rng(0), 1000, prev_base=[0.5], batch=300)
    assert fresh.samples == 1000
    assert fresh.mean.shape == (1,)
