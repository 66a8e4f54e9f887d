# ======================================================================================
# Copyright and other protections apply. Please see the accompanying LICENSE file for
# rights and restrictions governing use of this software. All rights not expressly
# waived or licensed are reserved. If that file is missing or appears to be modified
# from its original, then please contact the author before viewing or using this
# software in any capacity.
# ======================================================================================

import math

import numpy as np
import pytest

from zogames.geometry import (
    EUCLIDEAN,
    NEGENTROPY,
    FeasibleSet,
    InteriorBall,
    SetKind,
    bregman_div,
    project_polytope,
    prox_map,
    unconstrained_mirror_step,
)

from .gamebank import active_set_projection, random_polytope

__all__ = ()


# ---- Tests ---------------------------------------------------------------------------


def test_box_projection_and_membership() -> None:
    s = FeasibleSet.box([0.0, -1.0], [1.0, 1.0])
    assert s.kind is SetKind.BOX
    assert s.contains([0.5, 0.0])
    assert not s.contains([1.5, 0.0])
    assert s.project([1.5, -3.0]).tolist() == [1.0, -1.0]
    assert s.project([0.25, 0.5]).tolist() == [0.25, 0.5]

    with pytest.raises(ValueError):
        FeasibleSet.box([1.0], [0.0])


def test_simplex_projection_optimality() -> None:
    rng = np.random.default_rng(17)
    s = FeasibleSet.simplex(5)

    for v in rng.normal(scale=2.0, size=(200, 5)):
        p = s.project(v)
        assert s.contains(p)
        # KKT: v - p is constant on the support and no larger off it
        gap = v - p
        support = p > 1e-12
        theta = gap[support].mean()
        assert np.allclose(gap[support], theta, atol=1e-9)
        assert np.all(gap[~support] <= theta + 1e-9)

    assert s.project([0.5, 0.5, 0.5, 0.5, 0.5]).tolist() == pytest.approx([0.2] * 5)
    assert s.project([2.0, 0.0, 0.0, 0.0, 0.0]).tolist() == [1.0, 0.0, 0.0, 0.0, 0.0]


def test_polytope_projection_matches_active_set_enumeration() -> None:
    rng = np.random.default_rng(2024)
    worst = 0.0

    for _ in range(25):
        dim = int(rng.integers(1, 4))
        s = random_polytope(rng, dim, int(rng.integers(1, 3)))

        for x in rng.uniform(-1.0, 2.0, size=(4, dim)):
            worst = max(worst, float(np.linalg.norm(project_polytope(s, x) - active_set_projection(s, x))))

    assert worst <= 1e-6


def test_projection_is_idempotent_on_members() -> None:
    rng = np.random.default_rng(5)
    s = random_polytope(rng, 3, 2)

    for x in s.sample(rng, 50):
        assert s.project(x).tolist() == x.tolist()


def test_interior_balls() -> None:
    box = FeasibleSet.box([0.0, 2.0], [1.0, 6.0])
    ball = box.interior_ball()
    assert ball.center.tolist() == [0.5, 4.0]
    assert ball.radius == 0.5
    assert box.holds_ball(ball)

    rng = np.random.default_rng(11)

    for _ in range(20):
        s = random_polytope(rng, 3, 2)
        ball = s.interior_ball()
        assert ball.radius > 0.0
        assert s.holds_ball(ball)

    with pytest.raises(ValueError):
        FeasibleSet.simplex(3).interior_ball()

    with pytest.raises(ValueError):
        InteriorBall([0.0], 0.0)


def test_empty_or_flat_polytopes_are_rejected() -> None:
    with pytest.raises(ValueError):
        FeasibleSet.polytope([0.0], [1.0], [[1.0]], [-1.0])

    with pytest.raises(ValueError):
        FeasibleSet.polytope([0.0, 0.0], [1.0, 1.0], [[1.0, 1.0], [-1.0, -1.0]], [1.0, -1.0])


def test_enlarged_box() -> None:
    s = FeasibleSet.box([0.0], [1.0]).enlarged(0.25)
    assert s.lower.tolist() == [-0.25]
    assert s.upper.tolist() == [1.25]
    unit = FeasibleSet.box([0.0], [1.0])
    assert unit.enlarged(0.0) is unit


def test_samples_are_members() -> None:
    rng = np.random.default_rng(3)

    for s in (FeasibleSet.box([0.0, -1.0], [1.0, 1.0]), FeasibleSet.simplex(4), random_polytope(rng, 2, 2)):
        points = s.sample(rng, 100)
        assert points.shape == (100, s.dim)
        assert all(s.contains(p) for p in points)


def test_prox_optimality_and_three_point_inequality() -> None:
    rng = np.random.default_rng(8)
    worst = math.inf

    cases = (
        (EUCLIDEAN, FeasibleSet.box([0.0, 0.0, 0.0], [1.0, 1.0, 1.0])),
        (EUCLIDEAN, random_polytope(rng, 3, 2)),
        (NEGENTROPY, FeasibleSet.simplex(3)),
        (NEGENTROPY, FeasibleSet.box([0.01, 0.01, 0.01], [1.0, 1.0, 1.0])),
    )

    for dgf, s in cases:
        xs = s.sample(rng, 250)
        ps = s.sample(rng, 250)

        for x, p in zip(xs, ps):
            if dgf is NEGENTROPY and np.any(x <= 1e-6):
                continue

            y = rng.normal(size=s.dim)
            plus = prox_map(dgf, s, x, y)
            assert s.contains(plus, tol=1e-7)
            # first-order optimality of the prox against any feasible p
            optimality = float((dgf.grad(plus) - dgf.grad(x) - y) @ (p - plus))
            # D(p, x+) <= D(p, x) - <y, p - x+> - D(x+, x)
            three_point = (
                bregman_div(dgf, p, x)
                - float(y @ (p - plus))
                - bregman_div(dgf, plus, x)
                - bregman_div(dgf, p, plus)
            )
            worst = min(worst, optimality, three_point)

    assert worst >= -1e-7


def test_prox_is_lipschitz_in_the_step_and_fixes_its_base() -> None:
    rng = np.random.default_rng(13)

    cases = (
        (EUCLIDEAN, FeasibleSet.box([0.0, 0.0, 0.0], [1.0, 1.0, 1.0]), EUCLIDEAN.norm, EUCLIDEAN.dual_norm),
        (EUCLIDEAN, random_polytope(rng, 3, 2), EUCLIDEAN.norm, EUCLIDEAN.dual_norm),
        (NEGENTROPY, FeasibleSet.simplex(3), NEGENTROPY.norm, NEGENTROPY.dual_norm),
        # clipped coordinates below one move at most as fast as their exponent
        (NEGENTROPY, FeasibleSet.box([0.01, 0.01, 0.01], [1.0, 1.0, 1.0]), EUCLIDEAN.norm, EUCLIDEAN.dual_norm),
    )

    for dgf, s, norm, dual_norm in cases:
        # Dykstra settles polytope projections to about 1e-6
        slack = 1e-6 if s.kind is SetKind.POLYTOPE else 1e-7
        checked = 0

        for x in s.sample(rng, 1000):
            if dgf is NEGENTROPY and np.any(x <= 0.0):
                continue

            y1 = rng.normal(size=s.dim)
            y2 = y1 + rng.normal(scale=0.5, size=s.dim)
            gap = norm(prox_map(dgf, s, x, y1) - prox_map(dgf, s, x, y2))
            assert gap <= dual_norm(y1 - y2) / dgf.strong_convexity + slack
            assert np.allclose(prox_map(dgf, s, x, np.zeros(s.dim)), x, rtol=0.0, atol=1e-9)
            checked += 1

        assert checked >= 950


def test_bregman_strong_convexity() -> None:
    rng = np.random.default_rng(21)

    for dgf, s in ((EUCLIDEAN, FeasibleSet.box([-1.0] * 4, [1.0] * 4)), (NEGENTROPY, FeasibleSet.simplex(4))):
        for p, x in zip(s.sample(rng, 1000), s.sample(rng, 1000)):
            if np.any(x <= 0.0):
                continue

            slack = bregman_div(dgf, p, x) - 0.5 * dgf.strong_convexity * dgf.norm(p - x) ** 2
            assert slack >= -1e-7


def test_negentropy_limits() -> None:
    with pytest.raises(ValueError):
        prox_map(NEGENTROPY, FeasibleSet.box([-1.0], [1.0]), [0.5], [0.1])

    with pytest.raises(ValueError):
        prox_map(NEGENTROPY, FeasibleSet.polytope([0.0, 0.0], [1.0, 1.0], [[1.0, 1.0]], [1.0]), [0.2, 0.2], [0.1, 0.1])

    for boundary in ([1.0, 0.0], [0.5, -0.0]):
        with pytest.raises(ValueError):
            prox_map(NEGENTROPY, FeasibleSet.simplex(2), boundary, [0.1, 0.1])

    with pytest.raises(ValueError):
        prox_map(NEGENTROPY, FeasibleSet.box([0.0, 0.0], [1.0, 1.0]), [0.0, 0.5], [0.0, 0.0])

    with pytest.raises(FloatingPointError):
        unconstrained_mirror_step(NEGENTROPY, [0.5], [1e4])

    assert unconstrained_mirror_step(EUCLIDEAN, [0.6], [0.6 - 0.5]).tolist() == pytest.approx([0.7])
    assert NEGENTROPY.smoothness is None and not NEGENTROPY.is_smooth
    assert EUCLIDEAN.is_smooth


def test_bregman_divergence_values() -> None:
    assert bregman_div(EUCLIDEAN, [0.3], [0.3]) == 0.0
    assert bregman_div(NEGENTROPY, [0.25, 0.75], [0.25, 0.75]) == pytest.approx(0.0, abs=1e-15)
    assert bregman_div(NEGENTROPY, [1.0, 0.0], [0.5, 0.5]) == pytest.approx(math.log(2.0))
