# ======================================================================================
# Copyright and other protections apply. Please see the accompanying LICENSE file for
# rights and restrictions governing use of this software. All rights not expressly
# waived or licensed are reserved. If that file is missing or appears to be modified
# from its original, then please contact the author before viewing or using this
# software in any capacity.
# ======================================================================================

r"""
Step-size and query-radius schedules, the optimistic (OMD) and reflected (RMD) mirror
descent rounds, the single-point baselines, ergodic averaging and the learning loop.
"""

import dataclasses
import enum
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .bt import beartype
from .estimator import (
    BaselineKind,
    EstimateDiagnostics,
    EstimatorState,
    QueryDirection,
    _adjust,
    baseline_estimate,
    derive_stream,
    rpg_estimate,
)
from .games import Game, bandit_view
from .geometry import Dgf, DgfKind, unconstrained_mirror_step
from .metrics import MetricContext, check_metrics
from .types import Vector, as_vector

__all__ = (
    "Algorithm",
    "ErgodicAccumulator",
    "FeasibilityError",
    "LearnerState",
    "Regime",
    "RoundRecord",
    "RunRecord",
    "Schedule",
    "ScheduleCondition",
    "ScheduleReport",
    "baseline_step",
    "ergodic_point",
    "ergodic_update",
    "eval_schedule",
    "is_logged",
    "omd_step",
    "rmd_step",
    "run_learning",
    "validate_schedule",
)

_LOGGER = logging.getLogger(__name__)


# ---- Data ----------------------------------------------------------------------------


RADIUS_CLAMP = 0.5


# ---- Types ---------------------------------------------------------------------------


class Algorithm(str, enum.Enum):
    OMD = "omd"
    RMD = "rmd"
    BASELINE_ONE_POINT = "baseline-one-point"
    BASELINE_TWO_POINT = "baseline-two-point"

    @property
    def baseline(self) -> Optional[BaselineKind]:
        return {
            Algorithm.BASELINE_ONE_POINT: BaselineKind.ONE_POINT,
            Algorithm.BASELINE_TWO_POINT: BaselineKind.TWO_POINT,
        }.get(self)


class Regime(str, enum.Enum):
    ALMOST_SURE = "almost-sure"
    STRONG_RATE = "strong-rate"


class FeasibilityError(RuntimeError):
    r"""
    Raised in strict runs when an iterate leaves the set it must stay in.
    """


# ---- Classes -------------------------------------------------------------------------


@dataclass(frozen=True)
class Schedule:
    r"""
    Power-law step sizes $\gamma_k = c_\gamma / (k + b_\gamma)^{a_\gamma}$ and query
    radii $\delta_k = c_\delta / (k + b_\delta)^{a_\delta}$.

    ``` python
    >>> from zogames.learners import Schedule
    >>> Schedule(1.0, 2000.0, 0.95, 1.0, 100.0, 0.0)
    Traceback (most recent call last):
      ...
    ValueError: a_delta must lie in (0, 1] (got 0.0)

    ```
    """

    c_gamma: float
    b_gamma: float
    a_gamma: float
    c_delta: float
    b_delta: float
    a_delta: float

    def __post_init__(self) -> None:
        for name in ("c_gamma", "b_gamma", "c_delta", "b_delta"):
            value = getattr(self, name)

            if not (math.isfinite(value) and value > 0.0):
                raise ValueError(f"{name} must be positive (got {value!r})")

        for name in ("a_gamma", "a_delta"):
            value = getattr(self, name)

            if not 0.0 < value <= 1.0:
                raise ValueError(f"{name} must lie in (0, 1] (got {value!r})")


@dataclass(frozen=True)
class ScheduleCondition:
    name: str
    passed: bool


@dataclass(frozen=True)
class ScheduleReport:
    regime: Regime
    conditions: Tuple[ScheduleCondition, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.conditions)

    @property
    def failures(self) -> Tuple[str, ...]:
        return tuple(c.name for c in self.conditions if not c.passed)

    def __str__(self) -> str:
        lines = [f"{self.regime.value}: {'PASS' if self.passed else 'FAIL'}"]
        lines.extend(
            f"  [{'pass' if c.passed else 'FAIL'}] {c.name}" for c in self.conditions
        )

        return "\n".join(lines)


@dataclass(frozen=True, eq=False)
class LearnerState:
    r"""
    Everything a learner carries between rounds.
    *iteration* is the index $k$ of the next round to play.
    """

    base: Vector
    leading: Vector
    prev_estimate: Vector
    prev_base: Vector
    estimator: EstimatorState
    iteration: int = 1
    safeguard_events: int = 0

    @classmethod
    def initial(cls, game: Game, x0: Optional[Any] = None) -> "LearnerState":
        r"""
        $X_0 = X_{1/2} = X_1 = x_0$ (the interior-ball centers by default), a null
        previous estimate and the payoffs of the unperturbed start as the first residual
        reference.
        """
        start = game.centers.copy() if x0 is None else as_vector(x0, game.n, name="x0")

        if not game.contains(start):
            raise ValueError("x0 must lie in the feasible set")

        payoffs = bandit_view(game).payoffs(start)

        return cls(
            base=start,
            leading=start,
            prev_estimate=np.zeros(game.n),
            prev_base=start,
            estimator=EstimatorState.initial(payoffs),
        )


@dataclass(frozen=True, eq=False)
class RoundRecord:
    iteration: int
    gamma: float
    delta: float
    leading: Vector
    perturbed: Vector
    estimate: Vector
    base: Vector
    payoffs: Optional[Vector] = None
    safeguarded: bool = False


@dataclass(frozen=True, eq=False)
class ErgodicAccumulator:
    weighted_sum: Optional[Vector] = None
    weight_sum: float = 0.0


@dataclass(frozen=True)
class RunRecord:
    r"""
    The logged outcome of one learning run.
    Traces hold one entry per logged iteration (see
    [``is_logged``][zogames.learners.is_logged]).
    """

    algorithm: str
    dgf: str
    seed: int
    initial: Tuple[float, ...]
    iterations: Tuple[int, ...]
    steps: Tuple[float, ...]
    radii: Tuple[float, ...]
    bases: Tuple[Tuple[float, ...], ...]
    perturbed: Tuple[Tuple[float, ...], ...]
    ergodic: Tuple[Tuple[float, ...], ...]
    metrics: Mapping[str, Tuple[float, ...]]
    safeguard_events: int = 0
    max_estimate_norm: float = 0.0
    max_estimate_iteration: int = 0
    config_hash: str = ""
    duration: float = field(default=0.0, compare=False)

    @property
    def final(self) -> Tuple[float, ...]:
        return self.bases[-1] if self.bases else self.initial


# ---- Functions -----------------------------------------------------------------------


@beartype
def eval_schedule(s: Schedule, k: int) -> Tuple[float, float]:
    r"""
    $(\gamma_k, \delta_k)$.

    ``` python
    >>> from zogames.learners import Schedule, eval_schedule
    >>> gamma, _ = eval_schedule(Schedule(1.0, 2000.0, 0.95, 1.0, 100.0, 0.75), 0)
    >>> round(gamma, 6)
    0.000731
    >>> _, delta = eval_schedule(Schedule(1.0, 2000.0, 0.95, 1.0, 100.0, 0.75), 900)
    >>> round(delta, 6)
    0.005623

    ```
    """
    if k < 0:
        raise ValueError(f"iterations count from zero (got {k})")

    return (
        s.c_gamma / (k + s.b_gamma) ** s.a_gamma,
        s.c_delta / (k + s.b_delta) ** s.a_delta,
    )


@beartype
def validate_schedule(s: Schedule, regime: Regime = Regime.ALMOST_SURE) -> ScheduleReport:
    r"""
    Checks the exponent conditions under which the step sizes diverge in sum, are
    square summable, have summable products with the radii and vanish relative to them.
    The strong-rate regime also wants $a_\gamma < 1$ and $a_\delta > 0$.

    ``` python
    >>> from zogames.learners import Regime, Schedule, validate_schedule
    >>> print(validate_schedule(Schedule(1.0, 2000.0, 0.95, 1.0, 100.0, 0.75), Regime.STRONG_RATE))
    strong-rate: PASS
      [pass] sum of steps diverges (a_gamma <= 1)
      [pass] sum of squared steps converges (a_gamma > 1/2)
      [pass] sum of step-radius products converges (a_gamma + a_delta > 1)
      [pass] step-radius ratio vanishes (a_gamma > a_delta)
      [pass] step exponent below one (a_gamma < 1)
      [pass] radius exponent positive (a_delta > 0)
    >>> validate_schedule(Schedule(1.0, 1.0, 1.0, 1.0, 1.0, 1 / 3), Regime.STRONG_RATE).failures
    ('step exponent below one (a_gamma < 1)',)

    ```

    With a strong-rate schedule the ratio $\gamma_{k-10}/\delta_k$ keeps shrinking.

    ``` python
    >>> from zogames.learners import eval_schedule
    >>> s = Schedule(1.0, 2000.0, 0.95, 1.0, 100.0, 0.75)
    >>> ratios = [eval_schedule(s, k - 10)[0] / eval_schedule(s, k)[1] for k in (10**4, 10**6, 10**8)]
    >>> ratios[0] > ratios[1] > ratios[2], ratios[2] < 0.1
    (True, True)

    ```
    """
    a_g, a_d = s.a_gamma, s.a_delta
    checks = [
        ("sum of steps diverges (a_gamma <= 1)", a_g <= 1.0),
        ("sum of squared steps converges (a_gamma > 1/2)", a_g > 0.5),
        ("sum of step-radius products converges (a_gamma + a_delta > 1)", a_g + a_d > 1.0),
        ("step-radius ratio vanishes (a_gamma > a_delta)", a_g > a_d),
    ]

    if regime is Regime.STRONG_RATE:
        checks.append(("step exponent below one (a_gamma < 1)", a_g < 1.0))
        checks.append(("radius exponent positive (a_delta > 0)", a_d > 0.0))

    return ScheduleReport(regime, tuple(ScheduleCondition(n, bool(p)) for n, p in checks))


@beartype
def ergodic_update(acc: ErgodicAccumulator, x_hat: Any, gamma: float) -> ErgodicAccumulator:
    if not gamma > 0.0:
        raise ValueError(f"gamma must be positive (got {gamma!r})")

    x = as_vector(x_hat, name="x_hat")
    weighted = gamma * x if acc.weighted_sum is None else acc.weighted_sum + gamma * x

    return ErgodicAccumulator(weighted, acc.weight_sum + gamma)


@beartype
def ergodic_point(acc: ErgodicAccumulator) -> Vector:
    r"""
    The step-weighted mean of the perturbed actions seen so far.

    ``` python
    >>> from zogames.learners import ErgodicAccumulator, ergodic_point, ergodic_update
    >>> acc = ergodic_update(ergodic_update(ErgodicAccumulator(), [0.0], 1.0), [3.0], 0.5)
    >>> ergodic_point(acc).tolist()
    [1.0]
    >>> ergodic_point(ErgodicAccumulator())
    Traceback (most recent call last):
      ...
    ValueError: no actions have been averaged yet

    ```
    """
    if acc.weighted_sum is None:
        raise ValueError("no actions have been averaged yet")

    return acc.weighted_sum / acc.weight_sum


@beartype
def omd_step(
    state: LearnerState,
    game: Game,
    dgf: Dgf,
    schedule: Schedule,
    rng: np.random.Generator,
) -> Tuple[LearnerState, RoundRecord]:
    r"""
    One optimistic mirror descent round.
    Both prox-mappings are anchored at the base iterate $X_k$.

    ``` python
    >>> import numpy as np
    >>> from zogames.games import make_quadratic_game
    >>> from zogames.geometry import EUCLIDEAN, FeasibleSet
    >>> from zogames.learners import LearnerState, Schedule, omd_step
    >>> g = make_quadratic_game([[0.0]], [0.0], [FeasibleSet.box([0.0], [1.0])])
    >>> s = Schedule(0.1, 1.0, 1.0, 0.05, 1.0, 1.0)
    >>> state = LearnerState.initial(g)
    >>> state, rec = omd_step(state, g, EUCLIDEAN, s, np.random.default_rng(0))
    >>> rec.leading.tolist(), rec.base.tolist()
    ([0.5], [0.5])

    ```
    """
    k = state.iteration
    gamma, delta = _step_sizes(schedule, k, game)
    leading = game.prox(dgf, state.base, -gamma * state.prev_estimate)

    return _observe_and_update(state, game, dgf, rng, k, gamma, delta, leading, False)


@beartype
def rmd_step(
    state: LearnerState,
    game: Game,
    dgf: Dgf,
    schedule: Schedule,
    rng: np.random.Generator,
) -> Tuple[LearnerState, RoundRecord]:
    r"""
    One reflected mirror descent round.
    The leading state $2X_k - X_{k-1}$ may leave $\mathcal{X}$ but must stay in the
    action space; when it does not it is projected back and the event is counted.
    """
    if dgf.kind is not DgfKind.EUCLIDEAN:
        raise ValueError("reflected mirror descent needs the euclidean distance-generating function")

    k = state.iteration
    gamma, delta = _step_sizes(schedule, k, game)
    leading = unconstrained_mirror_step(
        dgf, state.base, dgf.grad(state.base) - dgf.grad(state.prev_base)
    )
    safeguarded = not game.in_action_space(leading)

    if safeguarded:
        _LOGGER.debug("round %d: reflected state left the action space", k)
        leading = game.project_action(leading)

    return _observe_and_update(state, game, dgf, rng, k, gamma, delta, leading, safeguarded)


@beartype
def baseline_step(
    state: LearnerState,
    game: Game,
    dgf: Dgf,
    schedule: Schedule,
    rng: np.random.Generator,
    kind: BaselineKind,
) -> Tuple[LearnerState, RoundRecord]:
    r"""
    One round of plain mirror descent driven by a single-point estimator queried around
    the feasibility-adjusted base iterate.
    """
    k = state.iteration
    gamma, delta = _step_sizes(schedule, k, game)
    u = QueryDirection.sample(game.dims, rng)
    center = _adjust(state.base, delta, game.centers, game.radii, np.zeros(game.n))
    estimate = baseline_estimate(kind, bandit_view(game), center, u, delta)
    base = game.prox(dgf, state.base, -gamma * estimate)
    record = RoundRecord(
        iteration=k,
        gamma=gamma,
        delta=delta,
        leading=state.base,
        perturbed=center + delta * u.stacked,
        estimate=estimate,
        base=base,
    )
    nxt = dataclasses.replace(
        state,
        base=base,
        leading=state.base,
        prev_estimate=estimate,
        prev_base=state.base,
        iteration=k + 1,
    )

    return nxt, record


@beartype
def is_logged(k: int, iterations: int) -> bool:
    r"""
    Whether round *k* of *iterations* is recorded: every round below $10^3$, every
    10th below $10^4$, every 100th after that, and always the last.

    ``` python
    >>> from zogames.learners import is_logged
    >>> [is_logged(k, 10**5) for k in (999, 1001, 1010, 10_010, 10_100, 10**5)]
    [True, False, True, False, True, True]

    ```
    """
    if k == iterations or k < 1000:
        return True

    return k % (10 if k < 10_000 else 100) == 0


@beartype
def run_learning(
    game: Game,
    algorithm: Algorithm,
    dgf: Dgf,
    schedule: Schedule,
    iterations: int,
    seed: int,
    metrics: Sequence[str] = (),
    x0: Optional[Any] = None,
    regime: Regime = Regime.ALMOST_SURE,
    strict: bool = False,
) -> RunRecord:
    r"""
    Plays *iterations* rounds of *algorithm* on *game* with directions drawn from the
    seed's ``directions`` stream and returns the logged trace.
    Identical inputs give identical records.

    In *strict* runs every base iterate (and every OMD leading iterate) is checked for
    membership in $\mathcal{X}$ and every query for membership in $\mathcal{X}_a$;
    a miss raises [``FeasibilityError``][zogames.learners.FeasibilityError].

    ``` python
    >>> from zogames.games import make_quadratic_game
    >>> from zogames.geometry import EUCLIDEAN, FeasibleSet
    >>> from zogames.learners import Algorithm, Schedule, run_learning
    >>> g = make_quadratic_game([[1.0]], [-0.5], [FeasibleSet.box([0.0], [1.0])])
    >>> record = run_learning(g, Algorithm.OMD, EUCLIDEAN, Schedule(0.1, 1.0, 1.0, 0.05, 1.0, 0.5), 0, seed=1)
    >>> record.initial, record.iterations
    ((0.5,), ())

    ```
    """
    if iterations < 0:
        raise ValueError(f"iterations must be nonnegative (got {iterations})")

    if algorithm is Algorithm.RMD and dgf.kind is not DgfKind.EUCLIDEAN:
        raise ValueError("reflected mirror descent needs the euclidean distance-generating function")

    resolved = check_metrics(metrics, game)
    report = validate_schedule(schedule, regime)

    if not report.passed:
        _LOGGER.warning(
            "schedule fails the %s conditions: %s", regime.value, ", ".join(report.failures)
        )

    raw_delta = eval_schedule(schedule, 1)[1]

    if raw_delta >= RADIUS_CLAMP * game.min_radius:
        _LOGGER.warning(
            "query radius %.4g clamped to %.4g (half the smallest interior-ball radius)",
            raw_delta,
            RADIUS_CLAMP * game.min_radius,
        )

    started = time.perf_counter()
    rng = derive_stream(seed, "directions")
    state = LearnerState.initial(game, x0)
    initial = tuple(state.base.tolist())
    acc = ErgodicAccumulator()
    diagnostics = EstimateDiagnostics()
    cache: Dict[str, object] = {}
    logged_k: List[int] = []
    steps: List[float] = []
    radii: List[float] = []
    bases: List[Tuple[float, ...]] = []
    perturbed: List[Tuple[float, ...]] = []
    ergodic: List[Tuple[float, ...]] = []
    traces: Dict[str, List[float]] = {m.name: [] for m in resolved}
    kind = algorithm.baseline

    _LOGGER.info(
        "running %s (%s) on %s for %d iterations, seed %d",
        algorithm.value,
        dgf.kind.value,
        game.name,
        iterations,
        seed,
    )

    for k in range(1, iterations + 1):
        previous = state.base

        if algorithm is Algorithm.OMD:
            state, rec = omd_step(state, game, dgf, schedule, rng)
        elif algorithm is Algorithm.RMD:
            state, rec = rmd_step(state, game, dgf, schedule, rng)
        else:
            assert kind is not None
            state, rec = baseline_step(state, game, dgf, schedule, rng, kind)

        if strict:
            _verify(game, algorithm, rec)

        acc = ergodic_update(acc, rec.perturbed, rec.gamma)
        diagnostics = diagnostics.update(rec.estimate, k)

        if not is_logged(k, iterations):
            continue

        logged_k.append(k)
        steps.append(rec.gamma)
        radii.append(rec.delta)
        bases.append(tuple(rec.base.tolist()))
        perturbed.append(tuple(rec.perturbed.tolist()))
        point = ergodic_point(acc)
        ergodic.append(tuple(point.tolist()))

        if resolved:
            ctx = MetricContext(
                game, k, previous, rec.base, rec.perturbed, point, rec.estimate, cache
            )

            for metric in resolved:
                traces[metric.name].append(metric(ctx))

        if k % 10_000 == 0:
            _LOGGER.debug("round %d of %d, estimate norm %.3e", k, iterations, diagnostics.estimate_norm)

    if state.safeguard_events:
        _LOGGER.warning("%d reflected states were projected back into the action space", state.safeguard_events)

    return RunRecord(
        algorithm=algorithm.value,
        dgf=dgf.kind.value,
        seed=seed,
        initial=initial,
        iterations=tuple(logged_k),
        steps=tuple(steps),
        radii=tuple(radii),
        bases=tuple(bases),
        perturbed=tuple(perturbed),
        ergodic=tuple(ergodic),
        metrics={name: tuple(values) for name, values in traces.items()},
        safeguard_events=state.safeguard_events,
        max_estimate_norm=diagnostics.running_max_norm,
        max_estimate_iteration=diagnostics.argmax_iteration,
        duration=time.perf_counter() - started,
    )


def _step_sizes(schedule: Schedule, k: int, game: Game) -> Tuple[float, float]:
    gamma, delta = eval_schedule(schedule, k)

    return gamma, min(delta, RADIUS_CLAMP * game.min_radius)


def _observe_and_update(
    state: LearnerState,
    game: Game,
    dgf: Dgf,
    rng: np.random.Generator,
    k: int,
    gamma: float,
    delta: float,
    leading: Vector,
    safeguarded: bool,
) -> Tuple[LearnerState, RoundRecord]:
    u = QueryDirection.sample(game.dims, rng)
    perturbed = _adjust(leading, delta, game.centers, game.radii, u.stacked)
    payoffs = bandit_view(game).payoffs(perturbed)
    estimate, estimator = rpg_estimate(state.estimator, payoffs, u, delta)
    base = game.prox(dgf, state.base, -gamma * estimate)
    record = RoundRecord(
        iteration=k,
        gamma=gamma,
        delta=delta,
        leading=leading,
        perturbed=perturbed,
        estimate=estimate,
        base=base,
        payoffs=np.asarray(payoffs, dtype=np.float64),
        safeguarded=safeguarded,
    )
    nxt = LearnerState(
        base=base,
        leading=leading,
        prev_estimate=estimate,
        prev_base=state.base,
        estimator=estimator,
        iteration=k + 1,
        safeguard_events=state.safeguard_events + int(safeguarded),
    )

    return nxt, record


def _verify(game: Game, algorithm: Algorithm, rec: RoundRecord) -> None:
    if not game.contains(rec.base):
        raise FeasibilityError(f"round {rec.iteration}: base iterate left the feasible set")

    if algorithm is Algorithm.OMD and not game.contains(rec.leading):
        raise FeasibilityError(f"round {rec.iteration}: leading iterate left the feasible set")

    if not game.in_action_space(rec.perturbed):
        raise FeasibilityError(f"round {rec.iteration}: query left the action space")
