# ======================================================================================
# Copyright and other protections apply. Please see the accompanying LICENSE file for
# rights and restrictions governing use of this software. All rights not expressly
# waived or licensed are reserved. If that file is missing or appears to be modified
# from its original, then please contact the author before viewing or using this
# software in any capacity.
# ======================================================================================

r"""
Named per-iteration diagnostics recorded by [``run_learning``][zogames.learners.run_learning].
"""

from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, MutableMapping, Tuple

import numpy as np

from .analysis import merit_err
from .games import Game
from .types import Vector

__all__ = (
    "METRICS",
    "Metric",
    "MetricContext",
    "check_metrics",
    "register_metric",
)


# ---- Classes -------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class MetricContext:
    r"""
    What a metric sees after round *iteration*: the base iterate before and after the
    round, the perturbed query, the running ergodic average and the estimate.
    *cache* persists across the iterations of one run.
    """

    game: Game
    iteration: int
    previous: Vector
    base: Vector
    perturbed: Vector
    ergodic: Vector
    estimate: Vector
    cache: MutableMapping[str, object] = field(default_factory=dict)

    @property
    def critical_point(self) -> Vector:
        x_star = self.game.critical_point

        if x_star is None:
            raise ValueError(f"{self.game.name} has no known critical point")

        return x_star


@dataclass(frozen=True)
class Metric:
    name: str
    fn: Callable[[MetricContext], float]
    needs_critical_point: bool = False
    needs_potential: bool = False

    def __call__(self, ctx: MetricContext) -> float:
        return float(self.fn(ctx))


# ---- Data ----------------------------------------------------------------------------


METRICS: Dict[str, Metric] = {}


# ---- Functions -----------------------------------------------------------------------


def register_metric(
    name: str,
    needs_critical_point: bool = False,
    needs_potential: bool = False,
) -> Callable[[Callable[[MetricContext], float]], Callable[[MetricContext], float]]:
    r"""
    Decorator adding a metric to [``METRICS``][zogames.metrics.METRICS] under *name*.
    """

    def _register(fn: Callable[[MetricContext], float]) -> Callable[[MetricContext], float]:
        if name in METRICS:
            raise ValueError(f"metric {name!r} is already registered")

        METRICS[name] = Metric(name, fn, needs_critical_point, needs_potential)

        return fn

    return _register


def check_metrics(names: Iterable[str], game: Game) -> Tuple[Metric, ...]:
    r"""
    Resolves metric names for *game*, failing on unknown names and on metrics whose
    requirements the game cannot meet.

    ``` python
    >>> from zogames.games import make_quadratic_game
    >>> from zogames.geometry import FeasibleSet
    >>> from zogames.metrics import check_metrics
    >>> g = make_quadratic_game([[1.0]], [0.0], [FeasibleSet.box([-1.0], [1.0])])
    >>> [m.name for m in check_metrics(["distance-to-cp", "estimate-norm"], g)]
    ['distance-to-cp', 'estimate-norm']
    >>> check_metrics(["regret"], g)
    Traceback (most recent call last):
      ...
    ValueError: unknown metric 'regret' (known: distance-to-cp, ...)

    ```
    """
    resolved = []

    for name in names:
        if name not in METRICS:
            raise ValueError(f"unknown metric {name!r} (known: {', '.join(METRICS)})")

        metric = METRICS[name]

        if metric.needs_critical_point and game.critical_point is None:
            raise ValueError(f"metric {name!r} needs the critical point of {game.name}")

        if metric.needs_potential and not game.has_potential:
            raise ValueError(f"metric {name!r} needs a potential for {game.name}")

        resolved.append(metric)

    return tuple(resolved)


@register_metric("distance-to-cp", needs_critical_point=True)
def _distance(ctx: MetricContext) -> float:
    return _relative_gap(ctx.perturbed, ctx.critical_point)


@register_metric("squared-distance", needs_critical_point=True)
def _squared_distance(ctx: MetricContext) -> float:
    gap = ctx.perturbed - ctx.critical_point

    return float(gap @ gap)


@register_metric("merit")
def _merit(ctx: MetricContext) -> float:
    start = ctx.cache.get("merit-argmax")
    result = merit_err(ctx.game, ctx.game.project(ctx.ergodic), start=start)
    ctx.cache["merit-argmax"] = result.argmax

    return result.value


@register_metric("potential-gap", needs_critical_point=True, needs_potential=True)
def _potential_gap(ctx: MetricContext) -> float:
    if "potential-star" not in ctx.cache:
        ctx.cache["potential-star"] = float(ctx.game.potential(ctx.critical_point))

    return float(ctx.game.potential(ctx.perturbed)) - float(ctx.cache["potential-star"])  # type: ignore [arg-type]


@register_metric("estimate-norm")
def _estimate_norm(ctx: MetricContext) -> float:
    return float(np.linalg.norm(ctx.estimate))


@register_metric("ergodic-distance", needs_critical_point=True)
def _ergodic_distance(ctx: MetricContext) -> float:
    return _relative_gap(ctx.ergodic, ctx.critical_point)


@register_metric("update-distance")
def _update_distance(ctx: MetricContext) -> float:
    return float(np.linalg.norm(ctx.base - ctx.previous))


@register_metric("payoff-gap", needs_critical_point=True)
def _payoff_gap(ctx: MetricContext) -> float:
    if "payoff-star" not in ctx.cache:
        ctx.cache["payoff-star"] = float(ctx.game.payoffs(ctx.critical_point).sum())

    return float(ctx.game.payoffs(ctx.base).sum()) - float(ctx.cache["payoff-star"])  # type: ignore [arg-type]


def _relative_gap(x: Vector, x_star: Vector) -> float:
    return float(np.linalg.norm(x - x_star) / max(float(np.linalg.norm(x_star)), 1e-12))
