# ======================================================================================
# Copyright and other protections apply. Please see the accompanying LICENSE file for
# rights and restrictions governing use of this software. All rights not expressly
# waived or licensed are reserved. If that file is missing or appears to be modified
# from its original, then please contact the author before viewing or using this
# software in any capacity.
# ======================================================================================

r"""
Query directions, feasibility adjustment, the residual pseudogradient estimate, the
one-point and two-point baselines, and Monte Carlo diagnostics.

Nothing in here sees a gradient.
Estimates are built from realized payoff scalars only, which is the whole point.
"""

import enum
import hashlib
import logging
from dataclasses import dataclass, replace
from typing import Any, Optional, Sequence, Tuple

import numpy as np

from .bt import beartype
from .geometry import InteriorBall
from .protocol import SupportsPayoffs
from .types import Matrix, Vector, as_vector

__all__ = (
    "BaselineKind",
    "EstimateDiagnostics",
    "EstimateMoments",
    "EstimatorState",
    "QueryDirection",
    "adjust_feasibility",
    "baseline_estimate",
    "derive_stream",
    "estimate_moments",
    "rpg_estimate",
    "sample_unit_sphere",
)

_LOGGER = logging.getLogger(__name__)


# ---- Data ----------------------------------------------------------------------------


_SEED_MASK = (1 << 64) - 1


# ---- Types ---------------------------------------------------------------------------


class BaselineKind(str, enum.Enum):
    ONE_POINT = "one-point"
    TWO_POINT = "two-point"


# ---- Classes -------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class QueryDirection:
    r"""
    One unit direction per player, stored stacked in player order.
    """

    dims: Tuple[int, ...]
    stacked: Vector

    def __post_init__(self) -> None:
        if not self.dims or any(d < 1 for d in self.dims):
            raise ValueError(f"dims must be positive (got {self.dims})")

        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        object.__setattr__(self, "stacked", as_vector(self.stacked, sum(self.dims), name="u"))

    @classmethod
    def sample(cls, dims: Sequence[int], rng: np.random.Generator) -> "QueryDirection":
        return cls(tuple(dims), _sample_directions(tuple(dims), rng, 1)[0])

    @classmethod
    def from_parts(cls, parts: Sequence[Any]) -> "QueryDirection":
        vectors = [as_vector(p, name="u") for p in parts]

        return cls(tuple(v.shape[0] for v in vectors), np.concatenate(vectors))

    @property
    def per_player(self) -> Tuple[Vector, ...]:
        return tuple(np.split(self.stacked, np.cumsum(self.dims)[:-1]))


@dataclass(frozen=True, eq=False)
class EstimatorState:
    r"""
    What the residual estimate carries between rounds: the previous round's realized
    payoffs and, for inspection, the previous radius and direction.
    The initial state holds payoffs at the unperturbed initial profile.
    """

    prev_payoffs: Vector
    prev_radius: Optional[float] = None
    prev_direction: Optional[QueryDirection] = None

    @classmethod
    def initial(cls, payoffs: Any) -> "EstimatorState":
        return cls(_finite_payoffs(payoffs))


@dataclass(frozen=True)
class EstimateDiagnostics:
    r"""
    Running estimate-norm statistics.
    The running maximum is nondecreasing and remembers the iteration that set it.
    """

    estimate_norm: float = 0.0
    running_max_norm: float = 0.0
    argmax_iteration: int = 0
    count: int = 0

    def update(self, estimate: Vector, iteration: int) -> "EstimateDiagnostics":
        norm = float(np.linalg.norm(estimate))

        if norm > self.running_max_norm:
            return EstimateDiagnostics(norm, norm, iteration, self.count + 1)

        return replace(self, estimate_norm=norm, count=self.count + 1)


@dataclass(frozen=True, eq=False)
class EstimateMoments:
    r"""
    Monte Carlo mean and per-coordinate standard error of an estimate.
    """

    mean: Vector
    stderr: Vector
    samples: int

    @property
    def stderr_norm(self) -> float:
        return float(np.linalg.norm(self.stderr))


# ---- Functions -----------------------------------------------------------------------


def derive_stream(seed: int, label: str) -> np.random.Generator:
    r"""
    An independent generator for the named purpose (``#!python "directions"``,
    ``#!python "game"``, ``#!python "multistart"``, ...) derived from a 64-bit master
    seed.
    Different labels never share a stream; the same label always reproduces one.

    ``` python
    >>> from zogames.estimator import derive_stream
    >>> a = derive_stream(7, "directions").standard_normal(3)
    >>> b = derive_stream(7, "directions").standard_normal(3)
    >>> c = derive_stream(7, "game").standard_normal(3)
    >>> bool((a == b).all()), bool((a == c).all())
    (True, False)

    ```
    """
    key = int.from_bytes(hashlib.sha256(label.encode("utf-8")).digest()[:8], "little")

    return np.random.default_rng(np.random.SeedSequence([seed & _SEED_MASK, key]))


@beartype
def sample_unit_sphere(
    dim: int,
    rng: np.random.Generator,
    count: Optional[int] = None,
) -> Vector:
    r"""
    Uniform draws from the unit sphere in *dim* dimensions (normalized Gaussians).
    Returns one vector, or a *count* by *dim* array.
    """
    if dim < 1:
        raise ValueError(f"dim must be positive (got {dim})")

    draws = _sample_directions((dim,), rng, 1 if count is None else count)

    return draws[0] if count is None else draws


@beartype
def adjust_feasibility(x: Any, delta: float, ball: InteriorBall, u: Any) -> Vector:
    r"""
    Pulls *x* toward the ball center so the perturbed action stays feasible:
    $\hat{X} = (1 - \delta/r) X + (\delta/r)(p + r u)$.

    ``` python
    >>> from zogames.estimator import adjust_feasibility
    >>> from zogames.geometry import InteriorBall
    >>> ball = InteriorBall([0.5], 0.5)
    >>> adjust_feasibility([1.0], 0.1, ball, [1.0]).tolist()
    [1.0]
    >>> adjust_feasibility([1.0], 0.1, ball, [-1.0]).tolist()
    [0.8]

    ```
    """
    v = as_vector(x, ball.dim)
    direction = as_vector(u, ball.dim, name="u")

    if not 0.0 <= delta < ball.radius:
        raise ValueError(f"delta must lie in [0, {ball.radius}) (got {delta!r})")

    return _adjust(v, delta, ball.center, np.full(ball.dim, ball.radius), direction)


@beartype
def rpg_estimate(
    state: EstimatorState,
    payoffs: Any,
    u: QueryDirection,
    delta: float,
) -> Tuple[Vector, EstimatorState]:
    r"""
    The residual pseudogradient
    $G^i_k = (n^i/\delta_k)(\hat{J}^i_k - \hat{J}^i_{k-1}) u^i_k$, stacked in player
    order, along with the state for the next round.

    ``` python
    >>> from zogames.estimator import EstimatorState, QueryDirection, rpg_estimate
    >>> state = EstimatorState.initial([1.0])
    >>> g, state = rpg_estimate(state, [1.3], QueryDirection((2,), [1.0, 0.0]), 0.1)
    >>> g.tolist()
    [6.0, 0.0]
    >>> state.prev_payoffs.tolist()
    [1.3]

    ```
    """
    if not delta > 0.0:
        raise ValueError(f"delta must be positive (got {delta!r})")

    current = _finite_payoffs(payoffs, len(u.dims))
    dims = np.asarray(u.dims, dtype=np.float64)

    if current.shape != state.prev_payoffs.shape:
        raise ValueError("payoffs do not match the previous round's player count")

    scale = dims * (current - state.prev_payoffs) / delta
    estimate = np.repeat(scale, u.dims) * u.stacked

    return estimate, EstimatorState(current, float(delta), u)


@beartype
def baseline_estimate(
    kind: BaselineKind,
    oracle: SupportsPayoffs,
    x: Any,
    u: QueryDirection,
    delta: float,
) -> Vector:
    r"""
    Classical bandit estimates around the (already adjusted) point *x*.
    The one-point estimate $(n^i/\delta) J^i(x + \delta u) u^i$ stays nonzero even for
    constant payoffs; the two-point estimate spends a second mirrored query to cancel
    that.

    ``` python
    >>> from zogames.estimator import BaselineKind, QueryDirection, baseline_estimate
    >>> from zogames.games import bandit_view, make_quadratic_game
    >>> from zogames.geometry import FeasibleSet
    >>> g = make_quadratic_game([[0.0]], [3.0], [FeasibleSet.box([-1.0], [1.0])])
    >>> u = QueryDirection((1,), [1.0])
    >>> baseline_estimate(BaselineKind.TWO_POINT, bandit_view(g), [0.2], u, 0.01).tolist()
    [3.0]

    ```
    """
    if not delta > 0.0:
        raise ValueError(f"delta must be positive (got {delta!r})")

    center = as_vector(x, u.stacked.shape[0])
    dims = np.asarray(u.dims, dtype=np.float64)
    ahead = _finite_payoffs(oracle.payoffs(center + delta * u.stacked), len(u.dims))

    if kind is BaselineKind.ONE_POINT:
        scale = dims * ahead / delta
    else:
        behind = _finite_payoffs(oracle.payoffs(center - delta * u.stacked), len(u.dims))
        scale = dims * 0.5 * (ahead - behind) / delta

    return np.repeat(scale, u.dims) * u.stacked


@beartype
def estimate_moments(
    oracle: SupportsPayoffs,
    base: Any,
    delta: float,
    rng: np.random.Generator,
    samples: int,
    prev_base: Optional[Any] = None,
    prev_delta: Optional[float] = None,
    prev_payoffs: Optional[Any] = None,
    batch: int = 50_000,
) -> EstimateMoments:
    r"""
    Monte Carlo moments of the residual estimate at a frozen state.

    The current query sits at $\bar{X}_{k+1/2} + \delta u_k$ around the adjusted point
    *base*.
    The previous realized payoffs either come from a fresh query at *prev_base* with
    radius *prev_delta* and an independent direction (both resampled per draw), or are
    pinned to *prev_payoffs*.
    Draws are vectorized in batches of *batch*.
    """
    center = as_vector(base, name="base")
    dims = oracle.dims
    n = sum(dims)

    if center.shape[0] != n:
        raise ValueError(f"base must have {n} coordinates (got {center.shape[0]})")

    if not delta > 0.0:
        raise ValueError(f"delta must be positive (got {delta!r})")

    if (prev_payoffs is None) == (prev_base is None):
        raise ValueError("supply exactly one of prev_base or prev_payoffs")

    pinned = None if prev_payoffs is None else _finite_payoffs(prev_payoffs, len(dims))
    prev_center = None if prev_base is None else as_vector(prev_base, n, name="prev_base")
    prev_radius = delta if prev_delta is None else prev_delta
    scale = np.asarray(dims, dtype=np.float64) / delta
    total = np.zeros(n)
    total_sq = np.zeros(n)
    done = 0

    while done < samples:
        count = min(batch, samples - done)
        u = _sample_directions(dims, rng, count)
        current = oracle.payoffs(center + delta * u)

        if pinned is None:
            assert prev_center is not None
            u_prev = _sample_directions(dims, rng, count)
            previous = oracle.payoffs(prev_center + prev_radius * u_prev)
        else:
            previous = np.broadcast_to(pinned, current.shape)

        g = np.repeat(scale * (current - previous), dims, axis=1) * u
        total += g.sum(axis=0)
        total_sq += (g * g).sum(axis=0)
        done += count

    mean = total / samples
    variance = np.maximum(total_sq / samples - mean * mean, 0.0)
    _LOGGER.debug("estimated moments from %d samples", samples)

    return EstimateMoments(mean, np.sqrt(variance / samples), samples)


def _sample_directions(dims: Tuple[int, ...], rng: np.random.Generator, count: int) -> Matrix:
    offsets = np.concatenate(([0], np.cumsum(dims)[:-1]))

    while True:
        draws = rng.standard_normal((count, sum(dims)))
        norms = np.sqrt(np.add.reduceat(draws * draws, offsets, axis=1))

        if np.all(norms > 0.0):
            return draws / np.repeat(norms, dims, axis=1)


def _adjust(x: Vector, delta: float, centers: Vector, radii: Vector, u: Vector) -> Vector:
    t = delta / radii

    return (1.0 - t) * x + t * (centers + radii * u)


def _finite_payoffs(payoffs: Any, players: Optional[int] = None) -> Vector:
    values = np.asarray(payoffs, dtype=np.float64).reshape(-1)

    if players is not None and values.shape[0] != players:
        raise ValueError(f"expected {players} payoffs (got {values.shape[0]})")

    if not np.all(np.isfinite(values)):
        raise FloatingPointError(f"payoff oracle returned non-finite values {values.tolist()}")

    return values
