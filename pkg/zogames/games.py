# ======================================================================================
# Copyright and other protections apply. Please see the accompanying LICENSE file for
# rights and restrictions governing use of this software. All rights not expressly
# waived or licensed are reserved. If that file is missing or appears to be modified
# from its original, then please contact the author before viewing or using this
# software in any capacity.
# ======================================================================================

r"""
The game abstraction and the benchmark instances: synthetic quadratic games, portfolio
selection, zero-sum least squares, and building thermal control with a shared peak
charge.

Payoffs are costs (each player minimizes its own) and every oracle is vectorized over
leading axes, so ``#!python x`` may be one profile of shape ``#!python (n,)`` or a batch
of shape ``#!python (..., n)``.
"""

import copy
import enum
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Callable, Optional, Sequence, Tuple

import numpy as np
from scipy.special import logsumexp, softmax

from .bt import beartype
from .estimator import derive_stream
from .geometry import Dgf, DgfKind, FeasibleSet, InteriorBall, SetKind, prox_map
from .types import Matrix, Scalars, Vector, as_matrix, as_vector

__all__ = (
    "BanditView",
    "DEFAULT_ACTION_MARGIN",
    "Game",
    "GameEvaluation",
    "Regularity",
    "ThermalParams",
    "bandit_view",
    "check_potential",
    "check_pseudogradient",
    "evaluate_game",
    "finite_difference_potential_gradient",
    "finite_difference_pseudogradient",
    "make_lse_game",
    "make_portfolio_game",
    "make_quadratic_game",
    "make_synthetic_quadratic_game",
    "make_thermal_game",
    "sample_lse_game",
    "sample_portfolio_game",
    "sample_thermal_params",
    "shapley_weight",
)

_LOGGER = logging.getLogger(__name__)


# ---- Data ----------------------------------------------------------------------------


DEFAULT_ACTION_MARGIN = 0.25
_SYMMETRY_TOL = 1e-12
_SINGULAR_COND = 1e12


# ---- Types ---------------------------------------------------------------------------


_OracleT = Callable[[Vector], Vector]
_PotentialT = Callable[[Vector], Scalars]


class Regularity(str, enum.Enum):
    r"""
    Regularity classes of the pseudogradient.
    """

    MONOTONE = "monotone"
    STRONGLY_MONOTONE = "strongly-monotone"
    PSEUDO_MONOTONE = "pseudo-monotone"
    PSEUDO_MONOTONE_PLUS = "pseudo-monotone-plus"
    STRICTLY_PSEUDO_MONOTONE = "strictly-pseudo-monotone"
    STRONGLY_PSEUDO_MONOTONE = "strongly-pseudo-monotone"
    STRICTLY_COHERENT = "strictly-coherent"
    PSEUDOCONVEX_POTENTIAL = "pseudoconvex-potential"
    UNKNOWN = "unknown"


# ---- Classes -------------------------------------------------------------------------


class Game:
    r"""
    An *N*-player continuous game.

    Each player *i* picks $x^i$ from a compact convex set $\mathcal{X}^i$ and pays
    $J^i(x^i; x^{-i})$.
    The payoff oracle is defined on the larger action space $\mathcal{X}_a \supseteq
    \mathcal{X}$ (a box enlargement unless the payoffs forbid it).
    Analytic pseudogradient, potential, critical point and affine form are optional
    and only ever consulted by analysis code, never by the bandit learners.

    Games are immutable after construction.
    """

    def __init__(
        self,
        name: str,
        sets: Sequence[FeasibleSet],
        payoff_fn: _OracleT,
        *,
        action_margin: float = DEFAULT_ACTION_MARGIN,
        pseudogradient_fn: Optional[_OracleT] = None,
        potential_fn: Optional[_PotentialT] = None,
        critical_point: Optional[Any] = None,
        regularity: Regularity = Regularity.UNKNOWN,
        modulus: float = 0.0,
        affine: Optional[Tuple[Matrix, Vector]] = None,
    ):
        if not sets:
            raise ValueError("a game needs at least one player")

        self.name = name
        self.sets: Tuple[FeasibleSet, ...] = tuple(sets)
        self.action_sets: Tuple[FeasibleSet, ...] = tuple(
            s.enlarged(action_margin) for s in self.sets
        )
        self.balls: Tuple[InteriorBall, ...] = tuple(s.interior_ball() for s in self.sets)
        self.regularity = regularity
        self.modulus = float(modulus)
        self.affine = affine
        self._payoff_fn = payoff_fn
        self._pseudogradient_fn = pseudogradient_fn
        self._potential_fn = potential_fn
        self._dims = tuple(s.dim for s in self.sets)
        self.offsets = tuple(int(o) for o in np.concatenate(([0], np.cumsum(self._dims))))
        self.centers = np.concatenate([ball.center for ball in self.balls])
        self.radii = np.repeat([ball.radius for ball in self.balls], self._dims)
        self.critical_point: Optional[Vector] = (
            None if critical_point is None else as_vector(critical_point, self.n)
        )
        self._boxes = _stacked_box(self.sets)
        self._action_boxes = _stacked_box(self.action_sets)

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.name!r}, dims={self.dims})"

    @property
    def dims(self) -> Tuple[int, ...]:
        return self._dims

    @property
    def players(self) -> int:
        return len(self._dims)

    @property
    def n(self) -> int:
        return self.offsets[-1]

    @property
    def min_radius(self) -> float:
        return float(min(ball.radius for ball in self.balls))

    @property
    def has_pseudogradient(self) -> bool:
        return self._pseudogradient_fn is not None

    @property
    def has_potential(self) -> bool:
        return self._potential_fn is not None

    def split(self, x: Any) -> Tuple[Vector, ...]:
        v = np.asarray(x, dtype=np.float64)

        return tuple(
            v[..., self.offsets[i] : self.offsets[i + 1]] for i in range(self.players)
        )

    def payoffs(self, x: Any) -> Vector:
        v = self._checked(x)

        if not self.in_action_space(v):
            raise ValueError(f"profile lies outside the action space of {self.name}")

        return np.asarray(self._payoff_fn(v), dtype=np.float64)

    def pseudogradient(self, x: Any) -> Vector:
        if self._pseudogradient_fn is None:
            raise ValueError(f"{self.name} has no analytic pseudogradient")

        return np.asarray(self._pseudogradient_fn(self._checked(x)), dtype=np.float64)

    def potential(self, x: Any) -> Scalars:
        if self._potential_fn is None:
            raise ValueError(f"{self.name} has no potential")

        return np.asarray(self._potential_fn(self._checked(x)), dtype=np.float64)

    def contains(self, x: Any) -> bool:
        v = self._checked(x)

        if self._boxes is not None:
            return _in_box(v, *self._boxes)

        return all(s.contains(part) for s, part in zip(self.sets, self.split(v)))

    def in_action_space(self, x: Any) -> bool:
        v = self._checked(x)

        if self._action_boxes is not None:
            return _in_box(v, *self._action_boxes)

        return all(s.contains(part) for s, part in zip(self.action_sets, self.split(v)))

    def project(self, x: Any) -> Vector:
        v = as_vector(x, self.n)

        if self._boxes is not None:
            return np.clip(v, *self._boxes)

        return np.concatenate([s.project(p) for s, p in zip(self.sets, self.split(v))])

    def project_action(self, x: Any) -> Vector:
        v = as_vector(x, self.n)

        if self._action_boxes is not None:
            return np.clip(v, *self._action_boxes)

        return np.concatenate(
            [s.project(p) for s, p in zip(self.action_sets, self.split(v))]
        )

    def prox(self, dgf: Dgf, x: Any, y: Any) -> Vector:
        r"""
        The player-wise prox-mapping of a stacked profile.
        """
        if dgf.kind is DgfKind.EUCLIDEAN and self._boxes is not None:
            return np.clip(as_vector(x, self.n) + as_vector(y, self.n, name="y"), *self._boxes)

        return np.concatenate(
            [
                prox_map(dgf, s, xi, yi)
                for s, xi, yi in zip(self.sets, self.split(x), self.split(y))
            ]
        )

    def sample(self, rng: np.random.Generator, count: int) -> Matrix:
        return np.concatenate([s.sample(rng, count) for s in self.sets], axis=-1)

    def interior_sample(self, rng: np.random.Generator, count: int) -> Matrix:
        r"""
        Points pulled halfway toward the interior-ball centers, so small finite
        difference steps stay feasible.
        """
        return self.centers + 0.5 * (self.sample(rng, count) - self.centers)

    def with_critical_point(self, x: Any) -> "Game":
        other = copy.copy(self)
        other.critical_point = as_vector(x, self.n)

        return other

    def _checked(self, x: Any) -> Vector:
        v = np.asarray(x, dtype=np.float64)

        if v.shape[-1:] != (self.n,):
            raise ValueError(f"expected profiles with {self.n} coordinates (got {v.shape})")

        return v


class BanditView:
    r"""
    What a bandit learner may ask of a game: its dimensions and realized payoffs.
    """

    __slots__ = ("_game",)

    def __init__(self, game: Game):
        self._game = game

    @property
    def dims(self) -> Tuple[int, ...]:
        return self._game.dims

    def payoffs(self, x: Vector) -> Vector:
        return self._game.payoffs(x)


@dataclass(frozen=True, eq=False)
class GameEvaluation:
    payoffs: Vector
    pseudogradient: Optional[Vector]


@dataclass(frozen=True, eq=False)
class ThermalParams:
    r"""
    Parameters of the thermal control game.

    Building *i* runs the first-order model $r_t = a^i r_{t-1} + b^i x_t$ with readout
    $y_t = c^i r_t$, which must stay within its comfort band, and buys $x_t \in [0,
    \bar{x}^i]$ of energy at *price*.
    The shared peak charge is split by the Shapley-weighted log-sum-exp over *cliques*
    (zero-based player indices).
    """

    a: Vector
    b: Vector
    c: Vector
    comfort_lower: Matrix
    comfort_upper: Matrix
    capacity: Vector
    price: Vector
    demand_rate: float
    cliques: Tuple[Tuple[int, ...], ...]
    weights: Matrix
    smoothing: float = 20.0
    initial_state: Optional[Vector] = None

    def __post_init__(self) -> None:
        a = as_vector(self.a, name="a")
        buildings = a.shape[0]
        price = as_vector(self.price, name="price")
        horizon = price.shape[0]
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "price", price)
        object.__setattr__(self, "b", as_vector(self.b, buildings, name="b"))
        object.__setattr__(self, "c", as_vector(self.c, buildings, name="c"))
        object.__setattr__(self, "capacity", as_vector(self.capacity, buildings, name="capacity"))
        object.__setattr__(
            self,
            "initial_state",
            np.zeros(buildings)
            if self.initial_state is None
            else as_vector(self.initial_state, buildings, name="initial_state"),
        )

        for key in ("comfort_lower", "comfort_upper", "weights"):
            object.__setattr__(
                self, key, as_matrix(getattr(self, key), buildings, horizon, name=key)
            )

        if np.any(a <= 0.0) or np.any(a >= 1.0):
            raise ValueError(f"thermal coefficients a must lie in (0, 1) (got {a.tolist()})")

        if np.any(self.weights <= 0.0):
            raise ValueError("quadratic weights must be positive")

        if np.any(self.capacity <= 0.0):
            raise ValueError("capacities must be positive")

        if not self.smoothing > 0.0:
            raise ValueError(f"smoothing must be positive (got {self.smoothing!r})")

        if not self.cliques:
            raise ValueError("at least one clique is required")

        cliques = []

        for clique in self.cliques:
            members = tuple(sorted(set(int(i) for i in clique)))

            if not members:
                raise ValueError("cliques must be nonempty")

            if members[0] < 0 or members[-1] >= buildings:
                raise ValueError(f"clique {clique} names unknown buildings")

            cliques.append(members)

        object.__setattr__(self, "cliques", tuple(cliques))

    @property
    def buildings(self) -> int:
        return int(self.a.shape[0])

    @property
    def horizon(self) -> int:
        return int(self.price.shape[0])


# ---- Functions -----------------------------------------------------------------------


def bandit_view(game: Game) -> BanditView:
    return BanditView(game)


@beartype
def evaluate_game(g: Game, x: Any) -> GameEvaluation:
    r"""
    Payoffs at *x* plus the stacked pseudogradient where an analytic one exists.

    ``` python
    >>> from zogames.games import evaluate_game, make_quadratic_game
    >>> from zogames.geometry import FeasibleSet
    >>> g = make_quadratic_game([[1.0, 0.0], [0.0, 1.0]], [-0.5, -0.25],
    ...     [FeasibleSet.box([0.0], [1.0]), FeasibleSet.box([0.0], [1.0])])
    >>> ev = evaluate_game(g, [0.5, 0.25])
    >>> ev.payoffs.tolist(), ev.pseudogradient.tolist()
    ([-0.125, -0.03125], [0.0, 0.0])

    ```
    """
    v = as_vector(x, g.n)
    gradient = g.pseudogradient(v) if g.has_pseudogradient else None

    return GameEvaluation(g.payoffs(v), gradient)


@beartype
def make_quadratic_game(
    M: Any,
    q: Any,
    sets: Sequence[FeasibleSet],
    action_margin: float = DEFAULT_ACTION_MARGIN,
    name: str = "quadratic",
) -> Game:
    r"""
    The game with pseudogradient $F(x) = Mx + q$, realized by payoffs
    $J^i = \frac{1}{2} x^{i\top} M_{ii} x^i + x^{i\top}(\sum_{j \ne i} M_{ij} x^j + q^i)$.
    Diagonal blocks must be symmetric for those payoffs to produce *F*.

    The symmetric part's least eigenvalue is recorded as the modulus.
    A potential is attached when *M* is symmetric, and the critical point when the
    unconstrained solution of $Mx = -q$ is feasible.
    """
    dims = [s.dim for s in sets]
    n = sum(dims)
    m = as_matrix(M, n, n)
    qv = as_vector(q, n, name="q")
    offsets = np.concatenate(([0], np.cumsum(dims)))
    own = np.zeros_like(m)

    for lo, hi in zip(offsets[:-1], offsets[1:]):
        block = m[lo:hi, lo:hi]

        if not np.allclose(block, block.T, atol=_SYMMETRY_TOL, rtol=0.0):
            raise ValueError("diagonal blocks of M must be symmetric")

        own[lo:hi, lo:hi] = block

    starts = offsets[:-1]

    def payoff_fn(x: Vector) -> Vector:
        terms = x * (x @ m.T - 0.5 * (x @ own.T) + qv)

        return np.add.reduceat(terms, starts, axis=-1)

    def pseudogradient_fn(x: Vector) -> Vector:
        return x @ m.T + qv

    def potential_fn(x: Vector) -> Scalars:
        return 0.5 * np.einsum("...i,...i->...", x, x @ m.T) + x @ qv

    modulus = float(np.linalg.eigvalsh(0.5 * (m + m.T)).min())
    is_potential = np.allclose(m, m.T, atol=_SYMMETRY_TOL, rtol=0.0)

    if modulus > _SYMMETRY_TOL:
        regularity = Regularity.STRONGLY_MONOTONE
    elif modulus >= -_SYMMETRY_TOL:
        regularity = Regularity.MONOTONE
    else:
        regularity = Regularity.UNKNOWN

    game = Game(
        name,
        sets,
        payoff_fn,
        action_margin=action_margin,
        pseudogradient_fn=pseudogradient_fn,
        potential_fn=potential_fn if is_potential else None,
        regularity=regularity,
        modulus=max(modulus, 0.0),
        affine=(m, qv),
    )
    candidate = _interior_linear_solution(m, qv)

    if candidate is not None and game.contains(candidate):
        game.critical_point = candidate

    return game


@beartype
def make_synthetic_quadratic_game(
    players: int = 5,
    dim: int = 2,
    modulus: float = 0.5,
    seed: int = 0,
) -> Game:
    r"""
    A random strongly monotone quadratic game on unit boxes whose critical point lies in
    $[0.25, 0.75]^n$.
    The symmetric part of *M* is a random positive semidefinite matrix plus *modulus*
    times the identity; a skew coupling between different players rides on top.
    """
    if players < 1 or dim < 1:
        raise ValueError("players and dim must be positive")

    rng = derive_stream(seed, "game")
    n = players * dim
    b = rng.standard_normal((n, n)) / math.sqrt(n)
    c = rng.standard_normal((n, n)) / math.sqrt(n)
    skew = 0.5 * (c - c.T)

    for i in range(players):
        skew[i * dim : (i + 1) * dim, i * dim : (i + 1) * dim] = 0.0

    m = b @ b.T + modulus * np.eye(n) + skew
    x_star = rng.uniform(0.25, 0.75, size=n)
    sets = [FeasibleSet.box(np.zeros(dim), np.ones(dim)) for _ in range(players)]

    return make_quadratic_game(m, -m @ x_star, sets, name="synthetic-quadratic")


@beartype
def make_portfolio_game(mu: Any, sigma: Any, r: float) -> Game:
    r"""
    Single-player portfolio selection minimizing the negated Sharpe-style ratio
    $J(x) = (r - \mu^\top \varphi(x)) / \sqrt{\varphi(x)^\top \Sigma \varphi(x)}$ with
    $\varphi(x) = (x_1, \dots, x_{N-1}, 1 - \sum x)$ over the polytope of long-only
    weights reaching the target return *r*.
    The action space is the feasible set itself.

    ``` python
    >>> from zogames.games import make_portfolio_game
    >>> g = make_portfolio_game([0.1, 0.2], [[1.0, 0.0], [0.0, 1.0]], 0.15)
    >>> bool(abs(g.payoffs([0.5])[0]) < 1e-12)
    True

    ```
    """
    means = as_vector(mu, name="mu")
    assets = means.shape[0]

    if assets < 2:
        raise ValueError("a portfolio needs at least two assets")

    cov = as_matrix(sigma, assets, assets, name="sigma")

    try:
        np.linalg.cholesky(0.5 * (cov + cov.T))
    except np.linalg.LinAlgError:
        raise ValueError("sigma must be symmetric positive definite") from None

    if not np.allclose(cov, cov.T):
        raise ValueError("sigma must be symmetric positive definite")

    if r > means.max():
        raise ValueError(f"target return {r!r} exceeds every asset's mean return")

    dim = assets - 1
    rows = [np.ones(dim), means[-1] - means[:-1]]
    limits = [1.0, means[-1] - r]
    keep = [j for j, row in enumerate(rows) if np.linalg.norm(row) > 0.0]

    if any(limits[j] < 0.0 for j in range(len(rows)) if j not in keep):
        raise ValueError("portfolio feasible set is empty")

    feasible = FeasibleSet.polytope(
        np.zeros(dim), np.ones(dim), [rows[j] for j in keep], [limits[j] for j in keep]
    )

    def weights(x: Vector) -> Vector:
        return np.concatenate((x, 1.0 - x.sum(axis=-1, keepdims=True)), axis=-1)

    def payoff_fn(x: Vector) -> Vector:
        phi = weights(x)
        spread = np.sqrt(np.einsum("...i,...i->...", phi, phi @ cov))

        return ((r - phi @ means) / spread)[..., None]

    def pseudogradient_fn(x: Vector) -> Vector:
        phi = weights(x)
        exposure = phi @ cov
        spread = np.sqrt(np.einsum("...i,...i->...", phi, exposure))[..., None]
        numerator = (r - phi @ means)[..., None]
        d_mean = -(means[:-1] - means[-1])
        d_exposure = exposure[..., :-1] - exposure[..., -1:]

        return d_mean / spread - numerator * d_exposure / spread**3

    return Game(
        "portfolio",
        [feasible],
        payoff_fn,
        action_margin=0.0,
        pseudogradient_fn=pseudogradient_fn,
        regularity=Regularity.PSEUDO_MONOTONE,
    )


@beartype
def sample_portfolio_game(assets: int = 6, seed: int = 0) -> Game:
    r"""
    A seeded portfolio instance with the target return set to the mean of the asset
    means.
    """
    rng = derive_stream(seed, "game")
    means = rng.uniform(0.02, 0.12, size=assets)
    loadings = 0.1 * rng.standard_normal((assets, assets))
    cov = loadings @ loadings.T + 0.01 * np.eye(assets)

    return make_portfolio_game(means, cov, float(means.mean()))


@beartype
def make_lse_game(
    inputs: Any,
    labels: Any,
    w_bar: float = 5.0,
    lambda_bar: float = 5.0,
    features: Optional[int] = None,
    require_interior_cp: bool = False,
) -> Game:
    r"""
    The two-player zero-sum game behind constrained least squares.
    Player one picks coefficients $\tilde{w} \in [-\bar{w}, \bar{w}]^{N+1}$, player two
    picks multipliers $\lambda \in [-\bar{\lambda}, \bar{\lambda}]^M$, and
    $J^1 = -J^2 = \lambda^\top(\tilde{Z}^\top \tilde{w} - y) - \frac{1}{2}\lVert\lambda\rVert^2$.

    One-dimensional *inputs* are lifted to the powers $z, z^2, \dots, z^N$ (*features*
    defaults to 5); two-dimensional inputs are used as given, one row per sample.
    """
    z = np.asarray(inputs, dtype=np.float64)

    if z.ndim == 1:
        powers = 5 if features is None else features
        z = np.power.outer(z, np.arange(1, powers + 1))

    z = as_matrix(z, name="inputs")
    samples = z.shape[0]
    y = as_vector(labels, samples, name="labels")
    z_tilde = np.vstack((np.ones(samples), z.T))
    width = z_tilde.shape[0]
    n = width + samples
    m_lin = np.zeros((n, n))
    m_lin[:width, width:] = z_tilde
    m_lin[width:, :width] = -z_tilde.T
    m_lin[width:, width:] = np.eye(samples)
    q = np.concatenate((np.zeros(width), y))

    def payoff_fn(x: Vector) -> Vector:
        w, lam = x[..., :width], x[..., width:]
        j = np.einsum("...i,...i->...", lam, w @ z_tilde - y) - 0.5 * np.einsum(
            "...i,...i->...", lam, lam
        )

        return np.stack((j, -j), axis=-1)

    def pseudogradient_fn(x: Vector) -> Vector:
        return x @ m_lin.T + q

    candidate = _interior_linear_solution(m_lin, q)

    if candidate is None and require_interior_cp:
        raise ValueError("the least-squares game is rank deficient")

    game = Game(
        "lse",
        [
            FeasibleSet.box(np.full(width, -w_bar), np.full(width, w_bar)),
            FeasibleSet.box(np.full(samples, -lambda_bar), np.full(samples, lambda_bar)),
        ],
        payoff_fn,
        pseudogradient_fn=pseudogradient_fn,
        regularity=Regularity.MONOTONE,
        affine=(m_lin, q),
    )

    if candidate is not None and game.contains(candidate):
        game.critical_point = candidate
    elif require_interior_cp:
        raise ValueError("the least-squares critical point is not interior")

    return game


@beartype
def sample_lse_game(
    seed: int = 0,
    features: int = 5,
    samples: int = 10,
    w_bar: float = 5.0,
    lambda_bar: float = 5.0,
) -> Game:
    r"""
    Samples inputs from $[-1.5, 1.5]$, a ground-truth polynomial with coefficients in
    $[-1, 1]$, and label noise from $[-2, 2]$.
    """
    rng = derive_stream(seed, "game")
    z = rng.uniform(-1.5, 1.5, size=samples)
    truth = rng.uniform(-1.0, 1.0, size=features + 1)
    lifted = np.power.outer(z, np.arange(features + 1))
    y = lifted @ truth + rng.uniform(-2.0, 2.0, size=samples)

    return make_lse_game(z, y, w_bar, lambda_bar, features)


@beartype
def shapley_weight(players: int, clique_size: int) -> float:
    r"""
    $(N - |\mathcal{C}|)!\,(|\mathcal{C}| - 1)!\,/\,N!$, computed exactly and then
    rounded once.

    ``` python
    >>> from zogames.games import shapley_weight
    >>> shapley_weight(1, 1), shapley_weight(2, 1), shapley_weight(3, 3)
    (1.0, 0.5, 0.333)

    ```
    """
    if not 1 <= clique_size <= players:
        raise ValueError(f"clique size must lie in [1, {players}] (got {clique_size})")

    return float(
        Fraction(
            math.factorial(players - clique_size) * math.factorial(clique_size - 1),
            math.factorial(players),
        )
    )


@beartype
def sample_thermal_params(
    seed: int = 0,
    buildings: int = 10,
    horizon: int = 2,
    comfort: Tuple[float, float] = (1.0, 4.0),
    capacity: float = 3.0,
    price: Tuple[float, float] = (0.5, 1.0),
    demand_rate: float = 1.0,
    smoothing: float = 20.0,
) -> ThermalParams:
    r"""
    Seeded thermal parameters: $a^i \sim U[0.8, 0.95]$, $b^i = c^i = 1$, zero initial
    state, quadratic weights $\lambda \sim U[0.04, 0.06]$, prices drawn from the *price*
    range, and the singleton cliques plus the grand coalition.
    """
    rng = derive_stream(seed, "game")
    cliques = tuple((i,) for i in range(buildings))

    if buildings > 1:
        cliques += (tuple(range(buildings)),)

    return ThermalParams(
        a=rng.uniform(0.8, 0.95, size=buildings),
        b=np.ones(buildings),
        c=np.ones(buildings),
        comfort_lower=np.full((buildings, horizon), comfort[0]),
        comfort_upper=np.full((buildings, horizon), comfort[1]),
        capacity=np.full(buildings, capacity),
        price=rng.uniform(price[0], price[1], size=horizon),
        demand_rate=demand_rate,
        cliques=cliques,
        weights=rng.uniform(0.04, 0.06, size=(buildings, horizon)),
        smoothing=smoothing,
    )


@beartype
def make_thermal_game(p: ThermalParams) -> Game:
    r"""
    Building *i* pays
    $J^i = p_e^\top x^i + \sum_t \lambda_{it} (x^i_t)^2 + p_d R^i(x)$ where the peak
    share
    $R^i = \sum_{\mathcal{C} \ni i} w(\mathcal{C}) (V(\mathcal{C}, x) - V(\mathcal{C}
    \setminus \{i\}, x))$ uses the smoothed peak
    $V(\mathcal{C}, x) = \frac{1}{C} \ln \sum_t \exp(C \sum_{l \in \mathcal{C}} x^l_t)$.
    The comfort dynamics are eliminated in closed form, so each $\mathcal{X}^i$ is an
    explicit polytope.
    """
    buildings, horizon = p.buildings, p.horizon
    steps = np.arange(horizon)
    lag = steps[:, None] - steps[None, :]
    sets = []

    for i in range(buildings):
        response = np.where(lag >= 0, p.c[i] * p.b[i] * p.a[i] ** np.maximum(lag, 0), 0.0)
        drift = p.c[i] * p.a[i] ** (steps + 1) * p.initial_state[i]

        try:
            sets.append(
                FeasibleSet.polytope(
                    np.zeros(horizon),
                    np.full(horizon, p.capacity[i]),
                    np.vstack((response, -response)),
                    np.concatenate(
                        (p.comfort_upper[i] - drift, drift - p.comfort_lower[i])
                    ),
                )
            )
        except ValueError as exc:
            raise ValueError(f"infeasible comfort band for building {i} ({exc})") from None

    shares = [
        (np.asarray(clique), shapley_weight(buildings, len(clique)))
        for clique in p.cliques
    ]
    smoothing = p.smoothing
    empty_peak = math.log(horizon) / smoothing

    def peak(load: Vector) -> Vector:
        return logsumexp(smoothing * load, axis=-1) / smoothing

    def profile(x: Vector) -> Vector:
        return x.reshape(x.shape[:-1] + (buildings, horizon))

    def private_cost(loads: Vector) -> Vector:
        return loads @ p.price + np.sum(p.weights * loads * loads, axis=-1)

    def payoff_fn(x: Vector) -> Vector:
        loads = profile(x)
        cost = private_cost(loads)
        share = np.zeros_like(cost)

        for clique, weight in shares:
            total = loads[..., clique, :].sum(axis=-2)
            full = peak(total)

            for i in clique:
                without = empty_peak if len(clique) == 1 else peak(total - loads[..., i, :])
                share[..., i] += weight * (full - without)

        return cost + p.demand_rate * share

    def pseudogradient_fn(x: Vector) -> Vector:
        loads = profile(x)
        grad = p.price + 2.0 * p.weights * loads

        for clique, weight in shares:
            tilt = softmax(smoothing * loads[..., clique, :].sum(axis=-2), axis=-1)
            grad[..., clique, :] += (p.demand_rate * weight) * tilt[..., None, :]

        return grad.reshape(x.shape)

    def potential_fn(x: Vector) -> Scalars:
        loads = profile(x)
        value = private_cost(loads).sum(axis=-1)

        for clique, weight in shares:
            value = value + p.demand_rate * weight * peak(loads[..., clique, :].sum(axis=-2))

        return value

    return Game(
        "thermal",
        sets,
        payoff_fn,
        pseudogradient_fn=pseudogradient_fn,
        potential_fn=potential_fn,
        regularity=Regularity.STRONGLY_MONOTONE,
        modulus=2.0 * float(p.weights.min()),
    )


def finite_difference_pseudogradient(game: Game, x: Any, step: float = 1e-6) -> Vector:
    r"""
    Central differences of each player's payoff in its own coordinates.
    """
    v = as_vector(x, game.n)
    owners = np.repeat(np.arange(game.players), game.dims)
    shifts = step * np.eye(game.n)
    ahead = game.payoffs(v + shifts)
    behind = game.payoffs(v - shifts)
    coords = np.arange(game.n)

    return (ahead[coords, owners] - behind[coords, owners]) / (2.0 * step)


def finite_difference_potential_gradient(game: Game, x: Any, step: float = 1e-6) -> Vector:
    v = as_vector(x, game.n)
    shifts = step * np.eye(game.n)

    return (game.potential(v + shifts) - game.potential(v - shifts)) / (2.0 * step)


def check_pseudogradient(game: Game, rng: np.random.Generator, points: int = 20) -> float:
    r"""
    Worst relative error between the analytic pseudogradient and central differences of
    the payoffs over *points* interior profiles.
    """
    return max(
        _relative_error(finite_difference_pseudogradient(game, x), game.pseudogradient(x))
        for x in game.interior_sample(rng, points)
    )


def check_potential(game: Game, rng: np.random.Generator, points: int = 20) -> float:
    r"""
    Worst relative error between central differences of the potential and the stacked
    pseudogradient.
    """
    return max(
        _relative_error(finite_difference_potential_gradient(game, x), game.pseudogradient(x))
        for x in game.interior_sample(rng, points)
    )


def _relative_error(approx: Vector, exact: Vector) -> float:
    return float(np.linalg.norm(approx - exact) / max(np.linalg.norm(exact), 1e-6))


def _interior_linear_solution(m: Matrix, q: Vector) -> Optional[Vector]:
    if np.linalg.cond(m) > _SINGULAR_COND:
        return None

    return np.linalg.solve(m, -q)


def _stacked_box(sets: Sequence[FeasibleSet]) -> Optional[Tuple[Vector, Vector]]:
    if any(s.kind is not SetKind.BOX for s in sets):
        return None

    return (
        np.concatenate([s.lower for s in sets]),
        np.concatenate([s.upper for s in sets]),
    )


def _in_box(v: Vector, lower: Vector, upper: Vector, tol: float = 1e-9) -> bool:
    return bool(np.all(np.isfinite(v)) and np.all(v >= lower - tol) and np.all(v <= upper + tol))
