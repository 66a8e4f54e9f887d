# ======================================================================================
# Copyright and other protections apply. Please see the accompanying LICENSE file for
# rights and restrictions governing use of this software. All rights not expressly
# waived or licensed are reserved. If that file is missing or appears to be modified
# from its original, then please contact the author before viewing or using this
# software in any capacity.
# ======================================================================================

r"""
Feasible-set geometry, distance-generating functions, Bregman divergences, mirror
steps and prox-mappings.

All sets are per-player; a game stacks them.
Prox-mappings follow the sign convention $P_{x,\mathcal{S}}(y) = \arg\min_{x' \in
\mathcal{S}} \{ \langle y, x - x' \rangle + D(x', x) \}$, so descent on a pseudogradient
$F$ passes $y = -\gamma F$.
"""

import enum
import logging
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np
from scipy.optimize import linprog
from scipy.special import softmax, xlogy

from .bt import beartype
from .types import Matrix, Vector, as_matrix, as_vector

__all__ = (
    "DYKSTRA_MAX_SWEEPS",
    "DYKSTRA_TOL",
    "Dgf",
    "DgfKind",
    "EUCLIDEAN",
    "FeasibleSet",
    "InteriorBall",
    "MEMBERSHIP_TOL",
    "NEGENTROPY",
    "NEGENTROPY_FLOOR",
    "SetKind",
    "bregman_div",
    "prox_map",
    "project_polytope",
    "unconstrained_mirror_step",
)

_LOGGER = logging.getLogger(__name__)


# ---- Data ----------------------------------------------------------------------------


MEMBERSHIP_TOL = 1e-9
DYKSTRA_TOL = 1e-10
DYKSTRA_MAX_SWEEPS = 10_000
NEGENTROPY_FLOOR = 1e-300
_BALL_SHRINK = 1.0 - 1e-6
_REJECTION_BATCHES = 1_000


# ---- Types ---------------------------------------------------------------------------


class SetKind(str, enum.Enum):
    BOX = "box"
    SIMPLEX = "simplex"
    POLYTOPE = "polytope"


class DgfKind(str, enum.Enum):
    EUCLIDEAN = "euclidean"
    NEGENTROPY = "negentropy"


# ---- Classes -------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class InteriorBall:
    r"""
    A closed ball $B(p, r)$ inside a feasible set, used to keep perturbed actions
    feasible.
    """

    center: Vector
    radius: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "center", as_vector(self.center, name="center"))

        if not (np.isfinite(self.radius) and self.radius > 0):
            raise ValueError(f"radius must be positive (got {self.radius!r})")

        object.__setattr__(self, "radius", float(self.radius))

    @property
    def dim(self) -> int:
        return int(self.center.shape[0])


@dataclass(frozen=True, eq=False)
class FeasibleSet:
    r"""
    A nonempty compact convex set: a box, the probability simplex, or a box intersected
    with half-spaces $a_j \cdot x \le b_j$.

    Use the [``box``][zogames.geometry.FeasibleSet.box],
    [``simplex``][zogames.geometry.FeasibleSet.simplex] and
    [``polytope``][zogames.geometry.FeasibleSet.polytope] constructors rather than
    calling this directly.
    Polytopes are checked for a nonempty interior at construction.

    ``` python
    >>> from zogames.geometry import FeasibleSet
    >>> s = FeasibleSet.polytope([0.0, 0.0], [1.0, 1.0], [[1.0, 1.0]], [1.0])
    >>> s.contains([0.2, 0.3]), s.contains([0.8, 0.8])
    (True, False)
    >>> ball = s.interior_ball()
    >>> round(ball.radius, 4)
    0.2929

    ```
    """

    kind: SetKind
    lower: Vector
    upper: Vector
    a: Matrix
    b: Vector
    _ball: Optional[InteriorBall] = field(default=None, init=False, repr=False)

    def __post_init__(self) -> None:
        lower = as_vector(self.lower, name="lower")
        dim = lower.shape[0]
        upper = as_vector(self.upper, dim, name="upper")

        if np.any(lower > upper):
            raise ValueError(f"lower bounds exceed upper bounds ({lower} > {upper})")

        a = np.asarray(self.a, dtype=np.float64).reshape(-1, dim)
        a = as_matrix(a, cols=dim, name="a")
        b = as_vector(self.b, a.shape[0], name="b") if a.shape[0] else np.zeros(0)

        if np.any(np.linalg.norm(a, axis=1) == 0.0):
            raise ValueError("half-space normals must be nonzero")

        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

        if self.kind is SetKind.POLYTOPE:
            # Fails loudly on empty or flat polytopes
            object.__setattr__(self, "_ball", self._chebyshev_ball())

    @classmethod
    def box(cls, lower: Any, upper: Any) -> "FeasibleSet":
        return cls(SetKind.BOX, lower, upper, np.zeros((0, len(lower))), np.zeros(0))

    @classmethod
    def simplex(cls, dim: int) -> "FeasibleSet":
        if dim < 1:
            raise ValueError(f"dim must be positive (got {dim})")

        return cls(
            SetKind.SIMPLEX, np.zeros(dim), np.ones(dim), np.zeros((0, dim)), np.zeros(0)
        )

    @classmethod
    def polytope(cls, lower: Any, upper: Any, a: Any, b: Any) -> "FeasibleSet":
        return cls(SetKind.POLYTOPE, lower, upper, a, b)

    @property
    def dim(self) -> int:
        return int(self.lower.shape[0])

    def contains(self, x: Any, tol: float = MEMBERSHIP_TOL) -> bool:
        r"""
        Whether *x* (or every row of a batch of points) lies in the set to tolerance
        *tol*.
        """
        v = np.asarray(x, dtype=np.float64)

        if v.shape[-1] != self.dim:
            raise ValueError(f"expected {self.dim} coordinates (got {v.shape[-1]})")

        if not np.all(np.isfinite(v)):
            return False

        if np.any(v < self.lower - tol) or np.any(v > self.upper + tol):
            return False

        if self.kind is SetKind.SIMPLEX:
            return bool(np.all(np.abs(v.sum(axis=-1) - 1.0) <= tol))

        if self.a.shape[0]:
            return bool(np.all(v @ self.a.T <= self.b + tol))

        return True

    def project(self, x: Any) -> Vector:
        r"""
        Euclidean projection onto the set.
        Boxes clamp, the simplex uses sort-and-threshold, and polytopes run Dykstra's
        alternating projections over the box and each half-space.

        ``` python
        >>> from zogames.geometry import FeasibleSet
        >>> FeasibleSet.box([0.0, 0.0], [1.0, 1.0]).project([1.5, -0.2]).tolist()
        [1.0, 0.0]
        >>> FeasibleSet.simplex(2).project([2.0, 0.0]).tolist()
        [1.0, 0.0]

        ```
        """
        v = as_vector(x, self.dim)

        if self.kind is SetKind.BOX:
            return np.clip(v, self.lower, self.upper)
        elif self.kind is SetKind.SIMPLEX:
            return _project_simplex(v)
        elif self.contains(v, tol=0.0):
            return v.copy()
        else:
            return self._dykstra(v)

    def interior_ball(self) -> InteriorBall:
        if self.kind is SetKind.SIMPLEX:
            raise ValueError(
                "the simplex has no full-dimensional interior; use a box or polytope"
            )

        if self._ball is not None:
            return self._ball

        half_widths = 0.5 * (self.upper - self.lower)
        radius = float(np.min(half_widths))

        if radius <= 0.0:
            raise ValueError("box has an empty interior")

        return InteriorBall(self.lower + half_widths, radius)

    def holds_ball(self, ball: InteriorBall, tol: float = 1e-12) -> bool:
        r"""
        Analytic check that $B(p, r)$ lies inside the set: $p \pm r$ within the bounds and
        $a_j \cdot p + r \lVert a_j \rVert \le b_j$ for every half-space.
        """
        p, r = ball.center, ball.radius

        if np.any(p - r < self.lower - tol) or np.any(p + r > self.upper + tol):
            return False

        if self.kind is SetKind.SIMPLEX:
            return False

        slack = self.b - self.a @ p - r * np.linalg.norm(self.a, axis=1)

        return bool(np.all(slack >= -tol))

    def bounding_box(self) -> "FeasibleSet":
        return FeasibleSet.box(self.lower, self.upper)

    def enlarged(self, margin: float) -> "FeasibleSet":
        r"""
        The box enlargement of this set's bounds by *margin* times each coordinate range.
        A zero margin returns the set itself.
        """
        if margin < 0.0:
            raise ValueError(f"margin must be nonnegative (got {margin!r})")

        if margin == 0.0:
            return self

        pad = margin * (self.upper - self.lower)

        return FeasibleSet.box(self.lower - pad, self.upper + pad)

    def sample(self, rng: np.random.Generator, count: int) -> Matrix:
        r"""
        Draws *count* points from the set, uniformly for boxes and polytopes (the latter
        by rejection from the bounding box) and from the flat Dirichlet law on the
        simplex.
        """
        if self.kind is SetKind.BOX:
            return rng.uniform(self.lower, self.upper, size=(count, self.dim))

        if self.kind is SetKind.SIMPLEX:
            return rng.dirichlet(np.ones(self.dim), size=count)

        accepted = []
        needed = count

        for _ in range(_REJECTION_BATCHES):
            draws = rng.uniform(self.lower, self.upper, size=(max(needed, 64), self.dim))
            keep = draws[np.all(draws @ self.a.T <= self.b, axis=1)]
            accepted.append(keep[:needed])
            needed -= accepted[-1].shape[0]

            if needed <= 0:
                return np.concatenate(accepted)

        raise RuntimeError(
            f"rejection sampling accepted too few points ({count - needed} of {count})"
        )

    def _chebyshev_ball(self) -> InteriorBall:
        dim = self.dim
        norms = np.linalg.norm(self.a, axis=1)
        # Variables are (p, r): maximize r subject to a.p + r |a| <= b and l + r <= p <= u - r
        eye = np.eye(dim)
        a_ub = np.vstack(
            (
                np.hstack((self.a, norms[:, None])),
                np.hstack((eye, np.ones((dim, 1)))),
                np.hstack((-eye, np.ones((dim, 1)))),
            )
        )
        b_ub = np.concatenate((self.b, self.upper, -self.lower))
        cost = np.zeros(dim + 1)
        cost[-1] = -1.0
        res = linprog(
            cost,
            A_ub=a_ub,
            b_ub=b_ub,
            bounds=[(None, None)] * dim + [(0.0, None)],
            method="highs",
        )

        if res.status != 0 or res.x is None or res.x[-1] <= 1e-12:
            raise ValueError("polytope is empty or has an empty interior")

        ball = InteriorBall(res.x[:dim], float(res.x[-1]) * _BALL_SHRINK)

        if not self.holds_ball(ball):
            raise ValueError("could not verify an interior ball for the polytope")

        _LOGGER.debug("polytope interior ball center=%s radius=%g", ball.center, ball.radius)

        return ball

    def _dykstra(self, x: Vector) -> Vector:
        normals_sq = np.einsum("ij,ij->i", self.a, self.a)
        count = 1 + self.a.shape[0]
        increments = np.zeros((count, self.dim))
        y = x.copy()

        for sweep in range(DYKSTRA_MAX_SWEEPS):
            previous = y

            for j in range(count):
                z = y + increments[j]

                if j == 0:
                    y = np.clip(z, self.lower, self.upper)
                else:
                    excess = self.a[j - 1] @ z - self.b[j - 1]
                    y = z - (excess / normals_sq[j - 1]) * self.a[j - 1] if excess > 0.0 else z

                increments[j] = z - y

            if np.linalg.norm(y - previous) < DYKSTRA_TOL:
                break
        else:
            _LOGGER.warning(
                "Dykstra projection stopped after %d sweeps without settling",
                DYKSTRA_MAX_SWEEPS,
            )

        return y


@dataclass(frozen=True)
class Dgf:
    r"""
    A distance-generating function with its strong-convexity constant $\tilde{\mu}$
    (with respect to [``norm``][zogames.geometry.Dgf.norm]) and its smoothness
    constant $\tilde{L}$ (``#!python None`` when unbounded).
    """

    kind: DgfKind
    strong_convexity: float = 1.0
    smoothness: Optional[float] = 1.0

    @classmethod
    def euclidean(cls) -> "Dgf":
        return cls(DgfKind.EUCLIDEAN, 1.0, 1.0)

    @classmethod
    def negentropy(cls) -> "Dgf":
        return cls(DgfKind.NEGENTROPY, 1.0, None)

    @property
    def is_smooth(self) -> bool:
        return self.smoothness is not None

    def psi(self, x: Any) -> float:
        v = as_vector(x)

        if self.kind is DgfKind.EUCLIDEAN:
            return 0.5 * float(v @ v)

        _require_nonnegative(v)

        return float(np.sum(xlogy(v, v)))

    def grad(self, x: Any) -> Vector:
        v = as_vector(x)

        if self.kind is DgfKind.EUCLIDEAN:
            return v

        _require_nonnegative(v)

        return np.log(np.maximum(v, NEGENTROPY_FLOOR)) + 1.0

    def norm(self, v: Any) -> float:
        return float(np.linalg.norm(v, 2 if self.kind is DgfKind.EUCLIDEAN else 1))

    def dual_norm(self, v: Any) -> float:
        return float(np.linalg.norm(v, 2 if self.kind is DgfKind.EUCLIDEAN else np.inf))


EUCLIDEAN = Dgf.euclidean()
NEGENTROPY = Dgf.negentropy()


# ---- Functions -----------------------------------------------------------------------


@beartype
def project_polytope(s: FeasibleSet, x: Any) -> Vector:
    r"""
    Euclidean projection of *x* onto *s*, idempotent on members.

    ``` python
    >>> from zogames.geometry import FeasibleSet, project_polytope
    >>> s = FeasibleSet.polytope([0.0, 0.0], [1.0, 1.0], [[1.0, 1.0]], [1.0])
    >>> project_polytope(s, [1.0, 1.0]).round(6).tolist()
    [0.5, 0.5]
    >>> project_polytope(s, [0.1, 0.2]).tolist()
    [0.1, 0.2]

    ```
    """
    return s.project(x)


@beartype
def prox_map(dgf: Dgf, s: FeasibleSet, x: Any, y: Any) -> Vector:
    r"""
    The prox-mapping $P_{x,\mathcal{S}}(y)$.
    The euclidean case is the projection of $x + y$.
    The entropic case reweights $x_i \propto x_i e^{y_i}$ on the simplex and clips
    $x_i e^{y_i}$ to the bounds on a box; it is not available on general polytopes.
    Entropic prox points need strictly positive coordinates.

    ``` python
    >>> import math
    >>> from zogames.geometry import EUCLIDEAN, NEGENTROPY, FeasibleSet, prox_map
    >>> prox_map(EUCLIDEAN, FeasibleSet.box([0.0, 0.0], [1.0, 1.0]), [0.5, 0.5], [1.0, -2.0]).tolist()
    [1.0, 0.0]
    >>> prox_map(NEGENTROPY, FeasibleSet.simplex(2), [0.5, 0.5], [math.log(2), 0.0]).tolist()
    [0.667, 0.333]

    ```
    """
    v = as_vector(x, s.dim)
    w = as_vector(y, s.dim, name="y")

    if dgf.kind is DgfKind.EUCLIDEAN:
        return s.project(v + w)

    if np.any(v <= 0.0):
        raise ValueError(f"x must lie in the positive orthant (got {v.tolist()})")

    if s.kind is SetKind.SIMPLEX:
        return softmax(np.log(v) + w)
    elif s.kind is SetKind.BOX:
        if np.any(s.lower < 0.0):
            raise ValueError("negentropy prox needs a box inside the nonnegative orthant")

        with np.errstate(over="ignore"):
            return np.clip(v * np.exp(w), s.lower, s.upper)
    else:
        raise ValueError("negentropy prox is only available on boxes and the simplex")


@beartype
def unconstrained_mirror_step(dgf: Dgf, x: Any, y: Any) -> Vector:
    r"""
    Solves $\nabla\psi(x^+) = \nabla\psi(x) + y$ without any feasible set.

    ``` python
    >>> import math
    >>> from zogames.geometry import EUCLIDEAN, NEGENTROPY, unconstrained_mirror_step
    >>> unconstrained_mirror_step(EUCLIDEAN, [0.6], [0.1]).tolist()
    [0.7]
    >>> unconstrained_mirror_step(NEGENTROPY, [0.5, 0.5], [math.log(2), math.log(2)]).tolist()
    [1.0, 1.0]

    ```
    """
    v = as_vector(x)
    w = as_vector(y, v.shape[0], name="y")

    if dgf.kind is DgfKind.EUCLIDEAN:
        return v + w

    if np.any(v <= 0.0):
        raise ValueError(f"x must lie in the positive orthant (got {v.tolist()})")

    with np.errstate(over="ignore"):
        stepped = v * np.exp(w)

    if not np.all(np.isfinite(stepped)):
        raise FloatingPointError("mirror step overflowed")

    if np.any(stepped <= 0.0):
        raise FloatingPointError("mirror step left the positive orthant")

    return stepped


@beartype
def bregman_div(dgf: Dgf, p: Any, x: Any) -> float:
    r"""
    $D(p, x) = \psi(p) - \psi(x) - \langle \nabla\psi(x), p - x \rangle$, using
    $0 \ln 0 = 0$ for the entropic case.

    ``` python
    >>> from zogames.geometry import EUCLIDEAN, NEGENTROPY, bregman_div
    >>> bregman_div(EUCLIDEAN, [1.0, 0.0], [0.0, 0.0])
    0.5
    >>> bregman_div(NEGENTROPY, [1.0, 0.0], [0.5, 0.5])
    0.693147

    ```
    """
    q = as_vector(p, name="p")
    v = as_vector(x, q.shape[0])

    if dgf.kind is DgfKind.EUCLIDEAN:
        d = q - v

        return 0.5 * float(d @ d)

    _require_nonnegative(q)

    if np.any(v <= 0.0):
        raise ValueError("x lies on the boundary of the entropic domain")

    return max(0.0, float(np.sum(xlogy(q, q) - xlogy(q, v) - q + v)))


def _project_simplex(v: Vector) -> Vector:
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    ind = np.arange(1, v.shape[0] + 1)
    cond = u - css / ind > 0.0
    rho = ind[cond][-1]
    theta = css[cond][-1] / rho

    return np.maximum(v - theta, 0.0)


def _require_nonnegative(v: Vector) -> None:
    if np.any(v < 0.0):
        raise ValueError(f"point lies outside the entropic domain (got {v.tolist()})")
