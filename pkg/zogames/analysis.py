# ======================================================================================
# Copyright and other protections apply. Please see the accompanying LICENSE file for
# rights and restrictions governing use of this software. All rights not expressly
# waived or licensed are reserved. If that file is missing or appears to be modified
# from its original, then please contact the author before viewing or using this
# software in any capacity.
# ======================================================================================

r"""
Merit function, regularity probes, a ground-truth critical-point solver, empirical rate
fits and a verifier for the recurrence behind the convergence-rate bounds.
"""

import enum
import logging
import math
from dataclasses import dataclass
from typing import Any, Callable, Optional, Sequence, Tuple

import numpy as np

from .bt import beartype
from .estimator import derive_stream
from .games import Game, Regularity, finite_difference_pseudogradient
from .types import Vector, as_vector

__all__ = (
    "CpSolution",
    "MeritMethod",
    "MeritResult",
    "PROBE_CAVEAT",
    "ProbeReport",
    "RateFit",
    "RecurrenceCheck",
    "SolveMethod",
    "Violation",
    "merit_err",
    "monotonicity_probe",
    "natural_residual",
    "rate_fit",
    "recurrence_bound_check",
    "rolling_mean",
    "smooth_trace",
    "solve_cp",
)

_LOGGER = logging.getLogger(__name__)


# ---- Data ----------------------------------------------------------------------------


PROBE_CAVEAT = "sampling can only falsify a regularity class, never certify it"
_ANALYTIC_TOL = 1e-9
_FINITE_DIFFERENCE_TOL = 1e-4
_EQUALITY_CLAUSE_TOL = 1e-6
_MULTISTART_ITERATIONS = 500
_LIPSCHITZ_PAIRS = 64


# ---- Types ---------------------------------------------------------------------------


_OperatorT = Callable[[Vector], Vector]


class MeritMethod(str, enum.Enum):
    EXACT_QUADRATIC = "exact-quadratic"
    MULTISTART_PGA = "multistart-pga"


class SolveMethod(str, enum.Enum):
    MIRROR_PROX = "mirror-prox"
    PROJECTED_DESCENT = "projected-descent"


# ---- Classes -------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class MeritResult:
    r"""
    $\mathrm{Err}_\mathcal{X}(x_\star) = \max_{x \in \mathcal{X}} \langle F(x), x_\star -
    x \rangle$ and where it was attained.
    Multistart results are lower bounds and say so.
    """

    value: float
    method: MeritMethod
    lower_bound: bool
    argmax: Vector
    iterations: int


@dataclass(frozen=True, eq=False)
class Violation:
    x: Vector
    y: Vector
    quantity: float
    clause: str


@dataclass(frozen=True, eq=False)
class ProbeReport:
    regularity: Regularity
    pairs: int
    violations: Tuple[Violation, ...]
    worst_margin: float
    tolerance: float
    modulus: float
    analytic: bool
    caveat: str = PROBE_CAVEAT

    @property
    def passed(self) -> bool:
        return not self.violations

    def recheck(self, game: Game) -> bool:
        r"""
        Whether every stored violation reproduces from its stored pair.
        """
        operator, _ = _operator(game)

        for v in self.violations:
            clause, quantity = _pair_verdict(
                game, operator, self.regularity, self.modulus, self.tolerance, v.x, v.y
            )

            if clause != v.clause or not math.isclose(quantity, v.quantity, rel_tol=1e-9, abs_tol=1e-12):
                return False

        return True

    def __str__(self) -> str:
        lines = [
            f"# {self.caveat}",
            f"class: {self.regularity.value}",
            f"pairs: {self.pairs}",
            f"tolerance: {self.tolerance:g} ({'analytic' if self.analytic else 'finite-difference'} pseudogradient)",
            f"violations: {len(self.violations)}",
            f"worst margin: {self.worst_margin:.6g}",
        ]

        return "\n".join(lines)


@dataclass(frozen=True, eq=False)
class CpSolution:
    point: Vector
    residual: float
    converged: bool
    iterations: int
    merit: Optional[float] = None


@dataclass(frozen=True)
class RateFit:
    k0: float
    k1: float
    slope: float
    r_squared: float
    points: int


@dataclass(frozen=True, eq=False)
class RecurrenceCheck:
    passed: bool
    K: int
    c_star: float
    d_star: float
    worst_slack: float
    trace: Vector


# ---- Functions -----------------------------------------------------------------------


@beartype
def natural_residual(g: Game, x: Any) -> float:
    r"""
    $\lVert x - P_{x,\mathcal{X}}(-F(x)) \rVert$ with the euclidean prox.
    """
    v = as_vector(x, g.n)
    operator, _ = _operator(g)

    return float(np.linalg.norm(v - g.project(v - operator(v))))


@beartype
def merit_err(
    g: Game,
    x_star: Any,
    method: Optional[MeritMethod] = None,
    start: Optional[Any] = None,
    rng: Optional[np.random.Generator] = None,
    starts: int = 32,
    tol: float = 1e-8,
    max_iter: int = 100_000,
) -> MeritResult:
    r"""
    The merit of *x_star*.

    With an affine pseudogradient whose symmetric part is positive semidefinite the inner
    maximization is concave and projected gradient ascent solves it to a gradient-map
    norm of *tol* (from *start* when given).
    Otherwise the best of *starts* seeded ascents is reported as a lower bound.

    ``` python
    >>> from zogames.analysis import merit_err
    >>> from zogames.games import make_quadratic_game
    >>> from zogames.geometry import FeasibleSet
    >>> g = make_quadratic_game([[1.0]], [0.0], [FeasibleSet.box([-1.0], [1.0])])
    >>> merit_err(g, [0.0]).value
    0.0
    >>> res = merit_err(g, [1.0])
    >>> res.value, res.argmax.tolist()
    (0.25, [0.5])

    ```
    """
    target = as_vector(x_star, g.n, name="x_star")

    if not g.contains(target):
        raise ValueError("x_star must lie in the feasible set")

    if method is None:
        method = MeritMethod.EXACT_QUADRATIC if _concave_merit(g) else MeritMethod.MULTISTART_PGA

    if method is MeritMethod.EXACT_QUADRATIC:
        if not _concave_merit(g):
            raise ValueError("exact merit needs an affine pseudogradient with PSD symmetric part")

        assert g.affine is not None
        m, q = g.affine
        initial = g.centers if start is None else g.project(start)

        return _exact_merit(g, m, q, target, initial, tol, max_iter)

    operator, _ = _operator(g)
    stream = derive_stream(0, "multistart") if rng is None else rng
    best: Optional[MeritResult] = None

    for x in g.sample(stream, starts):
        candidate = _ascend_merit(g, operator, target, x)

        if best is None or candidate.value > best.value:
            best = candidate

    assert best is not None

    return best


@beartype
def monotonicity_probe(
    g: Game,
    regularity: Regularity,
    pairs: int,
    rng: np.random.Generator,
    modulus: Optional[float] = None,
    tol: Optional[float] = None,
    extra_pairs: Sequence[Tuple[Any, Any]] = (),
) -> ProbeReport:
    r"""
    Samples *pairs* profile pairs from the feasible set (plus any *extra_pairs*) and
    tests the defining inequality of *regularity* on each.
    Implications pass vacuously when their antecedent fails.

    ``` python
    >>> import numpy as np
    >>> from zogames.analysis import monotonicity_probe
    >>> from zogames.games import Regularity, make_quadratic_game
    >>> from zogames.geometry import FeasibleSet
    >>> g = make_quadratic_game(np.eye(2), np.zeros(2), [FeasibleSet.box([-1.0, -1.0], [1.0, 1.0])])
    >>> report = monotonicity_probe(g, Regularity.STRONGLY_MONOTONE, 1000, np.random.default_rng(0), modulus=1.0)
    >>> report.passed
    True

    ```
    """
    if regularity is Regularity.UNKNOWN:
        raise ValueError("pick a regularity class to probe")

    operator, analytic = _operator(g)
    tolerance = (_ANALYTIC_TOL if analytic else _FINITE_DIFFERENCE_TOL) if tol is None else tol
    mu = g.modulus if modulus is None else modulus
    xs = g.sample(rng, pairs)
    ys = g.sample(rng, pairs)

    if extra_pairs:
        xs = np.vstack([xs] + [as_vector(x, g.n)[None, :] for x, _ in extra_pairs])
        ys = np.vstack([ys] + [as_vector(y, g.n)[None, :] for _, y in extra_pairs])

    violations = []
    worst = math.inf

    for x, y in zip(xs, ys):
        clause, quantity = _pair_verdict(g, operator, regularity, mu, tolerance, x, y)

        if clause == "vacuous":
            continue

        worst = min(worst, quantity)

        if clause != "holds":
            violations.append(Violation(x.copy(), y.copy(), quantity, clause))

    report = ProbeReport(
        regularity, xs.shape[0], tuple(violations), worst, tolerance, mu, analytic
    )
    _LOGGER.debug("probe of %s on %s found %d violations", regularity.value, g.name, len(violations))

    return report


@beartype
def solve_cp(
    g: Game,
    tol: float = 1e-10,
    max_iter: int = 100_000,
    x0: Optional[Any] = None,
    method: SolveMethod = SolveMethod.MIRROR_PROX,
) -> CpSolution:
    r"""
    Deterministic mirror-prox (extra-gradient with the true pseudogradient and euclidean
    projections) with constant step $1/(2\hat{L})$, where $\hat{L}$ is the largest
    difference quotient of *F* over sampled pairs.
    Stops once the natural residual drops to *tol*; on running out of iterations it
    returns the best iterate with ``#!python converged=False``.

    Affine games start from the projected unconstrained solution when one exists.
    ``#!python method=SolveMethod.PROJECTED_DESCENT`` drops the extrapolation and takes
    plain projected steps of the same size, which cycles on bilinear games.

    ``` python
    >>> import numpy as np
    >>> from zogames.analysis import solve_cp
    >>> from zogames.games import make_quadratic_game
    >>> from zogames.geometry import FeasibleSet
    >>> g = make_quadratic_game(np.eye(2), [-0.3, -0.6], [FeasibleSet.box([0.0, 0.0], [1.0, 1.0])])
    >>> sol = solve_cp(g, x0=[0.9, 0.1])
    >>> sol.converged, sol.point.round(8).tolist()
    (True, [0.3, 0.6])

    ```
    """
    if not g.has_pseudogradient:
        raise ValueError(f"{g.name} has no analytic pseudogradient to solve with")

    operator = g.pseudogradient
    step = 1.0 / (2.0 * _lipschitz_estimate(g, operator))

    if x0 is not None:
        x = g.project(x0)
    elif g.affine is not None and np.linalg.cond(g.affine[0]) < 1e12:
        x = g.project(np.linalg.solve(g.affine[0], -g.affine[1]))
    else:
        x = g.centers.copy()

    best, best_residual = x, math.inf
    iterations = 0

    for iterations in range(max_iter + 1):
        field_x = operator(x)
        residual = float(np.linalg.norm(x - g.project(x - field_x)))

        if residual < best_residual:
            best, best_residual = x, residual

        if residual <= tol or iterations == max_iter:
            break

        if method is SolveMethod.PROJECTED_DESCENT:
            x = g.project(x - step * field_x)
        else:
            half = g.project(x - step * field_x)
            x = g.project(x - step * operator(half))

        if iterations and iterations % 10_000 == 0:
            _LOGGER.debug("%s iteration %d residual %.3e", method.value, iterations, residual)

    converged = best_residual <= tol

    if not converged:
        _LOGGER.warning(
            "%s on %s stopped at residual %.3e after %d iterations",
            method.value,
            g.name,
            best_residual,
            iterations,
        )

    merit = merit_err(g, best).value if _concave_merit(g) else None

    return CpSolution(best, best_residual, converged, iterations, merit)


@beartype
def rate_fit(iterations: Any, values: Any, window: float = 0.1) -> RateFit:
    r"""
    Least-squares slope of $\ln(\text{metric})$ against $\ln k$ over the last *window*
    fraction of the logged points.

    ``` python
    >>> import numpy as np
    >>> from zogames.analysis import rate_fit
    >>> k = np.arange(1.0, 1001.0)
    >>> round(rate_fit(k, 5.0 / k).slope, 6)
    -1.0

    ```
    """
    k = as_vector(iterations, name="iterations")
    v = as_vector(values, k.shape[0], name="values")

    if not 0.0 < window <= 1.0:
        raise ValueError(f"window must lie in (0, 1] (got {window!r})")

    count = int(math.ceil(window * k.shape[0]))

    if count < 50:
        raise ValueError(f"rate fits need at least 50 points in the window (got {count})")

    k, v = k[-count:], v[-count:]

    if np.any(v <= 0.0) or np.any(k <= 0.0):
        raise ValueError("rate fits need positive iterations and metric values")

    log_k, log_v = np.log(k), np.log(v)
    slope, intercept = np.polyfit(log_k, log_v, 1)
    fitted = slope * log_k + intercept
    spread = float(np.sum((log_v - log_v.mean()) ** 2))
    r_squared = 1.0 - float(np.sum((log_v - fitted) ** 2)) / spread if spread > 0.0 else 1.0

    return RateFit(float(k[0]), float(k[-1]), float(slope), r_squared, count)


@beartype
def recurrence_bound_check(
    c: float,
    d: float,
    s: float,
    t: float,
    a0: float,
    horizon: int,
) -> RecurrenceCheck:
    r"""
    Simulates $a_{k+1} = (1 - c/k^s) a_k + d/k^{t+s}$ from $a_1 = a_0$ (floored at zero
    so the sequence stays nonnegative) and checks the closed-form bound
    $a_k \le c_\star / k^{t+s-1} + d_\star / k$ for every $K \le k \le$ *horizon*.

    $K$ is the least integer with $K > c K^{1-s} \ge 1$,
    $c_\star = d / (\lfloor c K^{1-s} \rfloor - (t + s - 1))$ and
    $d_\star = \max\{0, K(K-1)\tilde{a}_0 / (K - \lfloor c K^{1-s} \rfloor)\}$ with
    $\tilde{a}_0 = a_K - c_\star / K^{s+t-1}$.

    ``` python
    >>> from zogames.analysis import recurrence_bound_check
    >>> check = recurrence_bound_check(1.0, 1.0, 0.6, 0.8, 1.0, 10_000)
    >>> check.passed, check.K
    (True, 2)

    ```
    """
    if not (0.0 < s < t < 1.0 and s + t > 1.0):
        raise ValueError(f"need 0 < s < t < 1 and s + t > 1 (got s={s!r}, t={t!r})")

    if not c > 0.0 or d < 0.0 or a0 < 0.0:
        raise ValueError("need c > 0, d >= 0 and a0 >= 0")

    K = max(2, int(math.floor(c ** (-1.0 / (1.0 - s)))) - 1)

    while not K > c * K ** (1.0 - s) >= 1.0:
        K += 1

    if horizon < K:
        raise ValueError(f"horizon must reach K = {K} (got {horizon})")

    c_tilde = math.floor(c * K ** (1.0 - s))
    power = t + s - 1.0
    c_star = d / (c_tilde - power)
    k = np.arange(1, horizon + 1, dtype=np.float64)
    contraction = (1.0 - c * k ** -s).tolist()
    forcing = (d * k ** -(t + s)).tolist()
    trace = [0.0] * horizon
    a = float(a0)

    for i in range(horizon):
        trace[i] = a
        a = contraction[i] * a + forcing[i]

        if a < 0.0:
            a = 0.0

    values = np.asarray(trace)
    excess = values[K - 1] - c_star / K**power
    d_star = max(0.0, K * (K - 1) * excess / (K - c_tilde))
    tail = k[K - 1 :]
    bound = c_star / tail**power + d_star / tail
    slack = bound - values[K - 1 :]
    worst = float(slack.min())
    passed = bool(np.all(slack >= -1e-12 * np.maximum(bound, 1.0)))

    return RecurrenceCheck(passed, K, c_star, d_star, worst, values)


@beartype
def smooth_trace(iterations: Any, values: Any, window: float) -> Tuple[Vector, Vector]:
    r"""
    Averages a logged trace over consecutive iteration bins of width *window*, returning
    the bin starts and bin means of the nonempty bins.
    """
    k = as_vector(iterations, name="iterations")
    v = as_vector(values, k.shape[0], name="values")
    bins = np.floor(k / window)
    starts, inverse = np.unique(bins, return_inverse=True)
    sums = np.bincount(inverse, weights=v)
    counts = np.bincount(inverse)

    return starts * window, sums / counts


@beartype
def rolling_mean(values: Any, window: int) -> Vector:
    r"""
    Trailing mean over the last *window* entries (fewer at the start).

    ``` python
    >>> from zogames.analysis import rolling_mean
    >>> rolling_mean([1.0, 2.0, 3.0, 4.0], 2).tolist()
    [1.0, 1.5, 2.5, 3.5]

    ```
    """
    v = as_vector(values, name="values")

    if window < 1:
        raise ValueError(f"window must be positive (got {window})")

    sums = np.cumsum(np.concatenate(([0.0], v)))
    upper = np.arange(1, v.shape[0] + 1)
    lower = np.maximum(upper - window, 0)

    return (sums[upper] - sums[lower]) / (upper - lower)


def _operator(g: Game) -> Tuple[_OperatorT, bool]:
    if g.has_pseudogradient:
        return g.pseudogradient, True

    def finite_difference(x: Vector) -> Vector:
        if x.ndim == 1:
            return finite_difference_pseudogradient(g, x)

        return np.stack([finite_difference_pseudogradient(g, row) for row in x])

    return finite_difference, False


def _concave_merit(g: Game) -> bool:
    if g.affine is None:
        return False

    m = g.affine[0]

    return bool(np.linalg.eigvalsh(0.5 * (m + m.T)).min() >= -1e-12)


def _exact_merit(
    g: Game,
    m: np.ndarray,
    q: Vector,
    target: Vector,
    start: Vector,
    tol: float,
    max_iter: int,
) -> MeritResult:
    curvature = float(np.linalg.norm(m + m.T, 2))
    step = 1.0 / curvature if curvature > 0.0 else 1.0
    pull = m.T @ target - q
    x = start
    iterations = 0

    for iterations in range(1, max_iter + 1):
        ascent = pull - (m + m.T) @ x
        nxt = g.project(x + step * ascent)
        moved = float(np.linalg.norm(nxt - x)) / step
        x = nxt

        if moved <= tol:
            break

    value = float((m @ x + q) @ (target - x))

    return MeritResult(value, MeritMethod.EXACT_QUADRATIC, False, x, iterations)


def _ascend_merit(g: Game, operator: _OperatorT, target: Vector, start: Vector) -> MeritResult:
    def objective(x: Vector) -> float:
        return float(operator(x) @ (target - x))

    def gradient(x: Vector, h: float = 1e-6) -> Vector:
        shifts = h * np.eye(g.n)
        jac_t = (operator(x + shifts) - operator(x - shifts)) / (2.0 * h)

        return jac_t @ (target - x) - operator(x)

    x = g.project(start)
    value = objective(x)
    step = 1.0
    iterations = 0

    for iterations in range(1, _MULTISTART_ITERATIONS + 1):
        ascent = gradient(x)

        while step > 1e-12:
            candidate = g.project(x + step * ascent)
            candidate_value = objective(candidate)

            if candidate_value >= value:
                break

            step *= 0.5
        else:
            break

        moved = float(np.linalg.norm(candidate - x))
        x, value = candidate, candidate_value
        step = min(1.0, 2.0 * step)

        if moved <= 1e-12:
            break

    return MeritResult(value, MeritMethod.MULTISTART_PGA, True, x, iterations)


def _lipschitz_estimate(g: Game, operator: _OperatorT) -> float:
    rng = derive_stream(0, "lipschitz")
    xs = g.sample(rng, _LIPSCHITZ_PAIRS)
    ys = g.sample(rng, _LIPSCHITZ_PAIRS)
    gaps = np.linalg.norm(xs - ys, axis=1)
    rises = np.linalg.norm(operator(xs) - operator(ys), axis=1)
    mask = gaps > 0.0
    estimate = float(np.max(rises[mask] / gaps[mask])) if np.any(mask) else 0.0

    return estimate if estimate > 0.0 else 0.5


def _pair_verdict(
    g: Game,
    operator: _OperatorT,
    regularity: Regularity,
    mu: float,
    tol: float,
    x: Vector,
    y: Vector,
) -> Tuple[str, float]:
    fx, fy = operator(x), operator(y)
    d = x - y
    dist_sq = float(d @ d)
    ahead = float(fx @ d)
    behind = float(fy @ d)
    antecedent = behind >= 0.0

    if regularity is Regularity.MONOTONE:
        quantity = ahead - behind
        return ("holds" if quantity >= -tol else "monotone"), quantity

    if regularity is Regularity.STRONGLY_MONOTONE:
        quantity = ahead - behind - mu * dist_sq
        return ("holds" if quantity >= -tol else "strongly monotone"), quantity

    if regularity is Regularity.STRICTLY_COHERENT:
        if g.critical_point is None:
            raise ValueError("strict coherence needs a known critical point")

        offset = x - g.critical_point
        quantity = float(fx @ offset)

        if quantity < -tol:
            return "coherent", quantity

        if abs(quantity) <= tol and float(np.linalg.norm(offset)) > tol:
            return "strict equality", quantity

        return "holds", quantity

    if not antecedent:
        return "vacuous", math.inf

    if regularity is Regularity.PSEUDO_MONOTONE:
        return ("holds" if ahead >= -tol else "pseudo-monotone"), ahead

    if regularity is Regularity.STRONGLY_PSEUDO_MONOTONE:
        quantity = ahead - mu * dist_sq
        return ("holds" if quantity >= -tol else "strongly pseudo-monotone"), quantity

    if regularity is Regularity.STRICTLY_PSEUDO_MONOTONE:
        if ahead < -tol:
            return "pseudo-monotone", ahead

        if abs(ahead) <= tol and math.sqrt(dist_sq) > tol:
            return "strict equality", ahead

        return "holds", ahead

    if regularity is Regularity.PSEUDO_MONOTONE_PLUS:
        if ahead < -tol:
            return "pseudo-monotone", ahead

        if abs(ahead) <= tol and float(np.linalg.norm(fx - fy)) > _EQUALITY_CLAUSE_TOL:
            return "plus equality", ahead

        return "holds", ahead

    if regularity is Regularity.PSEUDOCONVEX_POTENTIAL:
        quantity = float(g.potential(x) - g.potential(y))
        return ("holds" if quantity >= -tol else "pseudoconvex potential"), quantity

    raise ValueError(f"cannot probe {regularity.value}")
