# ======================================================================================
# Copyright and other protections apply. Please see the accompanying LICENSE file for
# rights and restrictions governing use of this software. All rights not expressly
# waived or licensed are reserved. If that file is missing or appears to be modified
# from its original, then please contact the author before viewing or using this
# software in any capacity.
# ======================================================================================

from abc import abstractmethod
from typing import TYPE_CHECKING, Tuple

from .types import Scalars, Vector

__all__ = (
    "SupportsPayoffs",
    "SupportsPotential",
    "SupportsPseudogradient",
)


# ---- Types ---------------------------------------------------------------------------


if TYPE_CHECKING:
    from typing import Protocol, runtime_checkable
else:
    from beartype.typing import Protocol, runtime_checkable


@runtime_checkable
class SupportsPayoffs(Protocol):
    r"""
    The bandit view of a game.
    Anything a learner touches satisfies this and nothing more: realized payoffs for a
    (possibly batched) joint profile, the per-player dimensions, and nothing that would
    leak a gradient.

    ``` python
    >>> from zogames.protocol import SupportsPayoffs, SupportsPseudogradient
    >>> from zogames.games import bandit_view, make_quadratic_game
    >>> from zogames.geometry import FeasibleSet
    >>> g = make_quadratic_game([[1.0]], [0.0], [FeasibleSet.box([-1.0], [1.0])])
    >>> isinstance(bandit_view(g), SupportsPayoffs)
    True
    >>> isinstance(bandit_view(g), SupportsPseudogradient)
    False

    ```
    """

    @property
    @abstractmethod
    def dims(self) -> Tuple[int, ...]:
        pass

    @abstractmethod
    def payoffs(self, x: Vector) -> Vector:
        pass


@runtime_checkable
class SupportsPseudogradient(Protocol):
    r"""
    Games exposing the stacked partial gradients of each player's own payoff.
    """

    @abstractmethod
    def pseudogradient(self, x: Vector) -> Vector:
        pass


@runtime_checkable
class SupportsPotential(Protocol):
    r"""
    Games with a potential, evaluated once per (possibly batched) profile.
    """

    @abstractmethod
    def potential(self, x: Vector) -> Scalars:
        pass
