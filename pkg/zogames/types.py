# ======================================================================================
# Copyright and other protections apply. Please see the accompanying LICENSE file for
# rights and restrictions governing use of this software. All rights not expressly
# waived or licensed are reserved. If that file is missing or appears to be modified
# from its original, then please contact the author before viewing or using this
# software in any capacity.
# ======================================================================================

r"""
Shared array aliases and the coercion helpers every module uses at its boundary.
"""

from typing import Any, Optional, Union

import numpy as np
import numpy.typing as npt

__all__ = (
    "Matrix",
    "Scalars",
    "Vector",
    "as_matrix",
    "as_vector",
)


# ---- Types ---------------------------------------------------------------------------


Vector = npt.NDArray[np.float64]
Matrix = npt.NDArray[np.float64]
# one value per profile: a float, or an array over a batch of profiles
Scalars = Union[float, npt.NDArray[np.float64]]


# ---- Functions -----------------------------------------------------------------------


def as_vector(x: Any, dim: Optional[int] = None, name: str = "x") -> Vector:
    r"""
    Coerces *x* to a one-dimensional, finite ``#!python float64`` array, optionally
    requiring *dim* coordinates.

    ``` python
    >>> from zogames.types import as_vector
    >>> as_vector([1, 2]).tolist()
    [1.0, 2.0]
    >>> as_vector([1.0, float("nan")], name="y")
    Traceback (most recent call last):
      ...
    ValueError: y must be finite (got [1.0, nan])

    ```
    """
    v = np.asarray(x, dtype=np.float64)

    if v.ndim == 0:
        v = v.reshape(1)

    if v.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional (got shape {v.shape})")

    if dim is not None and v.shape[0] != dim:
        raise ValueError(f"{name} must have {dim} coordinates (got {v.shape[0]})")

    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} must be finite (got {v.tolist()})")

    return v


def as_matrix(
    m: Any,
    rows: Optional[int] = None,
    cols: Optional[int] = None,
    name: str = "M",
) -> Matrix:
    a = np.asarray(m, dtype=np.float64)

    if a.ndim != 2:
        raise ValueError(f"{name} must be two-dimensional (got shape {a.shape})")

    if rows is not None and a.shape[0] != rows:
        raise ValueError(f"{name} must have {rows} rows (got {a.shape[0]})")

    if cols is not None and a.shape[1] != cols:
        raise ValueError(f"{name} must have {cols} columns (got {a.shape[1]})")

    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} must be finite")

    return a
