"""Kernel functions and Gram matrices shared by every SVM variant.

Three families are supported: ``linear`` (plain inner product), ``rbf``
(Gaussian) and ``sigmoid`` (hyperbolic tangent).  The sigmoid kernel is the
one used for the maintenance models; it is not positive semidefinite for
every parameter choice, which the solver tolerates.  Linear and rbf are kept
for oracle tests and as sane defaults on well-scaled data.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _core
from .errors import ConfigError, InputError

FAMILIES = ("linear", "rbf", "sigmoid")

_FAMILY_CODES = {"linear": _core.LINEAR, "rbf": _core.RBF, "sigmoid": _core.SIGMOID}


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family plus parameters.

    ``gamma`` scales the squared distance (rbf) or the inner product
    (sigmoid); ``coef0`` is the sigmoid offset.  Both are ignored when the
    family is linear.
    """

    family: str
    gamma: float = 1.0
    coef0: float = 0.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown kernel family {self.family!r}")
        if not (self.gamma > 0.0):
            raise ConfigError(f"kernel gamma must be positive, got {self.gamma}")


@dataclass(frozen=True)
class GramMatrix:
    """Symmetric pairwise kernel matrix for a fixed training set."""

    values: np.ndarray = field(repr=False)
    spec: KernelSpec

    def __post_init__(self):
        self.values.setflags(write=False)

    @property
    def n(self) -> int:
        return self.values.shape[0]


def eval_kernel(spec: KernelSpec, x, y) -> float:
    """Evaluate K(x, y) for one pair of equally sized feature vectors."""
    xa = np.asarray(x, dtype=np.float64)
    ya = np.asarray(y, dtype=np.float64)
    if xa.shape != ya.shape or xa.ndim != 1:
        raise InputError(
            f"kernel arguments must be 1-d vectors of equal size, got {xa.shape} and {ya.shape}"
        )
    return float(
        _core.kernel_value(xa, ya, _FAMILY_CODES[spec.family], spec.gamma, spec.coef0)
    )


def gram(spec: KernelSpec, X) -> GramMatrix:
    """Pairwise kernel matrix over the rows of X.

    Entries are computed once for i <= j and mirrored, so the result is
    exactly symmetric and agrees entrywise with :func:`eval_kernel`.
    """
    Xa = np.ascontiguousarray(X, dtype=np.float64)
    if Xa.ndim != 2 or Xa.shape[0] < 1:
        raise InputError("gram requires a non-empty 2-d sample matrix")
    if not np.isfinite(Xa).all():
        raise InputError("gram requires finite feature values")
    values = _core.gram_matrix(Xa, _FAMILY_CODES[spec.family], spec.gamma, spec.coef0)
    return GramMatrix(values=values, spec=spec)


def kernel_row(spec: KernelSpec, X, x) -> np.ndarray:
    """Kernel values K(X[i], x) against one query point."""
    Xa = np.ascontiguousarray(X, dtype=np.float64)
    xa = np.asarray(x, dtype=np.float64)
    if xa.ndim != 1 or Xa.ndim != 2 or Xa.shape[1] != xa.shape[0]:
        raise InputError(
            f"query dimension {xa.shape} does not match training dimension {Xa.shape}"
        )
    return _core.kernel_row(Xa, xa, _FAMILY_CODES[spec.family], spec.gamma, spec.coef0)
