"""Dual SVM training via sequential minimal optimization.

The solver works on a precomputed Gram matrix and supports a per-sample box
cap ``C * membership * class_cost``, which is how the fuzzy variants and
cost-sensitive balancing express themselves.  Non-PSD kernels (sigmoid) are
handled by guarding the second-derivative term and falling back to interval
endpoint evaluation, only ever accepting steps that improve the dual
objective.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _core
from .errors import ConfigError, InputError, TrainingError
from .kernels import GramMatrix, kernel_row

# Multipliers within this distance of a box edge count as being on the edge.
_BOUND_EPS = 1e-10
# Safety ceiling on total optimization steps; the stall guard is the real
# termination criterion and trips far earlier on any stuck problem.
_MAX_ITER_CEILING = 1_000_000


@dataclass(frozen=True)
class SolverConfig:
    """Knobs for one SMO run.

    ``max_passes`` bounds consecutive steps without objective progress
    before the solver gives up; ``None`` means ten times the sample count.
    ``cost_pos``/``cost_neg`` scale the box cap per class, giving
    cost-sensitive training for imbalanced data.
    """

    C: float = 1.0
    tol: float = 1e-6
    max_passes: int | None = None
    eta_guard: float = 1e-12
    cost_pos: float = 1.0
    cost_neg: float = 1.0

    def __post_init__(self):
        if not (self.C > 0.0):
            raise ConfigError(f"C must be positive, got {self.C}")
        if not (self.tol > 0.0):
            raise ConfigError(f"tol must be positive, got {self.tol}")
        if self.max_passes is not None and self.max_passes < 1:
            raise ConfigError(f"max_passes must be >= 1, got {self.max_passes}")
        if not (self.eta_guard > 0.0):
            raise ConfigError(f"eta_guard must be positive, got {self.eta_guard}")
        if not (self.cost_pos > 0.0 and self.cost_neg > 0.0):
            raise ConfigError("class costs must be positive")


@dataclass(frozen=True)
class TrainedSvm:
    """Solution of one dual problem, kept with enough context to predict."""

    alpha: np.ndarray = field(repr=False)
    bias: float
    support_indices: np.ndarray = field(repr=False)
    objective: float
    iterations: int
    converged: bool
    caps: np.ndarray = field(repr=False)

    @property
    def n_support(self) -> int:
        return int(self.support_indices.shape[0])


def _box_caps(
    config: SolverConfig, y: np.ndarray, memberships: np.ndarray, freq: np.ndarray
) -> np.ndarray:
    cost = np.where(y > 0, config.cost_pos, config.cost_neg)
    return config.C * memberships * cost * freq


def solve(
    gram: GramMatrix,
    y,
    memberships=None,
    config: SolverConfig | None = None,
    freq=None,
) -> TrainedSvm:
    """Train a (fuzzy) soft-margin SVM on a precomputed Gram matrix.

    ``memberships`` holds one weight in (0, 1] per sample; ``None`` means
    uniform weights, which recovers the ordinary SVM.  ``freq`` gives
    per-sample multiplicities for collapsed duplicate rows; a sample with
    freq m behaves exactly like m copies of itself (its box cap scales by m).
    """
    config = config or SolverConfig()
    K = gram.values
    n = K.shape[0]
    ya = np.asarray(y, dtype=np.float64)
    if ya.shape != (n,):
        raise InputError(f"labels must have shape ({n},), got {ya.shape}")
    if not np.all(np.isin(ya, (-1.0, 1.0))):
        raise InputError("labels must be -1 or +1")
    if np.all(ya > 0) or np.all(ya < 0):
        raise TrainingError("training requires samples from both classes")
    if memberships is None:
        sp = np.ones(n)
    else:
        sp = np.asarray(memberships, dtype=np.float64)
        if sp.shape != (n,):
            raise InputError(f"memberships must have shape ({n},), got {sp.shape}")
        if not np.all((sp > 0.0) & (sp <= 1.0)):
            raise InputError("memberships must lie in (0, 1]")
    if freq is None:
        fa = np.ones(n)
    else:
        fa = np.asarray(freq, dtype=np.float64)
        if fa.shape != (n,):
            raise InputError(f"freq must have shape ({n},), got {fa.shape}")
        if not np.all(fa > 0.0):
            raise InputError("freq weights must be positive")

    caps = _box_caps(config, ya, sp, fa)
    # max_passes bounds consecutive steps without relative progress; each
    # productive step raises the bounded objective by a fixed relative
    # amount, so the loop terminates without a tight total-iteration cap.
    stall_limit = config.max_passes if config.max_passes is not None else 10 * n
    alpha, G, objective, iterations, converged = _core.smo_solve(
        K,
        ya,
        caps,
        config.tol,
        config.eta_guard,
        stall_limit,
        _MAX_ITER_CEILING,
    )

    support = np.flatnonzero(alpha > _BOUND_EPS)
    bias = _bias_from_solution(alpha, G, ya, caps)
    return TrainedSvm(
        alpha=alpha,
        bias=bias,
        support_indices=support,
        objective=objective,
        iterations=iterations,
        converged=converged,
        caps=caps,
    )


def _bias_from_solution(
    alpha: np.ndarray, G: np.ndarray, y: np.ndarray, caps: np.ndarray
) -> float:
    """Bias from strictly interior support vectors, else the gap midpoint.

    For an interior multiplier the KKT conditions force
    y_i (sum_j alpha_j y_j K_ij + b) = 1, so each interior sample votes
    b = y_i - G_i; fsum keeps the average independent of summation order.
    """
    u = y - G
    interior = (alpha > _BOUND_EPS) & (alpha < caps - _BOUND_EPS)
    if interior.any():
        votes = u[interior]
        return math.fsum(votes.tolist()) / votes.shape[0]
    at_lower = alpha <= _BOUND_EPS
    at_upper = alpha >= caps - _BOUND_EPS
    in_up = (~at_upper & (y > 0)) | (~at_lower & (y < 0))
    in_low = (~at_lower & (y > 0)) | (~at_upper & (y < 0))
    hi = np.min(u[in_up]) if in_up.any() else np.inf
    lo = np.max(u[in_low]) if in_low.any() else -np.inf
    if not np.isfinite(hi) or not np.isfinite(lo):
        return 0.0
    return float((lo + hi) / 2.0)


def decision_value(model: TrainedSvm, spec, X_train, y_train, x) -> float:
    """f(x) for one query point, summing only over support vectors."""
    sv = model.support_indices
    if sv.shape[0] == 0:
        return model.bias
    Xa = np.ascontiguousarray(X_train, dtype=np.float64)
    row = kernel_row(spec, Xa[sv], np.asarray(x, dtype=np.float64))
    coef = model.alpha[sv] * np.asarray(y_train, dtype=np.float64)[sv]
    return float(np.dot(coef, row) + model.bias)


def training_decision_values(model: TrainedSvm, gram: GramMatrix, y) -> np.ndarray:
    """Decision values for the training points themselves, via the Gram matrix."""
    ya = np.asarray(y, dtype=np.float64)
    return gram.values @ (model.alpha * ya) + model.bias


def kkt_report(model: TrainedSvm, gram: GramMatrix, y) -> dict:
    """Summarize how well the solution satisfies the KKT conditions.

    The violation of sample i measures by how much its optimality condition
    (with the stored bias) is broken; at a converged solution the maximum is
    at most the solver tolerance.
    """
    ya = np.asarray(y, dtype=np.float64)
    G = gram.values @ (model.alpha * ya)
    u = ya - G
    b = model.bias
    alpha = model.alpha
    caps = model.caps
    at_lower = alpha <= _BOUND_EPS
    at_upper = alpha >= caps - _BOUND_EPS
    interior = ~at_lower & ~at_upper

    viol = np.zeros_like(alpha)
    # alpha = 0 requires y f(x) >= 1:  y>0 -> b >= u is fine, deficit u - b;
    # y<0 -> b <= u is fine, deficit b - u.  At the upper cap the directions flip.
    pos = ya > 0
    viol[at_lower & pos] = np.maximum(0.0, (u - b)[at_lower & pos])
    viol[at_lower & ~pos] = np.maximum(0.0, (b - u)[at_lower & ~pos])
    viol[at_upper & pos] = np.maximum(0.0, (b - u)[at_upper & pos])
    viol[at_upper & ~pos] = np.maximum(0.0, (u - b)[at_upper & ~pos])
    viol[interior] = np.abs((b - u)[interior])

    return {
        "max_violation": float(viol.max()) if viol.size else 0.0,
        "mean_violation": float(viol.mean()) if viol.size else 0.0,
        "n_interior": int(interior.sum()),
        "n_at_upper": int(at_upper.sum()),
        "n_support": model.n_support,
    }
