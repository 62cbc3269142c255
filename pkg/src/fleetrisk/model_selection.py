"""Cross-validation, coarse-to-fine grid search, and class rebalancing.

The (C, gamma) search walks an exponential lattice twice: a coarse pass over
the configured exponent lists, then a fine pass on a small neighborhood of
the coarse winner.  Cells are independent and may be evaluated in any order
or in parallel; results are keyed by cell so the outcome never depends on
scheduling.
"""

from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import mfsvm
from .errors import ConfigError, InputError
from .kernels import KernelSpec
from .membership import MembershipSpec

_DEFAULT_C_EXPONENTS = tuple(float(e) for e in range(-5, 18, 2))
_DEFAULT_GAMMA_EXPONENTS = tuple(float(e) for e in range(-18, 5, 1))


@dataclass(frozen=True)
class GridSpec:
    """Search lattice and CV settings.

    Exponents are powers of two: a cell (ce, ge) means C = 2**ce,
    gamma = 2**ge.  The fine pass spans best +- fine_radius at fine_step.
    """

    c_exponents: tuple = _DEFAULT_C_EXPONENTS
    gamma_exponents: tuple = _DEFAULT_GAMMA_EXPONENTS
    fine_step: float = 0.25
    fine_radius: float = 1.0
    nu: int = 5
    seed: int = 0
    family: str = "rbf"
    coef0: float = 0.0
    cost_pos: float = 1.0
    cost_neg: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "c_exponents", tuple(float(e) for e in self.c_exponents))
        object.__setattr__(self, "gamma_exponents", tuple(float(e) for e in self.gamma_exponents))
        if not self.c_exponents or not self.gamma_exponents:
            raise ConfigError("exponent lists must be nonempty")
        if self.nu < 2:
            raise ConfigError(f"nu must be >= 2, got {self.nu}")
        if not (self.fine_step > 0.0 and self.fine_radius > 0.0):
            raise ConfigError("fine_step and fine_radius must be positive")


@dataclass(frozen=True)
class GridSearchReport:
    """Per-cell accuracies and the two-stage winners.

    ``cells`` maps (c_exponent, gamma_exponent) to CV accuracy; coarse cells
    and fine cells share the map (the fine lattice includes the coarse
    winner, so the fine best can never be worse).
    """

    cells: dict = field(repr=False)
    best_coarse: tuple
    best_fine: tuple

    @property
    def best_c(self) -> float:
        return 2.0 ** self.best_fine[0]

    @property
    def best_gamma(self) -> float:
        return 2.0 ** self.best_fine[1]

    @property
    def best_accuracy(self) -> float:
        return self.best_fine[2]


def nu_fold_split(y, nu: int, seed: int = 0) -> list[np.ndarray]:
    """Stratified disjoint folds with sizes differing by at most one.

    Members of each class are shuffled and dealt round-robin; the dealing
    pointer carries over between classes so the overall fold sizes stay
    balanced, not just the per-class ones.
    """
    ya = np.asarray(y)
    n = ya.shape[0]
    if n < nu:
        raise ConfigError(f"cannot split {n} samples into {nu} folds")
    if nu < 2:
        raise ConfigError(f"nu must be >= 2, got {nu}")
    rng = np.random.default_rng(seed)
    folds: list[list[int]] = [[] for _ in range(nu)]
    ptr = 0
    for label in np.unique(ya):
        idx = np.flatnonzero(ya == label)
        rng.shuffle(idx)
        for i in idx:
            folds[ptr].append(int(i))
            ptr = (ptr + 1) % nu
    return [np.sort(np.array(f, dtype=np.intp)) for f in folds]


def cv_predictions(
    X, y, family: str, C: float, gamma: float,
    membership_spec: MembershipSpec | None = None,
    nu: int = 5, seed: int = 0, coef0: float = 0.0,
    cost_pos: float = 1.0, cost_neg: float = 1.0,
) -> np.ndarray:
    """Out-of-fold label predictions: each sample predicted exactly once."""
    Xa = np.asarray(X, dtype=np.float64)
    ya = np.asarray(y, dtype=np.float64)
    if Xa.ndim != 2 or ya.shape != (Xa.shape[0],):
        raise InputError("X must be 2-d with one label per row")
    kernel = KernelSpec(family, gamma=gamma, coef0=coef0)
    preds = np.zeros(Xa.shape[0])
    for fold in nu_fold_split(ya, nu, seed):
        mask = np.ones(Xa.shape[0], dtype=bool)
        mask[fold] = False
        model = mfsvm.train(
            Xa[mask], ya[mask], kernel, C=C, membership_spec=membership_spec,
            cost_pos=cost_pos, cost_neg=cost_neg, calibrate=False,
        )
        preds[fold] = model.predict_labels(Xa[fold])
    return preds


def cv_accuracy(
    X, y, family: str, C: float, gamma: float,
    membership_spec: MembershipSpec | None = None,
    nu: int = 5, seed: int = 0, coef0: float = 0.0,
    cost_pos: float = 1.0, cost_neg: float = 1.0,
) -> float:
    """Pooled out-of-fold accuracy."""
    preds = cv_predictions(
        X, y, family, C, gamma, membership_spec, nu, seed, coef0, cost_pos, cost_neg
    )
    return float(np.mean(preds == np.asarray(y, dtype=np.float64)))


def _cell_key(ce: float, ge: float) -> tuple[float, float]:
    return (round(float(ce), 10), round(float(ge), 10))


def _eval_cell(args) -> tuple[tuple[float, float], float]:
    key, X, y, spec, membership_spec = args
    acc = cv_accuracy(
        X, y, spec.family, 2.0 ** key[0], 2.0 ** key[1], membership_spec,
        spec.nu, spec.seed, spec.coef0, spec.cost_pos, spec.cost_neg,
    )
    return key, acc


def _best_cell(cells: dict, keys) -> tuple:
    """Highest accuracy; ties go to the smaller C exponent, then smaller gamma."""
    best = None
    for key in sorted(set(keys)):
        acc = cells[key]
        if best is None or acc > best[2]:
            best = (key[0], key[1], acc)
    return best


def _evaluate_missing(cells, keys, X, y, spec, membership_spec, jobs):
    todo = [k for k in sorted(set(keys)) if k not in cells]
    if not todo:
        return
    payloads = [(k, X, y, spec, membership_spec) for k in todo]
    if jobs and jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            for key, acc in ex.map(_eval_cell, payloads):
                cells[key] = acc
    else:
        for payload in payloads:
            key, acc = _eval_cell(payload)
            cells[key] = acc


def grid_search(
    X, y, spec: GridSpec, membership_spec: MembershipSpec | None = None,
    jobs: int = 1,
) -> GridSearchReport:
    """Coarse lattice pass, then a fine pass around the coarse winner."""
    Xa = np.asarray(X, dtype=np.float64)
    ya = np.asarray(y, dtype=np.float64)
    cells: dict = {}
    coarse_keys = [
        _cell_key(ce, ge) for ce in spec.c_exponents for ge in spec.gamma_exponents
    ]
    _evaluate_missing(cells, coarse_keys, Xa, ya, spec, membership_spec, jobs)
    best_coarse = _best_cell(cells, coarse_keys)

    offsets = np.arange(-spec.fine_radius, spec.fine_radius + spec.fine_step / 2, spec.fine_step)
    fine_keys = [
        _cell_key(best_coarse[0] + dc, best_coarse[1] + dg)
        for dc in offsets
        for dg in offsets
    ]
    _evaluate_missing(cells, fine_keys, Xa, ya, spec, membership_spec, jobs)
    best_fine = _best_cell(cells, fine_keys)
    return GridSearchReport(cells=cells, best_coarse=best_coarse, best_fine=best_fine)


def write_grid_csv(report: GridSearchReport, path: str) -> None:
    """All evaluated cells as CSV with columns c_exp, gamma_exp, cv_accuracy."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["c_exp", "gamma_exp", "cv_accuracy"])
        for (ce, ge) in sorted(report.cells):
            w.writerow([repr(ce), repr(ge), repr(report.cells[(ce, ge)])])


def undersample_majority(X, y, seed: int = 0):
    """Uniformly drop majority-class rows until the classes are equal.

    Minority rows are always kept; the surviving rows keep their original
    order.  Returns (X_balanced, y_balanced).
    """
    Xa = np.asarray(X)
    ya = np.asarray(y)
    if ya.ndim != 1 or Xa.shape[0] != ya.shape[0]:
        raise InputError("X must have one label per row")
    pos = np.flatnonzero(ya > 0)
    neg = np.flatnonzero(ya <= 0)
    if pos.size == 0 or neg.size == 0:
        raise InputError("both classes must be present to rebalance")
    if pos.size == neg.size:
        return Xa, ya
    rng = np.random.default_rng(seed)
    if pos.size > neg.size:
        keep_major = rng.choice(pos, size=neg.size, replace=False)
        keep = np.concatenate([keep_major, neg])
    else:
        keep_major = rng.choice(neg, size=pos.size, replace=False)
        keep = np.concatenate([pos, keep_major])
    keep = np.sort(keep)
    return Xa[keep], ya[keep]
