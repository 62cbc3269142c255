"""Fuzzy SVM training, prediction and probability calibration.

``train`` ties the pieces together: compute memberships (input-space or
kernel-space, or none for a plain SVM), solve the weighted dual, then fit a
sigmoid on the training decision values so models can emit failure
probabilities rather than bare margins.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import membership as fm
from .errors import InputError, StateError, TrainingError
from .kernels import KernelSpec, gram, kernel_row
from .solver import SolverConfig, TrainedSvm, solve, training_decision_values


@dataclass(frozen=True)
class MfsvmModel:
    """Trained fuzzy SVM with enough retained state to predict and serialize.

    Only support-vector rows of the training set are kept; ``platt_a`` and
    ``platt_b`` are ``None`` until calibration has been fit.
    """

    kernel: KernelSpec
    membership_spec: fm.MembershipSpec | None
    svm: TrainedSvm
    memberships: np.ndarray = field(repr=False)
    training_X: np.ndarray = field(repr=False)
    training_y: np.ndarray = field(repr=False)
    platt_a: float | None = None
    platt_b: float | None = None

    @property
    def n_support(self) -> int:
        return int(self.training_X.shape[0])

    @property
    def calibrated(self) -> bool:
        return self.platt_a is not None and self.platt_b is not None

    def decision_value(self, x) -> float:
        """f(x) = sum over support of alpha_i y_i K(x_i, x) + b."""
        xa = np.asarray(x, dtype=np.float64)
        if xa.ndim != 1 or xa.shape[0] != self.training_X.shape[1]:
            raise InputError(
                f"expected a feature vector of size {self.training_X.shape[1]}, got shape {xa.shape}"
            )
        if self.training_X.shape[0] == 0:
            return self.svm.bias
        row = kernel_row(self.kernel, self.training_X, xa)
        sv = self.svm.support_indices
        coef = self.svm.alpha[sv] * self.training_y
        return float(np.dot(coef, row) + self.svm.bias)

    def decision_values(self, X) -> np.ndarray:
        Xa = np.asarray(X, dtype=np.float64)
        if Xa.ndim != 2:
            raise InputError("expected a 2-d matrix of query rows")
        return np.array([self.decision_value(row) for row in Xa])

    def predict_label(self, x) -> int:
        """Sign of the decision value; an exact zero counts as +1."""
        return 1 if self.decision_value(x) >= 0.0 else -1

    def predict_labels(self, X) -> np.ndarray:
        f = self.decision_values(X)
        return np.where(f >= 0.0, 1, -1)

    def predict_prob(self, x) -> float:
        """Calibrated probability of the positive class."""
        if not self.calibrated:
            raise StateError("model has no probability calibration")
        return _sigmoid(self.platt_a * self.decision_value(x) + self.platt_b)

    def predict_probs(self, X) -> np.ndarray:
        if not self.calibrated:
            raise StateError("model has no probability calibration")
        f = self.decision_values(X)
        return 1.0 / (1.0 + np.exp(np.clip(self.platt_a * f + self.platt_b, -500, 500)))


def _sigmoid(z: float) -> float:
    """1 / (1 + e^z) without overflow for large |z|."""
    if z >= 0:
        e = math.exp(-z)
        return e / (1.0 + e)
    return 1.0 / (1.0 + math.exp(z))


def train(
    X,
    y,
    kernel: KernelSpec,
    C: float = 1.0,
    membership_spec: fm.MembershipSpec | None = None,
    cost_pos: float = 1.0,
    cost_neg: float = 1.0,
    tol: float = 1e-6,
    max_passes: int | None = None,
    memberships=None,
    freq=None,
    calibrate: bool = True,
) -> MfsvmModel:
    """Train a fuzzy SVM.

    ``membership_spec`` selects the weighting scheme; ``None`` gives uniform
    weights (a plain SVM).  An explicit ``memberships`` array overrides the
    scheme entirely.  Class costs scale the box caps asymmetrically for
    imbalanced data; ``freq`` marks collapsed duplicate rows and behaves
    like sample multiplicity throughout (caps, memberships, calibration).
    """
    Xa = np.ascontiguousarray(X, dtype=np.float64)
    ya = np.asarray(y, dtype=np.float64)
    if Xa.ndim != 2 or ya.shape != (Xa.shape[0],):
        raise InputError("X must be 2-d with one label per row")
    n_pos = int((ya > 0).sum())
    n_neg = int((ya < 0).sum())
    if n_pos < 2 or n_neg < 2:
        raise TrainingError(
            f"training requires at least 2 samples per class, got {n_pos} positive / {n_neg} negative"
        )

    gm = gram(kernel, Xa)
    if memberships is not None:
        sp = np.asarray(memberships, dtype=np.float64)
    elif membership_spec is None:
        sp = np.ones(Xa.shape[0])
    elif membership_spec.scheme == "input_space":
        sp = fm.input_space_memberships(Xa, ya, membership_spec, freq)
    else:
        sp = fm.kernel_space_memberships(gm, ya, membership_spec, freq)

    config = SolverConfig(
        C=C, tol=tol, max_passes=max_passes, cost_pos=cost_pos, cost_neg=cost_neg
    )
    svm = solve(gm, ya, sp, config, freq=freq)
    sv = svm.support_indices
    model = MfsvmModel(
        kernel=kernel,
        membership_spec=membership_spec,
        svm=svm,
        memberships=sp,
        training_X=Xa[sv].copy(),
        training_y=ya[sv].copy(),
    )
    if calibrate:
        f = training_decision_values(svm, gm, ya)
        a, b = platt_fit(f, ya, weight=freq)
        model = replace(model, platt_a=a, platt_b=b)
    return model


def platt_fit(decision_values, y, weight=None, max_iter: int = 100,
              min_step: float = 1e-10, ridge: float = 1e-12,
              grad_tol: float = 1e-5) -> tuple[float, float]:
    """Fit P(y=+1 | f) = 1 / (1 + exp(a f + b)) by penalized max likelihood.

    Newton iterations with backtracking line search on prior-smoothed
    targets; the smoothing keeps the fit finite even when the classes are
    perfectly separated by f.  ``weight`` repeats samples fractionally
    (multiplicities of collapsed rows).
    """
    F = np.asarray(decision_values, dtype=np.float64)
    ya = np.asarray(y, dtype=np.float64)
    if F.shape != ya.shape or F.ndim != 1:
        raise InputError("decision values and labels must be equal-length vectors")
    wgt = np.ones_like(F) if weight is None else np.asarray(weight, dtype=np.float64)
    prior1 = float(wgt[ya > 0].sum())
    prior0 = float(wgt.sum() - prior1)
    T = np.where(ya > 0, (prior1 + 1.0) / (prior1 + 2.0), 1.0 / (prior0 + 2.0))

    def objective(a: float, b: float) -> float:
        z = a * F + b
        return float(
            np.sum(wgt * np.where(z >= 0, T * z + np.log1p(np.exp(-np.abs(z))),
                                  (T - 1.0) * z + np.log1p(np.exp(-np.abs(z)))))
        )

    A = 0.0
    B = math.log((prior0 + 1.0) / (prior1 + 1.0))
    fval = objective(A, B)
    for _ in range(max_iter):
        z = A * F + B
        p = np.empty_like(z)
        big = z >= 0
        ez = np.exp(-np.abs(z))
        p[big] = ez[big] / (1.0 + ez[big])
        p[~big] = 1.0 / (1.0 + ez[~big])
        w = wgt * p * (1.0 - p)
        d1 = wgt * (T - p)
        g1 = float(np.dot(F, d1))
        g2 = float(d1.sum())
        if abs(g1) < grad_tol and abs(g2) < grad_tol:
            break
        h11 = ridge + float(np.dot(F * F, w))
        h22 = ridge + float(w.sum())
        h21 = float(np.dot(F, w))
        det = h11 * h22 - h21 * h21
        dA = -(h22 * g1 - h21 * g2) / det
        dB = -(-h21 * g1 + h11 * g2) / det
        gd = g1 * dA + g2 * dB
        step = 1.0
        while step >= min_step:
            nA = A + step * dA
            nB = B + step * dB
            nf = objective(nA, nB)
            if nf < fval + 1e-4 * step * gd:
                A, B, fval = nA, nB, nf
                break
            step *= 0.5
        else:
            break
    return A, B
