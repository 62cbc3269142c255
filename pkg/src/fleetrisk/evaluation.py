"""Metrics, significance testing, risk bucketing and a logistic baseline.

Everything here is a pure function of predictions and labels.  The AUC
routine accumulates integer counts so that the trapezoid area equals the
Mann-Whitney pairwise statistic exactly, not merely to rounding error.
"""

from __future__ import annotations

import csv
import enum
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.stats import chi2

from .errors import InputError, TrainingError


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fn: int
    tn: int
    fp: int

    def __post_init__(self):
        if min(self.tp, self.fn, self.tn, self.fp) < 0:
            raise InputError("confusion counts must be nonnegative")

    @property
    def total(self) -> int:
        return self.tp + self.fn + self.tn + self.fp


def confusion_from(preds, labels) -> ConfusionCounts:
    """Tally a prediction vector against true labels (both in {-1, +1})."""
    p = np.asarray(preds)
    t = np.asarray(labels)
    if p.shape != t.shape or p.ndim != 1:
        raise InputError("predictions and labels must be equal-length vectors")
    pos = t > 0
    return ConfusionCounts(
        tp=int(((p > 0) & pos).sum()),
        fn=int(((p <= 0) & pos).sum()),
        tn=int(((p <= 0) & ~pos).sum()),
        fp=int(((p > 0) & ~pos).sum()),
    )


def metrics(confusion: ConfusionCounts) -> dict:
    """Sensitivity, specificity, accuracy; empty denominators flagged.

    A metric whose denominator is zero is reported as None and listed under
    ``undefined`` rather than silently becoming 0.
    """
    if confusion.total == 0:
        raise InputError("cannot compute metrics of an empty evaluation")
    undefined = []
    if confusion.tp + confusion.fn > 0:
        sens = confusion.tp / (confusion.tp + confusion.fn)
    else:
        sens = None
        undefined.append("sensitivity")
    if confusion.tn + confusion.fp > 0:
        spec = confusion.tn / (confusion.tn + confusion.fp)
    else:
        spec = None
        undefined.append("specificity")
    acc = (confusion.tp + confusion.tn) / confusion.total
    return {
        "sensitivity": sens,
        "specificity": spec,
        "accuracy": acc,
        "undefined": undefined,
    }


def roc_auc(scores, labels) -> dict:
    """ROC curve and its area from an all-threshold sweep.

    Returns ``{"auc": float, "curve": [(threshold, fpr, tpr), ...]}``; the
    curve starts at (inf, 0, 0) and ends at the lowest score with
    fpr = tpr = 1.  Tied scores are grouped into a single sweep step, which
    is exactly the half-credit tie convention of the pairwise statistic: the
    integer numerator sum_g neg_g * (2 * tp_before + pos_g) equals twice the
    count of correctly ordered positive/negative pairs plus ties.
    """
    s = np.asarray(scores, dtype=np.float64)
    t = np.asarray(labels)
    if s.shape != t.shape or s.ndim != 1:
        raise InputError("scores and labels must be equal-length vectors")
    pos = t > 0
    P = int(pos.sum())
    N = int(s.shape[0] - P)
    if P == 0 or N == 0:
        raise InputError("ROC requires both classes present")

    order = np.argsort(-s, kind="stable")
    ss = s[order]
    pp = pos[order]
    curve = [(math.inf, 0.0, 0.0)]
    tp = fp = 0
    numer = 0
    i = 0
    n = s.shape[0]
    while i < n:
        j = i
        while j < n and ss[j] == ss[i]:
            j += 1
        g_pos = int(pp[i:j].sum())
        g_neg = (j - i) - g_pos
        numer += g_neg * (2 * tp + g_pos)
        tp += g_pos
        fp += g_neg
        curve.append((float(ss[i]), fp / N, tp / P))
        i = j
    return {"auc": numer / (2 * P * N), "curve": curve}


def write_roc_csv(curve, path: str) -> None:
    """Write sweep points as CSV with columns threshold, fpr, tpr."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["threshold", "fpr", "tpr"])
        for thr, fpr, tpr in curve:
            w.writerow([repr(float(thr)), repr(float(fpr)), repr(float(tpr))])


def _exact_binomial_p(b: int, c: int) -> float:
    """Two-sided sign-test p-value: min(1, 2 P(X <= min(b,c))), X ~ Bin(b+c, 1/2)."""
    n = b + c
    m = min(b, c)
    tail = sum(math.comb(n, k) for k in range(m + 1))
    return min(1.0, 2.0 * tail / (1 << n))


def mcnemar(preds_a, preds_b, labels) -> dict:
    """Paired comparison of two classifiers on the same samples.

    ``b`` counts samples A gets right and B wrong, ``c`` the reverse.  The
    continuity-corrected chi-square statistic and its tail probability are
    always reported when discordance exists; ``p_value`` follows the
    chi-square approximation only when b + c >= 25 and the exact binomial
    otherwise.  No discordance at all gives p = 1.0, flagged via ``method``.
    """
    pa = np.asarray(preds_a)
    pb = np.asarray(preds_b)
    t = np.asarray(labels)
    if not (pa.shape == pb.shape == t.shape) or pa.ndim != 1:
        raise InputError("prediction vectors and labels must be aligned 1-d vectors")
    a_right = pa == t
    b_right = pb == t
    b_count = int((a_right & ~b_right).sum())
    c_count = int((~a_right & b_right).sum())
    disc = b_count + c_count
    if disc == 0:
        return {
            "b": b_count,
            "c": c_count,
            "statistic": 0.0,
            "p_chi2": 1.0,
            "p_exact": 1.0,
            "p_value": 1.0,
            "method": "none",
            "significant_5pct": False,
        }
    stat = (abs(b_count - c_count) - 1.0) ** 2 / disc
    p_chi2 = float(chi2.sf(stat, 1))
    p_exact = _exact_binomial_p(b_count, c_count)
    if disc >= 25:
        p_value, method = p_chi2, "chi2"
    else:
        p_value, method = p_exact, "exact"
    return {
        "b": b_count,
        "c": c_count,
        "statistic": stat,
        "p_chi2": p_chi2,
        "p_exact": p_exact,
        "p_value": p_value,
        "method": method,
        "significant_5pct": p_value < 0.05,
    }


def sv_ratios(model, n_train: int, n_max: int) -> dict:
    """Support-vector counts relative to training-set and ceiling sizes."""
    n_sv = model if isinstance(model, (int, np.integer)) else model.n_support
    if n_train <= 0 or n_max <= 0:
        raise InputError("n_train and n_max must be positive")
    return {
        "R_sv_tr": n_sv / n_train,
        "R_tr_max": n_train / n_max,
        "R_sv_max": n_sv / n_max,
    }


class RiskBucket(enum.Enum):
    ImmediateRisk = "Immediate Risk"
    ShortTermRisk = "Short Term Risk"
    LongerTermRisk = "Longer Term Risk"


def bucket_risk(prob: float) -> RiskBucket:
    """Maintenance urgency from failure probability.

    Above 60% is Immediate; 40-60% inclusive on both ends is Short Term;
    below 40% is Longer Term.
    """
    p = float(prob)
    if not (0.0 <= p <= 1.0):
        raise InputError(f"probability must lie in [0, 1], got {p}")
    if p > 0.60:
        return RiskBucket.ImmediateRisk
    if p >= 0.40:
        return RiskBucket.ShortTermRisk
    return RiskBucket.LongerTermRisk


def bucket_tallies(probs) -> dict:
    """Count of samples per risk bucket plus the total."""
    counts = {bucket: 0 for bucket in RiskBucket}
    n = 0
    for p in np.asarray(probs, dtype=np.float64):
        counts[bucket_risk(p)] += 1
        n += 1
    counts["total"] = n
    return counts


def format_bucket_table(tallies: dict) -> str:
    """Tab-separated risk tally in the standard report layout."""
    lines = ["Classification Category\tNumber of Vehicles"]
    for bucket in RiskBucket:
        lines.append(f"{bucket.value}\t{tallies[bucket]}")
    lines.append(f"Total Number of Vehicles\t{tallies['total']}")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class LogisticBaseline:
    """L2-regularized logistic regression on {-1,+1} labels."""

    weights: np.ndarray
    intercept: float
    l2_strength: float
    converged: bool
    iterations: int

    def decision_values(self, X) -> np.ndarray:
        Xa = np.asarray(X, dtype=np.float64)
        return Xa @ self.weights + self.intercept

    def predict_probs(self, X) -> np.ndarray:
        z = self.decision_values(X)
        return 1.0 / (1.0 + np.exp(-np.clip(z, -500, 500)))

    def predict_prob(self, x) -> float:
        return float(self.predict_probs(np.asarray(x, dtype=np.float64)[None])[0])

    def predict_labels(self, X) -> np.ndarray:
        return np.where(self.decision_values(X) >= 0.0, 1, -1)


def logistic_nll_grad(weights, intercept, X, y, l2_strength):
    """Penalized negative log-likelihood and its gradient (w, b).

    The intercept is not penalized.  Exposed separately so the gradient can
    be validated against finite differences.
    """
    Xa = np.asarray(X, dtype=np.float64)
    ya = np.asarray(y, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    z = Xa @ w + intercept
    yz = ya * z
    nll = float(np.sum(np.logaddexp(0.0, -yz))) + 0.5 * l2_strength * float(w @ w)
    p = 1.0 / (1.0 + np.exp(-np.clip(z, -500, 500)))
    t = (ya + 1.0) / 2.0
    resid = p - t
    grad_w = Xa.T @ resid + l2_strength * w
    grad_b = float(resid.sum())
    return nll, grad_w, grad_b


def logistic_baseline(X, y, l2_strength: float = 1e-3, max_iter: int = 100,
                      grad_tol: float = 1e-8) -> LogisticBaseline:
    """Fit the baseline by damped Newton iterations.

    Deterministic; warns and flags the model when the gradient norm has not
    reached ``grad_tol`` after ``max_iter`` iterations.
    """
    Xa = np.asarray(X, dtype=np.float64)
    ya = np.asarray(y, dtype=np.float64)
    if Xa.ndim != 2 or ya.shape != (Xa.shape[0],):
        raise InputError("X must be 2-d with one label per row")
    if (ya > 0).all() or (ya <= 0).all():
        raise TrainingError("logistic baseline requires both classes")
    n, d = Xa.shape
    w = np.zeros(d)
    b = 0.0
    nll, gw, gb = logistic_nll_grad(w, b, Xa, ya, l2_strength)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        gmax = max(float(np.abs(gw).max(initial=0.0)), abs(gb))
        if gmax <= grad_tol:
            converged = True
            break
        z = Xa @ w + b
        p = 1.0 / (1.0 + np.exp(-np.clip(z, -500, 500)))
        r = np.maximum(p * (1.0 - p), 1e-12)
        Xb = np.hstack([Xa, np.ones((n, 1))])
        H = (Xb * r[:, None]).T @ Xb
        H[:d, :d] += l2_strength * np.eye(d)
        g = np.append(gw, gb)
        try:
            step = np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(H, g, rcond=None)[0]
        scale = 1.0
        while scale >= 1e-10:
            nw = w - scale * step[:d]
            nb = b - scale * step[d]
            n_nll, n_gw, n_gb = logistic_nll_grad(nw, nb, Xa, ya, l2_strength)
            if n_nll <= nll:
                w, b, nll, gw, gb = nw, nb, n_nll, n_gw, n_gb
                break
            scale *= 0.5
        else:
            break
    else:
        it = max_iter
    if not converged:
        gmax = max(float(np.abs(gw).max(initial=0.0)), abs(gb))
        if gmax <= grad_tol:
            converged = True
        else:
            warnings.warn(
                f"logistic baseline did not converge (max gradient {gmax:.2e})",
                stacklevel=2,
            )
    return LogisticBaseline(
        weights=w, intercept=float(b), l2_strength=float(l2_strength),
        converged=converged, iterations=it,
    )
