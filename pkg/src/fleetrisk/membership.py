"""Fuzzy membership assignment for soft-margin training.

Each training sample gets a weight in (0, 1] describing how much it looks
like a typical member of its class; the solver scales the box cap by this
weight, so outliers and mislabeled points are allowed to sit inside the
margin cheaply.  Two schemes are provided: distances to the class mean in
input space, and distances to the class center in the kernel feature space
(computable from Gram entries alone, so it works for any kernel).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import math

import numpy as np

from .errors import ConfigError, InputError, TrainingError
from .kernels import GramMatrix

SCHEMES = ("input_space", "kernel_space")


@dataclass(frozen=True)
class MembershipSpec:
    """Membership scheme and its shape parameters.

    ``theta`` softens the input-space radius; ``epsilon`` plays the same
    role in kernel space and keeps the weight strictly positive; ``floor``
    is the hard lower clamp applied to every membership.
    """

    scheme: str
    theta: float = 0.1
    epsilon: float = 1e-3
    floor: float = 1e-3

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ConfigError(f"unknown membership scheme {self.scheme!r}")
        if not (self.theta > 0.0):
            raise ConfigError(f"theta must be positive, got {self.theta}")
        if not (self.epsilon > 0.0):
            raise ConfigError(f"epsilon must be positive, got {self.epsilon}")
        if not (0.0 < self.floor < 1.0):
            raise ConfigError(f"floor must lie in (0, 1), got {self.floor}")


@dataclass(frozen=True)
class ClassGeometry:
    """Input-space class centers and radii, plus the sample weights used."""

    center_pos: np.ndarray = field(repr=False)
    center_neg: np.ndarray = field(repr=False)
    radius_pos: float
    radius_neg: float
    freq: np.ndarray = field(repr=False)

    def center(self, label: float) -> np.ndarray:
        return self.center_pos if label > 0 else self.center_neg

    def radius(self, label: float) -> float:
        return self.radius_pos if label > 0 else self.radius_neg


def _check_freq(freq, n: int) -> np.ndarray:
    if freq is None:
        return np.ones(n)
    fa = np.asarray(freq, dtype=np.float64)
    if fa.shape != (n,):
        raise InputError(f"freq must have shape ({n},), got {fa.shape}")
    if not np.all(fa > 0):
        raise InputError("freq weights must be positive")
    return fa


def input_space_geometry(X, y, freq=None) -> ClassGeometry:
    """Weighted class means and max-distance radii in input space."""
    Xa = np.asarray(X, dtype=np.float64)
    ya = np.asarray(y, dtype=np.float64)
    if Xa.ndim != 2 or ya.shape != (Xa.shape[0],):
        raise InputError("X must be 2-d with one label per row")
    fa = _check_freq(freq, Xa.shape[0])
    pos = ya > 0
    if not pos.any() or pos.all():
        raise TrainingError("class geometry requires samples from both classes")

    centers = {}
    radii = {}
    for label, mask in ((1.0, pos), (-1.0, ~pos)):
        w = fa[mask]
        c = (w[:, None] * Xa[mask]).sum(axis=0) / w.sum()
        d = np.linalg.norm(Xa[mask] - c, axis=1)
        centers[label] = c
        radii[label] = float(d.max())
    return ClassGeometry(
        center_pos=centers[1.0],
        center_neg=centers[-1.0],
        radius_pos=radii[1.0],
        radius_neg=radii[-1.0],
        freq=fa,
    )


def membership_input(x, label, geometry: ClassGeometry, spec: MembershipSpec) -> float:
    """Input-space membership: 1 - d^2 / (radius + theta)^2, floored."""
    xa = np.asarray(x, dtype=np.float64)
    c = geometry.center(label)
    if xa.shape != c.shape:
        raise InputError(f"sample shape {xa.shape} does not match center {c.shape}")
    d2 = float(np.dot(xa - c, xa - c))
    denom = (geometry.radius(label) + spec.theta) ** 2
    sp = 1.0 - d2 / denom
    return min(1.0, max(spec.floor, sp))


def input_space_memberships(X, y, spec: MembershipSpec, freq=None) -> np.ndarray:
    """Memberships for a whole labeled set at once."""
    geo = input_space_geometry(X, y, freq)
    Xa = np.asarray(X, dtype=np.float64)
    ya = np.asarray(y, dtype=np.float64)
    out = np.empty(Xa.shape[0])
    for label in (1.0, -1.0):
        mask = (ya > 0) if label > 0 else (ya <= 0)
        diffs = Xa[mask] - geo.center(label)
        d2 = np.einsum("ij,ij->i", diffs, diffs)
        denom = (geo.radius(label) + spec.theta) ** 2
        out[mask] = 1.0 - d2 / denom
    return np.clip(out, spec.floor, 1.0)


def _class_center_terms(K: np.ndarray, idx: np.ndarray, freq: np.ndarray):
    """Cross and self terms of the weighted kernel-space center for one class.

    Returns (cross, self_term) with cross[t] = (2/W) sum_j f_j K[idx_t, idx_j]
    and self_term = (1/W^2) sum_jk f_j f_k K[idx_j, idx_k], W = sum f.
    """
    f = freq[idx]
    W = f.sum()
    sub = K[np.ix_(idx, idx)]
    cross = (2.0 / W) * (sub @ f)
    self_term = float(f @ sub @ f) / (W * W)
    return cross, self_term


def _class_distances2(K: np.ndarray, idx: np.ndarray, freq: np.ndarray) -> np.ndarray:
    diag = K[idx, idx]
    cross, self_term = _class_center_terms(K, idx, freq)
    d2 = diag - cross + self_term
    # Tiny negatives are cancellation noise; larger ones can occur for
    # indefinite kernels, where "distance" is only a formal quantity.
    return np.maximum(d2, 0.0)


def _as_gram_values(gram) -> np.ndarray:
    return gram.values if isinstance(gram, GramMatrix) else np.asarray(gram, dtype=np.float64)


def kernel_distance2(i: int, class_indices, gram, freq=None) -> float:
    """Squared kernel-space distance from sample i to its class center."""
    K = _as_gram_values(gram)
    idx = np.asarray(class_indices, dtype=np.intp)
    if idx.size == 0:
        raise TrainingError("kernel distance requires a nonempty class")
    pos_in_class = np.flatnonzero(idx == i)
    if pos_in_class.size == 0:
        raise InputError(f"sample {i} is not a member of the given class")
    fa = _check_freq(freq, K.shape[0])
    return float(_class_distances2(K, idx, fa)[pos_in_class[0]])


def kernel_radius2(class_indices, gram, freq=None) -> float:
    """Squared kernel-space class radius, scaled by (1/n)^2 with n = sum freq."""
    K = _as_gram_values(gram)
    idx = np.asarray(class_indices, dtype=np.intp)
    if idx.size == 0:
        raise TrainingError("kernel radius requires a nonempty class")
    fa = _check_freq(freq, K.shape[0])
    n = fa[idx].sum()
    return float(_class_distances2(K, idx, fa).max()) / (n * n)


def membership_kernel(i: int, y, gram, spec: MembershipSpec, freq=None) -> float:
    """Kernel-space membership: 1 - sqrt(d^2 / (r^2 + epsilon)), clamped.

    The radius here is the raw feature-space one (no 1/n^2 scaling), so the
    distance and radius live in the same metric.
    """
    K = _as_gram_values(gram)
    ya = np.asarray(y, dtype=np.float64)
    fa = _check_freq(freq, K.shape[0])
    same = (ya > 0) if ya[i] > 0 else (ya <= 0)
    idx = np.flatnonzero(same)
    d2 = _class_distances2(K, idx, fa)
    r2 = float(d2.max())
    di2 = float(d2[np.flatnonzero(idx == i)[0]])
    sp = 1.0 - math.sqrt(di2 / (r2 + spec.epsilon))
    return min(1.0, max(spec.floor, sp))


def kernel_space_memberships(gram, y, spec: MembershipSpec, freq=None) -> np.ndarray:
    """Kernel-space memberships for a whole labeled set at once."""
    K = _as_gram_values(gram)
    ya = np.asarray(y, dtype=np.float64)
    if ya.shape != (K.shape[0],):
        raise InputError(f"labels must have shape ({K.shape[0]},), got {ya.shape}")
    fa = _check_freq(freq, K.shape[0])
    pos = ya > 0
    if not pos.any() or pos.all():
        raise TrainingError("memberships require samples from both classes")
    out = np.empty(K.shape[0])
    for mask in (pos, ~pos):
        idx = np.flatnonzero(mask)
        d2 = _class_distances2(K, idx, fa)
        r2 = float(d2.max())
        out[idx] = 1.0 - np.sqrt(d2 / (r2 + spec.epsilon))
    return np.clip(out, spec.floor, 1.0)
