"""Layered ensemble for data a single fuzzy SVM separates poorly.

The model has six layers: per-feature SVMs on recent-history taps (layer 1),
a chain of committee SVMs over quantized predecessor outputs (layers 2-5),
and specialist SVMs (layer 6) trained on the subsets of training data that
land in impure cells of the final quantizer.  Between layers, vector
quantization collapses the representation to a small codebook, which both
regularizes and shrinks the effective training sets; the final codebook's
cells act as best-matching units that route every sample to exactly one
probability source.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import mfsvm
from .errors import ConfigError, InputError, TrainingError
from .kernels import KernelSpec
from .membership import MembershipSpec

_LLOYD_MAX_ITER = 100


@dataclass(frozen=True)
class HierarchyConfig:
    """Architecture and per-layer training knobs.

    ``register_len`` / ``tap_interval`` define the shift register applied to
    per-feature series; both 1 means static features pass through untouched.
    ``codebook_sizes`` are the quantizer widths after layers 1-4 (feeding
    layers 2-5); ``bmu_units`` is the final quantizer whose cells route to
    specialists.  ``layer_kernels`` / ``layer_C`` optionally override the
    shared kernel / C per layer (six entries, layers 1-6).
    """

    register_len: int = 1
    tap_interval: int = 1
    codebook_sizes: tuple[int, int, int, int] = (8, 16, 16, 16)
    bmu_units: int = 16
    impurity_threshold: float = 0.1
    min_unit_examples: int = 20
    kernel: KernelSpec = KernelSpec("rbf", 0.5)
    C: float = 1.0
    membership: MembershipSpec | None = MembershipSpec("kernel_space")
    layer_kernels: tuple | None = None
    layer_C: tuple | None = None
    seed: int = 0

    def __post_init__(self):
        if self.register_len < 1 or self.tap_interval < 1:
            raise ConfigError("register_len and tap_interval must be >= 1")
        if self.register_len % self.tap_interval != 0:
            raise ConfigError(
                f"register_len {self.register_len} is not a multiple of tap_interval {self.tap_interval}"
            )
        sizes = tuple(int(m) for m in self.codebook_sizes)
        if len(sizes) != 4 or any(m < 1 for m in sizes):
            raise ConfigError("codebook_sizes must be four integers >= 1")
        object.__setattr__(self, "codebook_sizes", sizes)
        if self.bmu_units < 1:
            raise ConfigError("bmu_units must be >= 1")
        if not (0.0 < self.impurity_threshold < 1.0):
            raise ConfigError("impurity_threshold must lie in (0, 1)")
        if self.min_unit_examples < 1:
            raise ConfigError("min_unit_examples must be >= 1")
        for name in ("layer_kernels", "layer_C"):
            v = getattr(self, name)
            if v is not None:
                v = tuple(v)
                if len(v) != 6:
                    raise ConfigError(f"{name} must have six entries (layers 1-6)")
                object.__setattr__(self, name, v)

    def kernel_for(self, layer: int) -> KernelSpec:
        if self.layer_kernels is not None:
            return self.layer_kernels[layer - 1]
        return self.kernel

    def c_for(self, layer: int) -> float:
        if self.layer_C is not None:
            return float(self.layer_C[layer - 1])
        return self.C

    @property
    def taps(self) -> int:
        return self.register_len // self.tap_interval


@dataclass(frozen=True)
class Codebook:
    """Prototype vectors; assignment is nearest-prototype, ties to lowest index."""

    prototypes: np.ndarray = field(repr=False)

    @property
    def m(self) -> int:
        return self.prototypes.shape[0]

    def assign(self, V) -> np.ndarray:
        Va = np.atleast_2d(np.asarray(V, dtype=np.float64))
        if Va.shape[1] != self.prototypes.shape[1]:
            raise InputError(
                f"vectors of dim {Va.shape[1]} cannot be quantized by a dim-{self.prototypes.shape[1]} codebook"
            )
        d2 = ((Va[:, None, :] - self.prototypes[None, :, :]) ** 2).sum(axis=2)
        return np.argmin(d2, axis=1)

    def quantized(self, V) -> np.ndarray:
        return self.prototypes[self.assign(V)]


def quantize(vectors, m: int, seed: int = 0) -> Codebook:
    """Deterministic Lloyd quantization with farthest-point seeding.

    Empty cells are reseated on the sample currently farthest from its
    prototype, so all m cells end populated.  Raises when m exceeds the
    number of distinct vectors.
    """
    V = np.atleast_2d(np.asarray(vectors, dtype=np.float64))
    n = V.shape[0]
    if m < 1:
        raise ConfigError(f"codebook size must be >= 1, got {m}")
    n_distinct = np.unique(V, axis=0).shape[0]
    if m > n_distinct:
        raise ConfigError(
            f"codebook size {m} exceeds the {n_distinct} distinct vectors available"
        )

    rng = np.random.default_rng(seed)
    first = int(rng.integers(n))
    P = np.empty((m, V.shape[1]))
    P[0] = V[first]
    d2min = ((V - P[0]) ** 2).sum(axis=1)
    for t in range(1, m):
        nxt = int(np.argmax(d2min))
        P[t] = V[nxt]
        d2min = np.minimum(d2min, ((V - P[t]) ** 2).sum(axis=1))

    prev = None
    for _ in range(_LLOYD_MAX_ITER):
        d2 = ((V[:, None, :] - P[None, :, :]) ** 2).sum(axis=2)
        assign = np.argmin(d2, axis=1)
        counts = np.bincount(assign, minlength=m)
        if (counts == 0).any():
            own = d2[np.arange(n), assign].copy()
            for c in np.flatnonzero(counts == 0):
                far = int(np.argmax(own))
                P[c] = V[far]
                own[far] = -1.0
            prev = None
            continue
        if prev is not None and np.array_equal(assign, prev):
            break
        prev = assign
        for c in range(m):
            P[c] = V[assign == c].mean(axis=0)
    return Codebook(prototypes=P)


def shift_register(series, register_len: int, tap_interval: int) -> np.ndarray:
    """Tap vectors from a sliding register over a time-ordered series.

    The register holds the last ``register_len`` values; taps sit at every
    ``tap_interval``-th slot counted from the oldest end, most recent last.
    One tap vector is emitted per time step once the register is full.
    """
    if register_len < 1 or tap_interval < 1 or register_len % tap_interval != 0:
        raise ConfigError(
            f"register_len {register_len} is not a multiple of tap_interval {tap_interval}"
        )
    s = np.asarray(series, dtype=np.float64)
    if s.ndim != 1:
        raise InputError("series must be 1-d")
    w = register_len // tap_interval
    if s.shape[0] < register_len:
        warnings.warn(
            f"series of length {s.shape[0]} is shorter than the register ({register_len}); no taps emitted",
            stacklevel=2,
        )
        return np.empty((0, w), dtype=np.float64)
    offsets = np.arange(register_len - tap_interval, -1, -tap_interval)
    ts = np.arange(register_len - 1, s.shape[0])
    return s[ts[:, None] - offsets[None, :]]


def _tap_indices(T: int, register_len: int, tap_interval: int) -> np.ndarray:
    """Series indices of the final tap vector (most recent last)."""
    offsets = np.arange(register_len - tap_interval, -1, -tap_interval)
    return (T - 1) - offsets


@dataclass(frozen=True)
class HierarchyModel:
    """Trained six-layer ensemble.

    ``cell_counts`` / ``cell_pos`` give the training occupancy and positive
    count per best-matching unit; ``specialists`` maps unit index to its
    layer-6 model; ``majority_cells`` records units where a specialist was
    required but untrainable so the cell probability is used instead.
    """

    config: HierarchyConfig
    n_features: int
    feature_models: tuple = field(repr=False)
    codebooks: tuple = field(repr=False)
    layer_models: tuple = field(repr=False)
    bmu_codebook: Codebook = field(repr=False)
    cell_counts: np.ndarray = field(repr=False)
    cell_pos: np.ndarray = field(repr=False)
    cell_members: tuple = field(repr=False)
    specialists: dict = field(repr=False)
    majority_cells: frozenset = frozenset()

    def cell_probability(self, unit: int) -> float:
        """Laplace-smoothed positive fraction of a unit's training cell."""
        n = int(self.cell_counts[unit])
        return (int(self.cell_pos[unit]) + 1.0) / (n + 2.0)

    def predict_prob(self, x) -> float:
        return float(predict_probs(self, np.asarray(x)[None])[0])

    def predict_label(self, x) -> int:
        return 1 if self.predict_prob(x) >= 0.5 else -1

    def predict_probs(self, X) -> np.ndarray:
        return predict_probs(self, X)

    def predict_labels(self, X) -> np.ndarray:
        return np.where(predict_probs(self, X) >= 0.5, 1, -1)


def _feature_taps(X: np.ndarray, config: HierarchyConfig) -> list[np.ndarray]:
    """Per-feature layer-1 input matrices from static or series data."""
    if X.ndim == 2:
        if config.register_len != 1:
            raise InputError(
                "static feature matrix requires register_len = 1; pass per-feature series instead"
            )
        return [X[:, f : f + 1] for f in range(X.shape[1])]
    if X.ndim == 3:
        T = X.shape[2]
        if T < config.register_len:
            raise InputError(
                f"series length {T} is shorter than the register ({config.register_len})"
            )
        idx = _tap_indices(T, config.register_len, config.tap_interval)
        return [X[:, f, :][:, idx] for f in range(X.shape[1])]
    raise InputError("X must be (n, features) or (n, features, time)")


def _base_matrix(X: np.ndarray, config: HierarchyConfig) -> np.ndarray:
    """Flat per-sample representation used by layer-6 specialists."""
    taps = _feature_taps(X, config)
    return np.hstack(taps)


def _train_collapsed(Z, y, kernel, C, spec) -> mfsvm.MfsvmModel:
    """Train on distinct (row, label) pairs with multiplicities as freq.

    Falls back to the uncollapsed set when a class collapses below two
    distinct rows.
    """
    pairs = np.column_stack([Z, y])
    uniq, inverse, counts = np.unique(pairs, axis=0, return_inverse=True, return_counts=True)
    Zu = uniq[:, :-1]
    yu = uniq[:, -1]
    try:
        return mfsvm.train(
            Zu, yu, kernel, C=C, membership_spec=spec,
            freq=counts.astype(np.float64), calibrate=False,
        )
    except TrainingError:
        return mfsvm.train(Z, y, kernel, C=C, membership_spec=spec, calibrate=False)


def train_hierarchy(X, y, config: HierarchyConfig) -> HierarchyModel:
    """Fit the full six-layer model on labeled (optionally temporal) data."""
    Xa = np.asarray(X, dtype=np.float64)
    ya = np.asarray(y, dtype=np.float64)
    if ya.shape != (Xa.shape[0],):
        raise InputError("one label per sample required")
    taps = _feature_taps(Xa, config)
    n = Xa.shape[0]
    n_features = len(taps)

    feature_models = tuple(
        mfsvm.train(
            taps[f], ya, config.kernel_for(1), C=config.c_for(1),
            membership_spec=config.membership, calibrate=False,
        )
        for f in range(n_features)
    )
    D = np.column_stack([m.decision_values(taps[f]) for f, m in enumerate(feature_models)])

    codebooks = []
    layer_models = []
    Z = D
    for i, width in enumerate(config.codebook_sizes):
        cb = quantize(Z, min(width, np.unique(Z, axis=0).shape[0]), seed=config.seed + i)
        codebooks.append(cb)
        Q = cb.quantized(Z)
        layer = i + 2
        model = _train_collapsed(
            Q, ya, config.kernel_for(layer), config.c_for(layer), config.membership
        )
        layer_models.append(model)
        d = model.decision_values(Q)
        Z = np.column_stack([Q, d])

    bmu_cb = quantize(
        Z, min(config.bmu_units, np.unique(Z, axis=0).shape[0]), seed=config.seed + 4
    )
    units = bmu_cb.assign(Z)
    m_units = bmu_cb.m
    cell_counts = np.bincount(units, minlength=m_units)
    cell_pos = np.bincount(units, weights=(ya > 0).astype(float), minlength=m_units).astype(int)
    cell_members = tuple(np.flatnonzero(units == u) for u in range(m_units))

    base = _base_matrix(Xa, config)
    specialists = {}
    majority = set()
    for u in range(m_units):
        cnt = int(cell_counts[u])
        if cnt < config.min_unit_examples:
            continue
        pos = int(cell_pos[u])
        error = 1.0 - max(pos, cnt - pos) / cnt
        if error <= config.impurity_threshold:
            continue
        idx = cell_members[u]
        try:
            specialists[u] = mfsvm.train(
                base[idx], ya[idx], config.kernel_for(6), C=config.c_for(6),
                membership_spec=config.membership, calibrate=True,
            )
        except TrainingError:
            majority.add(u)

    return HierarchyModel(
        config=config,
        n_features=n_features,
        feature_models=feature_models,
        codebooks=tuple(codebooks),
        layer_models=tuple(layer_models),
        bmu_codebook=bmu_cb,
        cell_counts=cell_counts,
        cell_pos=cell_pos,
        cell_members=cell_members,
        specialists=specialists,
        majority_cells=frozenset(majority),
    )


def _route_units(model: HierarchyModel, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Forward pass to BMU assignment; returns (units, base representation)."""
    taps = _feature_taps(X, model.config)
    if len(taps) != model.n_features:
        raise InputError(
            f"expected {model.n_features} features, got {len(taps)}"
        )
    D = np.column_stack(
        [m.decision_values(taps[f]) for f, m in enumerate(model.feature_models)]
    )
    Z = D
    for cb, layer_model in zip(model.codebooks, model.layer_models):
        Q = cb.quantized(Z)
        d = layer_model.decision_values(Q)
        Z = np.column_stack([Q, d])
    units = model.bmu_codebook.assign(Z)

    empty = model.cell_counts == 0
    if empty.any():
        P = model.bmu_codebook.prototypes
        nonempty = np.flatnonzero(~empty)
        for k in np.flatnonzero(empty[units]):
            d2 = ((P[nonempty] - P[units[k]]) ** 2).sum(axis=1)
            units[k] = nonempty[int(np.argmin(d2))]
    return units, _base_matrix(X, model.config)


def predict_probs(model: HierarchyModel, X) -> np.ndarray:
    """Routed probability of the positive class for each row of X."""
    Xa = np.asarray(X, dtype=np.float64)
    units, base = _route_units(model, Xa)
    out = np.empty(units.shape[0])
    for k, u in enumerate(units):
        spec_model = model.specialists.get(int(u))
        if spec_model is not None:
            out[k] = spec_model.predict_prob(base[k])
        else:
            out[k] = model.cell_probability(int(u))
    return out


def predict_hierarchy(model: HierarchyModel, x) -> float:
    """Probability for a single sample (row of features or feature series)."""
    return model.predict_prob(x)


def similarity_gap_diagnostic(X, y, similarity) -> tuple[np.ndarray, float]:
    """Per-sample (within-class mean sim) - (best other-class mean sim).

    ``similarity`` is either a callable s(x_i, x_j) or a precomputed square
    matrix.  The global estimate is the minimum gap over all samples; a
    positive value means every sample is on average closer to its own class.
    Reported for diagnosis, never asserted by training.
    """
    Xa = np.asarray(X, dtype=np.float64)
    ya = np.asarray(y)
    n = Xa.shape[0]
    if callable(similarity):
        S = np.empty((n, n))
        for i in range(n):
            for j in range(i, n):
                S[i, j] = S[j, i] = float(similarity(Xa[i], Xa[j]))
    else:
        S = np.asarray(similarity, dtype=np.float64)
        if S.shape != (n, n):
            raise InputError(f"similarity matrix must be ({n}, {n}), got {S.shape}")

    labels = np.unique(ya)
    if labels.shape[0] < 2:
        raise TrainingError("similarity gap requires at least two classes")
    gaps = np.empty(n)
    for i in range(n):
        same = (ya == ya[i])
        same_others = same.copy()
        same_others[i] = False
        within = float(S[i, same_others].mean()) if same_others.any() else 0.0
        between = max(
            float(S[i, ya == c].mean()) for c in labels if c != ya[i]
        )
        gaps[i] = within - between
    return gaps, float(gaps.min())
