import dataclasses

import numpy as np
import pytest

from fleetrisk.errors import ConfigError, InputError, TrainingError
from fleetrisk.hierarchy import (
    Codebook,
    HierarchyConfig,
    predict_hierarchy,
    predict_probs,
    quantize,
    shift_register,
    similarity_gap_diagnostic,
    train_hierarchy,
)
from fleetrisk.kernels import KernelSpec
from fleetrisk.membership import MembershipSpec
from fleetrisk.serialize import dumps_doc, hierarchy_to_doc


def test_shift_register_tap_layout():
    # register of 4 with taps every 2 slots over [1..6]: one row per step
    # once the register is full, oldest tap first.
    rows = shift_register([1, 2, 3, 4, 5, 6], 4, 2)
    assert rows.shape == (3, 2)
    assert np.array_equal(rows, [[2.0, 4.0], [3.0, 5.0], [4.0, 6.0]])


def test_shift_register_identity_when_single_slot():
    s = np.array([3.0, 1.0, 4.0, 1.0, 5.0])
    rows = shift_register(s, 1, 1)
    assert rows.shape == (5, 1)
    assert np.array_equal(rows[:, 0], s)


def test_shift_register_full_width_taps():
    rows = shift_register([1, 2, 3, 4, 5], 3, 1)
    assert np.array_equal(rows, [[1, 2, 3], [2, 3, 4], [3, 4, 5]])


def test_shift_register_rejects_misaligned_interval():
    with pytest.raises(ConfigError):
        shift_register([1, 2, 3, 4, 5, 6], 4, 3)
    with pytest.raises(ConfigError):
        shift_register([1, 2, 3], 0, 1)
    with pytest.raises(ConfigError):
        shift_register([1, 2, 3], 2, 0)
    with pytest.raises(InputError):
        shift_register(np.zeros((2, 2)), 2, 1)


def test_shift_register_short_series_warns_and_yields_nothing():
    with pytest.warns(UserWarning):
        rows = shift_register([1.0, 2.0], 4, 2)
    assert rows.shape == (0, 2)


def test_quantize_partitions_and_is_deterministic():
    rng = np.random.default_rng(0)
    V = np.vstack([
        rng.normal(size=(30, 2)) + [0, 6],
        rng.normal(size=(30, 2)) + [6, 0],
        rng.normal(size=(30, 2)) - 4.0,
    ])
    cb1 = quantize(V, 3, seed=7)
    cb2 = quantize(V, 3, seed=7)
    assert np.array_equal(cb1.prototypes, cb2.prototypes)
    assign = cb1.assign(V)
    assert assign.shape == (90,)
    counts = np.bincount(assign, minlength=3)
    assert np.all(counts > 0)
    # with well-separated blobs each prototype sits on a blob mean
    centers = np.array([[0, 6], [6, 0], [-4, -4]], dtype=float)
    d = ((cb1.prototypes[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    assert np.all(np.sqrt(d.min(axis=1)) < 1.0)


def test_quantize_rejects_bad_sizes():
    V = np.array([[0.0], [1.0], [1.0]])
    with pytest.raises(ConfigError):
        quantize(V, 0)
    with pytest.raises(ConfigError):
        quantize(V, 3)  # only two distinct vectors
    cb = quantize(V, 2, seed=0)
    assert cb.m == 2


def test_codebook_assignment_ties_go_to_lowest_index():
    cb = Codebook(prototypes=np.array([[0.0], [2.0]]))
    assert cb.assign([[1.0]])[0] == 0
    assert cb.assign([[1.0 + 1e-9]])[0] == 1
    with pytest.raises(InputError):
        cb.assign(np.zeros((2, 3)))


def test_quantized_maps_to_prototype_rows():
    rng = np.random.default_rng(1)
    V = rng.normal(size=(40, 3))
    cb = quantize(V, 5, seed=2)
    Q = cb.quantized(V)
    assign = cb.assign(V)
    assert np.array_equal(Q, cb.prototypes[assign])


def test_config_validation():
    with pytest.raises(ConfigError):
        HierarchyConfig(register_len=4, tap_interval=3)
    with pytest.raises(ConfigError):
        HierarchyConfig(register_len=0)
    with pytest.raises(ConfigError):
        HierarchyConfig(codebook_sizes=(4, 4, 4))
    with pytest.raises(ConfigError):
        HierarchyConfig(bmu_units=0)
    with pytest.raises(ConfigError):
        HierarchyConfig(impurity_threshold=0.0)
    with pytest.raises(ConfigError):
        HierarchyConfig(impurity_threshold=1.0)
    with pytest.raises(ConfigError):
        HierarchyConfig(min_unit_examples=0)
    with pytest.raises(ConfigError):
        HierarchyConfig(layer_C=(1.0, 1.0))
    cfg = HierarchyConfig(register_len=6, tap_interval=2)
    assert cfg.taps == 3
    assert cfg.c_for(3) == cfg.C
    assert cfg.kernel_for(1) == cfg.kernel


def _blob_problem(rng, n_per=40):
    X = np.vstack([
        rng.normal(scale=0.8, size=(n_per, 3)) + [2.5, 0, 1],
        rng.normal(scale=0.8, size=(n_per, 3)) - [2.5, 0, 1],
    ])
    y = np.array([1.0] * n_per + [-1.0] * n_per)
    return X, y


def _small_config(**overrides):
    base = dict(
        codebook_sizes=(4, 4, 4, 4),
        bmu_units=4,
        kernel=KernelSpec("rbf", gamma=0.5),
        C=2.0,
        membership=MembershipSpec("kernel_space"),
        seed=3,
    )
    base.update(overrides)
    return HierarchyConfig(**base)


def test_training_routes_every_sample_to_one_cell():
    rng = np.random.default_rng(4)
    X, y = _blob_problem(rng)
    model = train_hierarchy(X, y, _small_config())
    members = model.cell_members
    all_idx = np.sort(np.concatenate([m for m in members if m.size]))
    assert np.array_equal(all_idx, np.arange(X.shape[0]))  # partition: no overlap, no gap
    assert int(model.cell_counts.sum()) == X.shape[0]
    assert np.all(model.cell_pos <= model.cell_counts)
    probs = predict_probs(model, X)
    assert probs.shape == (X.shape[0],)
    assert np.all((probs >= 0.0) & (probs <= 1.0))
    assert predict_hierarchy(model, X[0]) == pytest.approx(probs[0], abs=0)


def test_pure_cells_use_laplace_counts_and_spawn_no_specialists():
    rng = np.random.default_rng(5)
    n_per = 30
    X = np.vstack([
        rng.normal(scale=0.5, size=(n_per, 3)) + 3.0,
        rng.normal(scale=0.5, size=(n_per, 3)) - 3.0,
    ])
    y = np.array([1.0] * n_per + [-1.0] * n_per)
    model = train_hierarchy(X, y, _small_config(bmu_units=2))
    # every feature separates the blobs, so both routing cells are pure:
    # no layer-6 models
    assert model.specialists == {}
    assert model.majority_cells == frozenset()
    for u in range(model.bmu_codebook.m):
        n = int(model.cell_counts[u])
        pos = int(model.cell_pos[u])
        assert model.cell_probability(u) == pytest.approx((pos + 1.0) / (n + 2.0), abs=0)
    probs = predict_probs(model, X)
    # routed output must equal the routed cell's smoothed rate exactly
    allowed = {model.cell_probability(0), model.cell_probability(1)}
    for k in range(X.shape[0]):
        assert probs[k] in allowed


def test_specialist_spawn_rule():
    # An impure, well-populated cell gets a specialist; smaller or purer
    # cells do not.
    rng = np.random.default_rng(6)
    n = 60
    X = rng.uniform(-1, 1, size=(n, 2))
    y = np.where(X[:, 0] * X[:, 1] > 0, 1.0, -1.0)  # XOR pattern: one cell stays mixed
    config = _small_config(
        codebook_sizes=(1, 1, 1, 1), bmu_units=1, min_unit_examples=20,
        kernel=KernelSpec("rbf", gamma=2.0), C=10.0,
    )
    model = train_hierarchy(X, y, config)
    cnt = int(model.cell_counts[0])
    pos = int(model.cell_pos[0])
    error = 1.0 - max(pos, cnt - pos) / cnt
    assert cnt >= 20 and error > config.impurity_threshold
    assert (0 in model.specialists) or (0 in model.majority_cells)
    assert 0 in model.specialists  # both classes present, so training succeeds
    # the specialist sees the base features, so it can carve the XOR quadrants
    probs = predict_probs(model, X)
    acc = float(np.mean((probs >= 0.5) == (y > 0)))
    assert acc >= 0.9


def test_specialist_not_spawned_below_minimum_occupancy():
    rng = np.random.default_rng(7)
    n = 16  # below the default minimum of 20
    X = rng.uniform(-1, 1, size=(n, 2))
    y = np.where(X[:, 0] * X[:, 1] > 0, 1.0, -1.0)
    if abs(y.sum()) >= n - 2:
        y[:2] = [1.0, -1.0]
    config = _small_config(codebook_sizes=(1, 1, 1, 1), bmu_units=1)
    model = train_hierarchy(X, y, config)
    assert model.specialists == {}
    assert model.majority_cells == frozenset()


def test_retraining_with_fixed_seed_is_byte_identical():
    rng = np.random.default_rng(8)
    X, y = _blob_problem(rng, n_per=25)
    config = _small_config(seed=11)
    doc1 = dumps_doc(hierarchy_to_doc(train_hierarchy(X, y, config)))
    doc2 = dumps_doc(hierarchy_to_doc(train_hierarchy(X, y, config)))
    assert doc1 == doc2


def test_different_seed_may_change_quantization_but_stays_valid():
    rng = np.random.default_rng(9)
    X, y = _blob_problem(rng, n_per=25)
    model = train_hierarchy(X, y, _small_config(seed=12))
    probs = predict_probs(model, X)
    assert np.all((probs >= 0.0) & (probs <= 1.0))


def test_temporal_input_uses_register_taps():
    rng = np.random.default_rng(10)
    n, T = 50, 8
    series = rng.normal(size=(n, 2, T)).cumsum(axis=2)
    y = np.where(series[:, 0, -1] > 0, 1.0, -1.0)
    y[:2] = [1.0, -1.0]
    y[2:4] = [1.0, -1.0]
    config = _small_config(register_len=4, tap_interval=2)
    # layer-1 input per feature is the final register snapshot of each series
    from fleetrisk.hierarchy import _feature_taps

    taps = _feature_taps(series, config)
    assert len(taps) == 2
    for f in range(2):
        expected = np.vstack([shift_register(series[i, f], 4, 2)[-1] for i in range(n)])
        assert np.array_equal(taps[f], expected)
    model = train_hierarchy(series, y, config)
    assert model.n_features == 2
    for fm in model.feature_models:
        assert fm.training_X.shape[1] == config.taps
    probs = predict_probs(model, series)
    assert probs.shape == (n,)
    assert np.all((probs >= 0.0) & (probs <= 1.0))
    assert np.array_equal(probs, predict_probs(model, series))


def test_static_matrix_with_register_is_rejected():
    rng = np.random.default_rng(11)
    X, y = _blob_problem(rng, n_per=15)
    with pytest.raises(InputError):
        train_hierarchy(X, y, _small_config(register_len=4, tap_interval=2))
    with pytest.raises(InputError):
        train_hierarchy(X[..., None].repeat(2, axis=2), y,
                        _small_config(register_len=4, tap_interval=2))
    with pytest.raises(InputError):
        train_hierarchy(X, y[:-1], _small_config())


def test_prediction_feature_count_must_match():
    rng = np.random.default_rng(12)
    X, y = _blob_problem(rng, n_per=15)
    model = train_hierarchy(X, y, _small_config())
    with pytest.raises(InputError):
        predict_probs(model, X[:, :2])


def test_empty_cell_routes_to_nearest_populated_prototype():
    rng = np.random.default_rng(13)
    X, y = _blob_problem(rng, n_per=25)
    model = train_hierarchy(X, y, _small_config(bmu_units=3))
    # force one unit empty and check queries re-route instead of failing
    victim = int(np.argmin(model.cell_counts))
    counts = model.cell_counts.copy()
    counts[victim] = 0
    hollowed = dataclasses.replace(model, cell_counts=counts)
    probs = predict_probs(hollowed, X)
    assert np.all((probs >= 0.0) & (probs <= 1.0))
    if not hollowed.specialists:
        allowed = {hollowed.cell_probability(u) for u in range(3) if u != victim}
        assert all(p in allowed for p in probs)


def test_similarity_gap_diagnostic_matches_hand_counts():
    X = np.zeros((4, 1))
    y = np.array([1, 1, -1, -1])
    S = np.array([
        [1.0, 0.8, 0.1, 0.2],
        [0.8, 1.0, 0.3, 0.0],
        [0.1, 0.3, 1.0, 0.7],
        [0.2, 0.0, 0.7, 1.0],
    ])
    gaps, overall = similarity_gap_diagnostic(X, y, S)
    # sample 0: within = 0.8, other-class mean = (0.1 + 0.2) / 2
    assert gaps[0] == pytest.approx(0.8 - 0.15, abs=1e-12)
    assert gaps[1] == pytest.approx(0.8 - 0.15, abs=1e-12)
    assert gaps[2] == pytest.approx(0.7 - 0.2, abs=1e-12)
    assert gaps[3] == pytest.approx(0.7 - 0.1, abs=1e-12)
    assert overall == pytest.approx(min(gaps), abs=0)


def test_similarity_gap_accepts_callable_and_validates():
    rng = np.random.default_rng(14)
    X = rng.normal(size=(6, 2))
    y = np.array([1, 1, 1, -1, -1, -1])

    def sim(a, b):
        return float(np.exp(-np.sum((a - b) ** 2)))

    S = np.array([[sim(a, b) for b in X] for a in X])
    gaps_fn, overall_fn = similarity_gap_diagnostic(X, y, sim)
    gaps_mat, overall_mat = similarity_gap_diagnostic(X, y, S)
    assert np.allclose(gaps_fn, gaps_mat, atol=0)
    assert overall_fn == overall_mat
    with pytest.raises(InputError):
        similarity_gap_diagnostic(X, y, S[:4, :4])
    with pytest.raises(TrainingError):
        similarity_gap_diagnostic(X, np.ones(6), S)
