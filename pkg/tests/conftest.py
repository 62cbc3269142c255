"""Shared fixtures: random problem builders and a small generated fleet."""

from __future__ import annotations

import numpy as np
import pytest

from fleetrisk.kernels import KernelSpec, gram


def random_problem(rng, n_max=12, dim_max=4, families=("linear", "rbf", "sigmoid")):
    """Small random training problem with both labels present."""
    n = int(rng.integers(4, n_max + 1))
    dim = int(rng.integers(1, dim_max + 1))
    X = rng.normal(size=(n, dim))
    y = np.where(rng.uniform(size=n) < 0.5, 1.0, -1.0)
    y[0] = 1.0
    y[1] = -1.0
    family = families[int(rng.integers(len(families)))]
    spec = KernelSpec(family, gamma=float(rng.uniform(0.2, 1.5)),
                      coef0=float(rng.uniform(-0.5, 0.5)))
    return X, y, spec


def _project_box_hyperplane(a, y, caps):
    """Exact Euclidean projection onto {0 <= v <= caps, y.v = 0}.

    The shifted point v(lam) = clip(a - lam*y, 0, caps) makes s(lam) = y.v
    piecewise linear and nonincreasing; the root segment is found from the
    2n breakpoints where a coordinate hits a bound.
    """
    brk = np.concatenate([(a - caps) * y, a * y])  # y_i = +-1 so /y_i == *y_i
    brk = np.unique(brk)
    s = np.clip(a[None, :] - brk[:, None] * y[None, :], 0.0, caps) @ y
    k = int(np.searchsorted(-s, 0.0, side="left"))
    if k == 0:
        lam = brk[0]
    elif k >= brk.size:
        lam = brk[-1]
    else:
        s0, s1 = s[k - 1], s[k]
        lam = brk[k - 1] if s0 == s1 else brk[k - 1] + (brk[k] - brk[k - 1]) * s0 / (s0 - s1)
    return np.clip(a - lam * y, 0.0, caps)


def projected_gradient_qp(K, y, caps, iters=60000, lr=None):
    """Independent dual-QP solver: accelerated projected gradient.

    Maximizes sum(a) - a' (K*yy') a / 2 subject to 0 <= a <= caps and
    y'a = 0, using Nesterov momentum with restart on non-monotone steps.
    """
    K = np.asarray(K, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    caps = np.asarray(caps, dtype=np.float64)
    Q = K * np.outer(y, y)
    n = y.size
    if lr is None:
        lam = float(np.max(np.linalg.eigvalsh(Q)))
        lr = 1.0 / max(lam, 1e-6)

    def value(v):
        return float(np.sum(v) - 0.5 * v @ Q @ v)

    a = _project_box_hyperplane(np.zeros(n), y, caps)
    z = a.copy()
    t = 1.0
    best = a.copy()
    best_val = value(a)
    since_improve = 0
    for _ in range(iters):
        a_new = _project_box_hyperplane(z + lr * (1.0 - Q @ z), y, caps)
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        if value(a_new) < value(a):  # momentum overshoot: restart
            z = a.copy()
            t = 1.0
        else:
            z = a_new + ((t - 1.0) / t_new) * (a_new - a)
            a, t = a_new, t_new
        v = value(a)
        if v > best_val + 1e-15 * (1.0 + abs(best_val)):
            best_val = v
            best = a.copy()
            since_improve = 0
        else:
            since_improve += 1
            if since_improve >= 500:
                break
    return best, best_val


def dual_objective(K, y, alpha):
    Q = np.asarray(K) * np.outer(y, y)
    return float(np.sum(alpha) - 0.5 * alpha @ Q @ alpha)


@pytest.fixture(scope="session")
def fleet_paths(tmp_path_factory):
    """Small synthetic fleet written once per session: raw and feature CSVs."""
    from datetime import date

    from fleetrisk import dataprep, synthetic

    root = tmp_path_factory.mktemp("fleet")
    raw = root / "raw.csv"
    features = root / "features.csv"
    rows = synthetic.generate_fleet(n_vehicles=150, seed=5, dirty=8)
    synthetic.write_raw_csv(rows, str(raw))
    records, _ = dataprep.parse_fleet_csv(str(raw))
    kept, _ = dataprep.clean(records)
    derived, _ = dataprep.derive_features(kept, date(2017, 1, 1))
    final, _ = dataprep.apply_filters(derived)
    dataprep.write_feature_csv(final, str(features))
    return {"raw": raw, "features": features, "n_raw_rows": len(rows)}


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def gram_for(spec, X):
    return gram(spec, X)
