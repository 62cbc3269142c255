"""The compiled and pure numeric cores must agree bit for bit.

Model files are hex-float JSON, so any drift between backends would break
byte-identical retraining; these tests compare raw outputs with zero
tolerance.
"""

import os
import subprocess
import sys

import numpy as np

import fleetrisk._core as core
from fleetrisk._core import pure
from fleetrisk._core import _speedups as compiled


def _random_case(rng, n=None, dim=None):
    n = n or int(rng.integers(3, 15))
    dim = dim or int(rng.integers(1, 5))
    X = rng.normal(size=(n, dim))
    gamma = float(rng.uniform(0.1, 2.0))
    coef0 = float(rng.uniform(-1.0, 1.0))
    return X, gamma, coef0


def test_kernel_value_parity():
    rng = np.random.default_rng(0)
    for _ in range(200):
        X, gamma, coef0 = _random_case(rng, n=2)
        for family in (core.LINEAR, core.RBF, core.SIGMOID):
            a = pure.kernel_value(X[0], X[1], family, gamma, coef0)
            b = compiled.kernel_value(X[0], X[1], family, gamma, coef0)
            assert a == b  # bitwise


def test_gram_matrix_parity():
    rng = np.random.default_rng(1)
    for _ in range(20):
        X, gamma, coef0 = _random_case(rng)
        for family in (core.LINEAR, core.RBF, core.SIGMOID):
            A = np.asarray(pure.gram_matrix(X, family, gamma, coef0))
            B = np.asarray(compiled.gram_matrix(X, family, gamma, coef0))
            assert np.array_equal(A, B)


def test_kernel_row_parity():
    rng = np.random.default_rng(2)
    for _ in range(20):
        X, gamma, coef0 = _random_case(rng)
        q = rng.normal(size=X.shape[1])
        for family in (core.LINEAR, core.RBF, core.SIGMOID):
            a = np.asarray(pure.kernel_row(X, q, family, gamma, coef0))
            b = np.asarray(compiled.kernel_row(X, q, family, gamma, coef0))
            assert np.array_equal(a, b)


def test_smo_solve_parity():
    rng = np.random.default_rng(3)
    for trial in range(15):
        n = int(rng.integers(4, 14))
        X = rng.normal(size=(n, 2))
        y = np.where(rng.uniform(size=n) < 0.5, 1.0, -1.0)
        y[0], y[1] = 1.0, -1.0
        gamma = float(rng.uniform(0.2, 1.0))
        K = np.asarray(compiled.gram_matrix(X, core.RBF, gamma, 0.0))
        caps = rng.uniform(0.3, 3.0, size=n)
        args = (K, y, caps, 1e-6, 1e-12, 10 * n, 1_000_000)
        a_p, G_p, obj_p, it_p, conv_p = pure.smo_solve(*args)
        a_c, G_c, obj_c, it_c, conv_c = compiled.smo_solve(*args)
        assert np.array_equal(np.asarray(a_p), np.asarray(a_c)), f"trial {trial}"
        assert np.array_equal(np.asarray(G_p), np.asarray(G_c))
        assert obj_p == obj_c
        assert it_p == it_c
        assert conv_p == conv_c


def test_backend_env_switch_and_end_to_end_equality():
    script = (
        "import hashlib, numpy as np\n"
        "import fleetrisk._core as core\n"
        "from fleetrisk import mfsvm\n"
        "from fleetrisk.kernels import KernelSpec\n"
        "from fleetrisk.membership import MembershipSpec\n"
        "from fleetrisk.serialize import dumps_doc, mfsvm_to_doc\n"
        "rng = np.random.default_rng(7)\n"
        "X = np.vstack([rng.normal(size=(15, 2)) + 1, rng.normal(size=(15, 2)) - 1])\n"
        "y = np.array([1.0] * 15 + [-1.0] * 15)\n"
        "m = mfsvm.train(X, y, KernelSpec('rbf', gamma=0.5), C=2.0,\n"
        "                membership_spec=MembershipSpec('kernel_space'))\n"
        "text = dumps_doc(mfsvm_to_doc(m))\n"
        "print(core.BACKEND, hashlib.sha256(text.encode()).hexdigest())\n"
    )

    def run(pure_env):
        env = dict(os.environ)
        if pure_env:
            env["FLEETRISK_PURE"] = "1"
        else:
            env.pop("FLEETRISK_PURE", None)
        out = subprocess.run([sys.executable, "-c", script], env=env,
                             capture_output=True, text=True, check=True)
        return out.stdout.split()

    backend_default, digest_default = run(pure_env=False)
    backend_pure, digest_pure = run(pure_env=True)
    assert backend_default == "compiled"
    assert backend_pure == "pure"
    assert digest_default == digest_pure  # identical serialized model bytes
