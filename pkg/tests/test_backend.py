import os
import subprocess
import sys

import numpy as np
import pytest

from mwhittaker import _pykernels
from mwhittaker._backend import BACKEND

ck = pytest.importorskip("mwhittaker._ckernels")


@pytest.fixture
def gen():
    return np.random.default_rng(99)


def test_compiled_backend_selected():
    assert BACKEND == "cython"


def test_tri_kernels_agree(gen):
    x0 = gen.gamma(2.0, size=(7, 10))
    ws = 1.0 / gen.gamma(1.5, size=(12, 7, 10))
    assert np.allclose(ck.tri_step_d1(x0, ws[0]), _pykernels.tri_step_d1(x0, ws[0]), rtol=1e-13)
    assert np.allclose(ck.tri_run_d1(x0, ws), _pykernels.tri_run_d1(x0, ws), rtol=1e-12)


def test_polymer_kernels_agree(gen):
    v = gen.gamma(1.3, size=(5, 9, 4))
    assert np.allclose(ck.polymer_dp_d1(v), _pykernels.polymer_dp_d1(v), rtol=1e-13)
    assert np.allclose(ck.strict_weak_dp_d1(v), _pykernels.strict_weak_dp_d1(v), rtol=1e-13)


def test_sigma_sweeps_agree(gen):
    B, N, S = 6, 4, 5
    F = N * (N - 1) // 2
    u0 = gen.normal(size=(B, F))
    lz = gen.normal(size=(B, N))
    beta = np.array([0.3, 0.8, 1.1, 1.9])
    sigma = np.full((B, F), 0.7)
    normals = gen.normal(size=(S, F, B))
    uniforms = gen.uniform(size=(S, F, B))
    ua, ub = u0.copy(), u0.copy()
    acc_a = ck.sigma_sweeps_d1(ua, lz, beta, sigma, normals, uniforms)
    acc_b = _pykernels.sigma_sweeps_d1(ub, lz, beta, sigma, normals, uniforms)
    assert np.allclose(ua, ub, rtol=1e-12)
    assert np.array_equal(np.asarray(acc_a), acc_b)


def test_pure_python_override():
    env = dict(os.environ, MW_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import mwhittaker; print(mwhittaker.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
