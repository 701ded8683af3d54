"""Backend parity and accuracy of the compensated kernels."""

import math

import numpy as np
import pytest

from qvlab._kernels import BACKEND, _ref
from qvlab import _kernels


def _rand(n, seed):
    rng = np.random.Generator(np.random.Philox(key=seed))
    return np.ascontiguousarray(rng.standard_normal(n))


@pytest.mark.parametrize("n", [2, 3, 17, 4096, 2**14 + 1])
def test_qv_sum_backend_parity_bitexact(n):
    x, y = _rand(n, 1), _rand(n, 2)
    assert _kernels.qv_sum(x, y) == _ref.qv_sum(x, y)


@pytest.mark.parametrize("n", [2, 64, 4097])
def test_masked_kernels_backend_parity_bitexact(n):
    x, y = _rand(n, 3), _rand(n, 4)
    rng = np.random.Generator(np.random.Philox(key=5))
    mask = np.ascontiguousarray((rng.random(n - 1) < 0.7).astype(np.uint8))
    assert _kernels.masked_qv_sum(x, y, mask) == _ref.masked_qv_sum(x, y, mask)
    assert _kernels.masked_abs_sum(x, y, mask) == _ref.masked_abs_sum(x, y, mask)


def test_ito_cumsum_backend_parity_bitexact():
    n = 2**14
    eta, y = _rand(n - 1, 6), _rand(n, 7)
    out_a = np.empty(n)
    out_b = np.empty(n)
    _kernels.ito_cumsum(eta, y, out_a)
    _ref.ito_cumsum(eta, y, out_b)
    assert np.array_equal(out_a, out_b)


def test_qv_sum_matches_fsum():
    # Kahan accumulation should agree with exact summation to ~1 ulp even on
    # 2^15 cells where naive accumulation drifts
    x, y = _rand(2**15, 8), _rand(2**15, 9)
    terms = (x[1:] - x[:-1]) * (y[1:] - y[:-1])
    exact = math.fsum(terms.tolist())
    got = _kernels.qv_sum(x, y)
    assert abs(got - exact) <= 4 * np.finfo(float).eps * abs(exact)


def test_masked_all_true_equals_full():
    x, y = _rand(513, 10), _rand(513, 11)
    mask = np.ones(512, dtype=np.uint8)
    assert _kernels.masked_qv_sum(x, y, mask) == _kernels.qv_sum(x, y)


def test_masked_all_false_is_zero():
    x, y = _rand(100, 12), _rand(100, 13)
    mask = np.zeros(99, dtype=np.uint8)
    assert _kernels.masked_qv_sum(x, y, mask) == 0.0
    assert _kernels.masked_abs_sum(x, y, mask) == 0.0


def test_ito_cumsum_constant_integrand_telescopes():
    y = _rand(4097, 14)
    eta = np.ones(4096)
    out = np.empty(4097)
    _kernels.ito_cumsum(eta, y, out)
    assert out[0] == 0.0
    assert abs(out[-1] - (y[-1] - y[0])) < 1e-12


def test_backend_is_compiled_when_extension_present():
    try:
        from qvlab._kernels import _core  # noqa: F401
    except ImportError:
        pytest.skip("extension not built")
    import os

    if os.environ.get("QVLAB_KERNEL_BACKEND", "").lower() == "python":
        assert BACKEND == "python"
    else:
        assert BACKEND == "compiled"
