import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ddsde_avg import _pykernels, kernels

try:
    from ddsde_avg import _ckernels
except ImportError:  # extension not built
    _ckernels = None

needs_c = pytest.mark.skipif(_ckernels is None, reason="compiled kernels not built")


def test_backend_reported():
    assert kernels.BACKEND in ("compiled", "python")


def test_keys_are_distinct_per_stream():
    keys = _pykernels.stream_keys(7, kernels.TAG_NOISE, range(4), 100)
    assert keys.shape == (4, 100)
    assert len(np.unique(keys)) == 400
    other = _pykernels.stream_keys(7, kernels.TAG_INIT, range(4), 100)
    assert not np.intersect1d(keys, other).size


def test_normals_moments():
    keys = _pykernels.stream_keys(1, 0, [0], 200_000)[0]
    z = _pykernels.normals(keys, 3, 1).ravel()
    assert abs(z.mean()) < 4 / np.sqrt(z.size)
    assert abs(z.var() - 1) < 0.02
    u = _pykernels.uniforms(keys, 3, 2)
    assert 0 < u.min() and u.max() < 1


def test_streams_independent_of_batch():
    all_keys = _pykernels.stream_keys(3, 0, range(5), 10)
    one = _pykernels.stream_keys(3, 0, [2], 10)
    np.testing.assert_array_equal(all_keys[2], one[0])
    np.testing.assert_array_equal(_pykernels.normals(all_keys[2], 9, 3), _pykernels.normals(one[0], 9, 3))


@needs_c
@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**63 - 1), step=st.integers(0, 10**6), d=st.integers(1, 5))
def test_compiled_rng_matches_python(seed, step, d):
    kp = _pykernels.stream_keys(seed, 0, [0, 1], 7)
    kc = _ckernels.stream_keys(seed, 0, [0, 1], 7)
    np.testing.assert_array_equal(kp, kc)
    np.testing.assert_allclose(_ckernels.normals(kc, step, d), _pykernels.normals(kp, step, d), rtol=1e-13, atol=1e-13)
    np.testing.assert_array_equal(_ckernels.uniforms(kc, step, d), _pykernels.uniforms(kp, step, d))


@needs_c
@settings(max_examples=30, deadline=None)
@given(n=st.integers(1, 30), m=st.integers(1, 30), d=st.integers(1, 3),
       alpha2=st.floats(1.05, 1.95), delta=st.floats(0.0, 0.5), seed=st.integers(0, 1000))
def test_compiled_power_sum_matches_python(n, m, d, alpha2, delta, seed):
    r = np.random.default_rng(seed)
    x, y = r.standard_normal((n, d)), r.standard_normal((m, d))
    w = np.full(m, 1.0 / m)
    op, bp = _pykernels.power_kernel_sum(x, y, w, alpha2, delta)
    oc, bc = _ckernels.power_kernel_sum(x, y, w, alpha2, delta)
    assert bp == bc
    np.testing.assert_allclose(oc, op, rtol=1e-12, atol=1e-12)


def test_power_sum_direct_oracle():
    x = np.array([[1.0, 0.0], [0.0, 2.0]])
    y = np.array([[0.0, 0.0], [3.0, 0.0]])
    w = np.array([0.25, 0.75])
    a2 = 1.5
    expect = np.zeros_like(x)
    for i in range(2):
        for j in range(2):
            diff = x[i] - y[j]
            expect[i] += w[j] * diff / np.linalg.norm(diff) ** a2
    out, bad = kernels.power_kernel_sum(x, y, w, a2, 0.0)
    assert bad < 0
    np.testing.assert_allclose(out, expect, rtol=1e-14)


def test_power_sum_flags_coincident_point():
    x = np.array([[0.0], [1.0]])
    _, bad = kernels.power_kernel_sum(x, x, np.array([0.5, 0.5]), 1.5, 0.0)
    assert bad == 0
    out, bad = kernels.power_kernel_sum(x, x, np.array([0.5, 0.5]), 1.5, 0.1)
    assert bad < 0 and np.all(np.isfinite(out))
