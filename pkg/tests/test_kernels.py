import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from anls import _kernels
from anls.symmetry import placement_order

numba_only = pytest.mark.skipif(_kernels.numba is None, reason="numba not importable")
mats = st.tuples(st.integers(1, 6), st.sampled_from([2, 4, 8])).flatmap(
    lambda s: arrays(float, s, elements=st.floats(-5, 5)))


@numba_only
class TestBackendsAgree:
    @settings(max_examples=40, deadline=None)
    @given(mats, st.sampled_from([1.0, 2.0, 2.5, 3.7]))
    def test_clipped_power(self, a, q):
        o1, m1 = _kernels.clipped_power_numba(a, q)
        o2, m2 = _kernels.clipped_power_numpy(a, q)
        assert np.allclose(o1, o2, rtol=1e-14, atol=0) and m1 == m2

    @settings(max_examples=40, deadline=None)
    @given(mats, mats, st.sampled_from([3.0, 4.0, 5.5]), st.floats(1e-4, 1e-1))
    def test_nonlinear_phase(self, re, im, p, tau):
        if re.shape != im.shape:
            im = np.resize(im, re.shape)
        u = re + 1j * im
        a = _kernels.nonlinear_phase_numba(u.copy(), p, tau)
        b = _kernels.nonlinear_phase_numpy(u.copy(), p, tau)
        assert np.allclose(a, b, rtol=1e-13, atol=1e-14)
        assert np.allclose(np.abs(a), np.abs(u), rtol=1e-13)

    @settings(max_examples=40, deadline=None)
    @given(mats)
    def test_rearrange_rows(self, a):
        o = placement_order(a.shape[1])
        assert np.array_equal(_kernels.rearrange_rows_numba(a, o),
                              _kernels.rearrange_rows_numpy(a, o))

    @settings(max_examples=40, deadline=None)
    @given(mats)
    def test_sort_rows(self, a):
        assert np.array_equal(_kernels.sort_rows_desc_numba(a), _kernels.sort_rows_desc_numpy(a))


class TestDispatch:
    def test_backend_name(self):
        assert _kernels.backend() in ("numba", "numpy")

    def test_numpy_fallback_via_env(self, monkeypatch):
        import importlib
        monkeypatch.setenv("ANLS_NUMBA", "0")
        mod = importlib.reload(_kernels)
        try:
            assert mod.backend() == "numpy"
            assert mod.clipped_power is mod.clipped_power_numpy
        finally:
            monkeypatch.delenv("ANLS_NUMBA")
            importlib.reload(_kernels)
