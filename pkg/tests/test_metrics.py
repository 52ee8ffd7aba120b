import math
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ddsde_avg.errors import ResolutionError
from ddsde_avg.metrics import (
    FUNCTIONS,
    ErrorSummary,
    fluctuation_functional,
    freedman_diaconis,
    strong_error,
    tanh_family,
    tv_histogram,
    tv_lower_bound,
)
from ddsde_avg.model import DiffusionSpec
from ddsde_avg.simulator import InitialSampler, SimConfig


def _ens(sup_gap):
    return SimpleNamespace(sup_gap=np.asarray(sup_gap, dtype=float))


class TestStrongError:
    def test_identical_systems(self):
        es = strong_error(_ens(np.zeros((4, 10))), 0.5)
        assert es.estimate == 0 and es.std_error == 0 and es.n_replicas == 4

    def test_matches_manual(self, rng):
        g = rng.random((5, 7))
        es = strong_error(_ens(g), 0.3)
        per = (g ** 0.6).mean(axis=1)
        assert es.estimate == pytest.approx(per.mean())
        assert es.std_error == pytest.approx(per.std(ddof=1) / math.sqrt(5))

    def test_monotone_in_gap(self, rng):
        g = rng.random((3, 8))
        assert strong_error(_ens(g + rng.random((3, 8))), 0.5).estimate >= strong_error(_ens(g), 0.5).estimate

    def test_relabel_invariant(self, rng):
        g = rng.random((3, 8))
        a = strong_error(_ens(g), 0.5).estimate
        b = strong_error(_ens(g[:, rng.permutation(8)]), 0.5).estimate
        assert a == pytest.approx(b, rel=1e-15)

    def test_bad_input(self):
        with pytest.raises(ValueError):
            strong_error(_ens(np.zeros((0, 3))), 0.5)
        with pytest.raises(ValueError):
            strong_error(_ens(np.zeros((1, 3))), 1.0)
        with pytest.raises(ValueError):
            ErrorSummary(float("nan"), 0.0, 1)


class TestTV:
    def test_identical(self, rng):
        a = rng.standard_normal(1000)
        assert tv_histogram(a, a) == 0.0

    def test_disjoint(self, rng):
        a = rng.random(500)
        assert tv_histogram(a, a + 10.0, 0.1) == 1.0

    def test_gaussian_oracle(self):
        r = np.random.default_rng(2024)
        a = r.standard_normal(1_000_000)
        b = r.standard_normal(1_000_000) + 0.5
        oracle = math.erf(0.25 / math.sqrt(2))  # 2 Phi(0.25) - 1
        assert abs(oracle - 0.19741) < 1e-4
        assert abs(tv_histogram(a, b, 0.05) - oracle) < 0.01

    def test_dimension_limit(self, rng):
        with pytest.raises(ValueError, match="tv_lower_bound"):
            tv_histogram(rng.random((10, 4)), rng.random((10, 4)))

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 1000), shift=st.integers(-50, 50), d=st.integers(1, 3))
    def test_symmetry_and_lattice_shift(self, seed, shift, d):
        r = np.random.default_rng(seed)
        w = 0.25
        a, b = r.standard_normal((300, d)), r.standard_normal((200, d)) * 1.3
        v = tv_histogram(a, b, w)
        assert v == tv_histogram(b, a, w)
        assert v == pytest.approx(tv_histogram(a + shift * w, b + shift * w, w), abs=1e-12)
        assert 0 <= v <= 1

    def test_freedman_diaconis(self, rng):
        x = rng.standard_normal(8000)
        q75, q25 = np.percentile(x, [75, 25])
        assert freedman_diaconis(x)[0] == pytest.approx(2 * (q75 - q25) / 20.0)
        assert freedman_diaconis(np.zeros(10))[0] > 0


class TestTVLowerBound:
    def test_constant_family(self, rng):
        a, b = rng.random(100), rng.random(100) + 3
        assert tv_lower_bound(a, b, [lambda X: np.ones(X.shape[0])]) == 0.0

    def test_sign_on_disjoint(self, rng):
        a, b = rng.random(100) - 2, rng.random(100) + 2
        assert tv_lower_bound(a, b, [lambda X: np.sign(X[:, 0])]) == 1.0

    def test_empty_and_unbounded(self, rng):
        with pytest.raises(ValueError):
            tv_lower_bound(rng.random(5), rng.random(5), [])
        with pytest.raises(ValueError):
            tv_lower_bound(rng.random(5), rng.random(5), [lambda X: 3 * np.ones(X.shape[0])])

    def test_gaussian_family_below_histogram(self):
        r = np.random.default_rng(7)
        a = r.standard_normal(200_000)
        b = r.standard_normal(200_000) + 0.5
        lb = tv_lower_bound(a, b, tanh_family(ks=(1, 4, 16, 64)))
        hist = tv_histogram(a, b, 0.05)
        assert 0.15 <= lb <= hist + 3 * 0.005


class TestFluctuation:
    def _cfg(self, h, T=1.0, reps=2000):
        return SimConfig(T=T, dt=h / 10, n_replicas=reps, seed=1, initial=InitialSampler("point"))

    def test_constant_f(self):
        es = fluctuation_functional(DiffusionSpec.identity(1), FUNCTIONS["constant"], 0.1, self._cfg(0.1))
        assert es.estimate == 0.0

    def test_h_at_least_T(self):
        es = fluctuation_functional(DiffusionSpec.identity(1), FUNCTIONS["indicator"], 1.0, self._cfg(1.0))
        assert es.estimate == 0.0

    def test_resolution(self):
        cfg = SimConfig(T=1.0, dt=0.02, n_replicas=2)
        with pytest.raises(ResolutionError):
            fluctuation_functional(DiffusionSpec.identity(1), FUNCTIONS["indicator"], 0.1, cfg)
        cfg = SimConfig(T=1.0, dt=0.003, n_replicas=2)
        with pytest.raises(ResolutionError):
            fluctuation_functional(DiffusionSpec.identity(1), FUNCTIONS["indicator"], 0.1, cfg)

    def test_brute_force_oracle(self):
        # recompute the left Riemann sums from stored paths
        from ddsde_avg.simulator import simulate_driftless

        h, T = 0.125, 1.0
        cfg = SimConfig(T=T, dt=h / 10, n_replicas=300, seed=8, initial=InitialSampler("point"))
        diff = DiffusionSpec.identity(1)
        f = FUNCTIONS["tanh"]
        paths = simulate_driftless(cfg, diff)[:, 0, :, 0]
        K = cfg.n_steps
        t = np.arange(K) * cfg.dt
        proj = np.where(t < h, t, np.floor(t / h + 1e-9) * h)
        idx = np.rint(proj / cfg.dt).astype(int)
        integ = (np.tanh(paths[:, :K]) - np.tanh(paths[:, idx])).sum(axis=1) * cfg.dt
        es = fluctuation_functional(diff, f, h, cfg)
        assert es.estimate == pytest.approx(np.mean(integ ** 2), rel=1e-10)

    def test_shrinks_with_h(self):
        diff = DiffusionSpec.identity(1)
        big = fluctuation_functional(diff, FUNCTIONS["indicator"], 2 ** -3, self._cfg(2 ** -3))
        small = fluctuation_functional(diff, FUNCTIONS["indicator"], 2 ** -6, self._cfg(2 ** -6))
        assert small.estimate <= big.estimate + 3 * math.hypot(small.std_error, big.std_error)
