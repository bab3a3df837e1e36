import warnings
from fractions import Fraction as F

import numpy as np
import pytest
from scipy import stats

from suploc.assembly import uniform_path
from suploc.oracle import exact_law
from suploc.simulate import (
    ConditionalEstimate,
    EmpiricalLaw,
    MixingProcessSpec,
    atom_proxy,
    conditional_uniformity,
    empirical_vs_exact,
    ks_uniform,
    sample_shift_tau,
    simulate_mixing_tau,
    uniformity_band,
)


class TestShiftSampler:
    @pytest.mark.parametrize("which", ["e1_path", "e3_repaired", "e3_literal"])
    def test_matches_exact(self, request, which):
        path = request.getfixturevalue(which)
        law = exact_law(path, 1)
        e = sample_shift_tau(path, 1, 10**6, seed=11)
        cmp = empirical_vs_exact(e, law)
        assert cmp["bins_within"] >= 0.99
        assert cmp["atom0_err"] <= 3 * cmp["atom0_se"] + 1e-6
        assert cmp["atomT_err"] <= 3 * cmp["atomT_se"] + 1e-6

    def test_repeated_seeds(self, e3_repaired):
        law = exact_law(e3_repaired, 1)
        within = [empirical_vs_exact(sample_shift_tau(e3_repaired, 1, 200_000, seed=s), law)["bins_within"] for s in range(5)]
        assert np.mean(within) >= 0.99

    def test_single_path(self, e1_path):
        e = sample_shift_tau(e1_path, 1, 1, seed=3)
        assert e.counts.sum() + e.atom0_count + e.atomT_count == 1 and len(e.tau) == 1

    def test_masses_sum_to_one(self, e3_repaired):
        e = sample_shift_tau(e3_repaired, 1, 5000, seed=0)
        assert e.masses.sum() + e.atom0_hat + e.atomT_hat == pytest.approx(1.0)

    def test_reproducible(self, e3_repaired):
        a = sample_shift_tau(e3_repaired, 1, 10_000, seed=5)
        b = sample_shift_tau(e3_repaired, 1, 10_000, seed=5)
        c = sample_shift_tau(e3_repaired, 1, 10_000, seed=6)
        assert np.array_equal(a.tau, b.tau) and not np.array_equal(a.tau, c.tau)

    def test_prefix_stable(self, e3_repaired):
        # blocks are keyed by index, so a longer run extends a shorter one
        a = sample_shift_tau(e3_repaired, 1, 5000, seed=5)
        b = sample_shift_tau(e3_repaired, 1, 9000, seed=5)
        assert np.array_equal(a.tau, b.tau[:5000])

    def test_uniform_preset_ks(self):
        e = sample_shift_tau(uniform_path(1), 1, 50_000, seed=2)
        assert e.atom0_count == e.atomT_count == 0
        assert stats.kstest(e.tau, "uniform").pvalue > 0.01


class TestMixingSpec:
    def test_constant_rejected(self):
        with pytest.raises(ValueError):
            MixingProcessSpec(innovations="constant")

    def test_coarse_grid_rejected(self):
        with pytest.raises(ValueError):
            MixingProcessSpec(w=1, h=0.2)

    def test_unknown_law(self):
        with pytest.raises(ValueError):
            MixingProcessSpec(innovations="cauchy")

    def test_short_window_rejected(self):
        with pytest.raises(ValueError):
            simulate_mixing_tau(MixingProcessSpec(), 5, 10)


class TestMixing:
    def test_thread_count_invariance(self):
        spec = MixingProcessSpec(seed=9)
        a = simulate_mixing_tau(spec, 20, 10_000, workers=1)
        b = simulate_mixing_tau(spec, 20, 10_000, workers=4)
        assert np.array_equal(a.tau, b.tau) and np.array_equal(a.sup_values, b.sup_values)
        assert np.array_equal(a.counts, b.counts)

    @pytest.mark.parametrize("kind", ["normal", "uniform", "exponential"])
    def test_fast_equals_dense(self, kind):
        spec = MixingProcessSpec(innovations=kind, seed=4)
        a = simulate_mixing_tau(spec, 10, 2000)
        b = simulate_mixing_tau(spec, 10, 2000, dense=True)
        assert np.array_equal(a.tau, b.tau) and np.array_equal(a.sup_values, b.sup_values)

    def test_time_reversal(self):
        a = simulate_mixing_tau(MixingProcessSpec(seed=1), 10, 20_000)
        b = simulate_mixing_tau(MixingProcessSpec(seed=2), 10, 20_000, reverse=True)
        assert stats.ks_2samp(a.tau, b.tau).pvalue > 0.01

    def test_edge_effects_shrink(self):
        short = simulate_mixing_tau(MixingProcessSpec(seed=3), 10, 20_000)
        long = simulate_mixing_tau(MixingProcessSpec(seed=4), 200, 20_000)
        assert ks_uniform(long) < ks_uniform(short)
        # the short window piles mass into the edge bins
        assert short.density[0] * 10 > 1.1 and short.density[-1] * 10 > 1.1

    def test_band_decreases_over_seed_pairs(self):
        wins = 0
        for s in range(20):
            short = simulate_mixing_tau(MixingProcessSpec(seed=s), 10, 20_000, n_bins=10)
            long = simulate_mixing_tau(MixingProcessSpec(seed=100 + s), 200, 20_000, n_bins=10)
            wins += uniformity_band(long, 0.1) < uniformity_band(short, 0.1)
        assert wins >= 19

    def test_atom_proxy_continuous(self):
        e = simulate_mixing_tau(MixingProcessSpec(seed=5), 10, 10_000)
        assert atom_proxy(e) <= 3 / 10_000

    def test_atom_proxy_rademacher(self):
        with pytest.warns(UserWarning):
            e = simulate_mixing_tau(MixingProcessSpec(innovations="rademacher", seed=5), 10, 10_000)
        assert atom_proxy(e) > 100 / 10_000

    def test_atom_proxy_constant_samples(self):
        assert atom_proxy([1.5] * 50) == 1.0


def flat_law(n_bins=10, n=1000):
    return EmpiricalLaw(T=1.0, n_paths=n, edges=np.linspace(0, 1, n_bins + 1), counts=np.full(n_bins, n // n_bins))


class TestStatistics:
    def test_band_uniform_binned(self):
        assert uniformity_band(flat_law(), 0.1) == pytest.approx(0.0, abs=1e-12)

    def test_band_uniform_exact(self):
        assert uniformity_band(exact_law(uniform_path(2), 2), 0.1) == 0

    def test_band_e1(self, e1_path):
        assert uniformity_band(exact_law(e1_path, 1), 0.1) == F(1, 2)

    def test_band_bad_eps(self):
        with pytest.raises(ValueError):
            uniformity_band(flat_law(), 0.5)

    def test_conditional_trivial(self, e3_repaired):
        assert conditional_uniformity(exact_law(e3_repaired, 1), F(1, 5), F(1, 5), F(4, 5), F(4, 5)) == 1
        e = sample_shift_tau(e3_repaired, 1, 1000, seed=0)
        est = conditional_uniformity(e, 0.2, 0.2, 0.8, 0.8)
        assert est.estimate == 1.0

    def test_conditional_e3(self, e3_repaired):
        assert conditional_uniformity(exact_law(e3_repaired, 1), 0, 0, F(1, 2), 1) == F(2, 3)

    def test_conditional_ci(self, e3_repaired):
        e = sample_shift_tau(e3_repaired, 1, 100_000, seed=1)
        est = conditional_uniformity(e, 0.0, 0.0, 0.5, 1.0)
        assert isinstance(est, ConditionalEstimate)
        assert est.ci_low <= 2 / 3 <= est.ci_high and not est.covers_target

    def test_conditional_zero_mass(self, e1_path):
        e = sample_shift_tau(e1_path, 1, 1, seed=0)
        e.tau[:] = 0.0
        assert conditional_uniformity(e, 0.2, 0.3, 0.4, 0.5).estimate is None
        law = exact_law(uniform_path(1), 1)
        with pytest.raises(ValueError):
            conditional_uniformity(law, 0.5, 0.4, 0.6, 0.7)

    def test_ks_needs_samples(self):
        with pytest.raises(ValueError):
            ks_uniform(flat_law())

    def test_ks_on_uniform_samples(self):
        rng = np.random.default_rng(0)
        e = flat_law()
        e.tau = rng.random(1000)
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            assert ks_uniform(e) < 0.06
