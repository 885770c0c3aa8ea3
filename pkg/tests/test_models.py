import json
import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gibbsprior import (NGG, DataError, Dirichlet, DomainError, GnedinGamma,
                        MixedFiniteDirichlet, MixingPMF, Partition, PitmanYor, parse_model)
from gibbsprior.clustering import prior_Kn_pmf
from gibbsprior.models import (check_addition_rule, check_gibbs_dependence, eppf,
                               integer_partitions, log_eppf, log_eppf_closed_form, log_V,
                               log_V_row, log_V_table, model_from_dict, ngg_log_v_series,
                               partition_multiplicity, predictive_weights, prob_new,
                               sample_kn, sample_partition)

from conftest import set_partitions

MODELS = [
    Dirichlet(2.0),
    PitmanYor(0.5, 1.0),
    PitmanYor(0.25, 12.2157),
    PitmanYor(-0.5, 2.5),
    NGG(0.5, 1.0),
    NGG(0.25, 48.4185),
    NGG(0.7353, 1.0),
    GnedinGamma(0.5),
    MixedFiniteDirichlet(1.0, MixingPMF.poisson(3.0)),
    MixedFiniteDirichlet(1.0, MixingPMF.geometric(0.5)),
    MixedFiniteDirichlet(1.0, MixingPMF.gnedin(0.5)),
    MixedFiniteDirichlet(2.0, MixingPMF.explicit([0.2, 0.3, 0.5])),
]
IDS = [repr(m) for m in MODELS]


def _finite_dirichlet_log_v(abs_sigma, weights, n, k):
    """``sum_m pi(m) m!/(m-k)! |s|^k / (m|s|)_n`` summed directly."""
    total = 0.0
    for m, w in enumerate(weights, start=1):
        if m >= k and w > 0:
            total += w * math.perm(m, k) * abs_sigma ** k / math.prod(
                m * abs_sigma + i for i in range(n))
    return math.log(total) if total > 0 else -math.inf


class TestPartition:
    def test_basic(self):
        p = Partition.from_labels("aabcbbd")
        assert (p.n, p.k) == (7, 4)
        assert p.freq_counts == {1: 2, 2: 1, 3: 1}
        assert Partition.from_freq_counts(p.freq_counts).freq_counts == p.freq_counts
        assert p.add_new().k == 5
        assert p.add_to(0).n == 8

    def test_invalid(self):
        with pytest.raises(DomainError):
            Partition([])
        with pytest.raises(DomainError):
            Partition([2, 0])

    def test_multiplicity_counts_set_partitions(self):
        for n in range(1, 8):
            counts = Counter(tuple(sorted((len(b) for b in sp), reverse=True))
                             for sp in set_partitions(n))
            for freqs in integer_partitions(n):
                assert partition_multiplicity(freqs) == pytest.approx(counts[freqs])


class TestKnownValues:
    def test_small_weights(self):
        assert math.exp(log_V(PitmanYor(0.5, 1.0), 2, 2)) == pytest.approx(0.75)
        assert math.exp(log_V(GnedinGamma(0.5), 2, 1)) == pytest.approx(1 / 3)
        assert log_V(NGG(0.5, 1.0), 1, 1) == pytest.approx(0.0, abs=1e-12)
        assert log_V(Dirichlet(3.0), 1, 1) == pytest.approx(0.0)

    def test_dirichlet_predictive(self):
        w_new, w_old = predictive_weights(Dirichlet(1.0), Partition([2, 1]))
        assert w_new == pytest.approx(0.25)
        np.testing.assert_allclose(w_old, [0.5, 0.25])

    def test_py_finite_species(self):
        m = PitmanYor(-0.5, 1.0)
        assert m.n_species == 2
        assert prob_new(m, 3, 2) == 0.0
        assert log_V(m, 3, 3) == -math.inf

    @pytest.mark.parametrize("model", [Dirichlet(0.7), PitmanYor(0.3, 2.0), PitmanYor(-0.5, 2.5)],
                             ids=repr)
    def test_closed_form_eppf(self, model):
        for freqs in integer_partitions(9):
            p = Partition(freqs)
            a, b = log_eppf(model, p), log_eppf_closed_form(model, p)
            if b == -math.inf:
                assert a == -math.inf
            else:
                assert a == pytest.approx(b, rel=1e-12, abs=1e-12)


class TestNGG:
    @pytest.mark.parametrize("sigma,beta", [(0.5, 1.0), (0.25, 48.4185), (0.7353, 1.0),
                                            (0.1, 0.01), (0.9, 100.0)])
    def test_quadrature_vs_series(self, sigma, beta):
        for n, k in [(5, 1), (5, 3), (20, 7), (30, 30)]:
            assert log_V(NGG(sigma, beta), n, k) == pytest.approx(
                ngg_log_v_series(sigma, beta, n, k), abs=1e-9)

    def test_row_matches_pointwise(self):
        m = NGG(0.4, 3.0)
        row = log_V_row(m, 40)
        pts = [log_V(m, 40, k) for k in (1, 13, 40)]
        np.testing.assert_allclose(row[[0, 12, 39]], pts, rtol=1e-12)


class TestMixedFiniteDirichlet:
    def test_explicit_against_direct_sum(self):
        w = [0.1, 0.2, 0.3, 0.4]
        m = MixedFiniteDirichlet(1.5, MixingPMF.explicit(w))
        for n in range(1, 12):
            for k in range(1, min(n, 4) + 1):
                assert log_V(m, n, k) == pytest.approx(_finite_dirichlet_log_v(1.5, w, n, k),
                                                       rel=1e-11)
            if n > 4:
                assert log_V(m, n, 5) == -math.inf

    def test_poisson_against_truncated_sum(self):
        mix = MixingPMF.poisson(4.0)
        w = mix.pmf(np.arange(1, 200))
        m = MixedFiniteDirichlet(1.0, mix)
        for n, k in [(3, 2), (10, 4), (25, 9)]:
            assert log_V(m, n, k) == pytest.approx(_finite_dirichlet_log_v(1.0, w, n, k),
                                                   rel=1e-10)

    def test_gnedin_mixing_matches_gnedin_model(self):
        a = MixedFiniteDirichlet(1.0, MixingPMF.gnedin(0.5))
        b = GnedinGamma(0.5)
        for n, k in [(2, 1), (7, 3), (30, 12)]:
            assert log_V(a, n, k) == pytest.approx(log_V(b, n, k), rel=1e-12)

    def test_mixing_pmfs_normalized(self):
        for mix in [MixingPMF.poisson(2.0), MixingPMF.geometric(0.7)]:
            assert mix.pmf(np.arange(1, 2000)).sum() == pytest.approx(1.0, abs=1e-12)
        # Gnedin tail mass beyond M is (1-gamma)_M / M!
        g, M = 0.3, 5000
        tail = math.exp(math.lgamma(1 - g + M) - math.lgamma(1 - g) - math.lgamma(M + 1))
        head = MixingPMF.gnedin(g).pmf(np.arange(1, M + 1)).sum()
        assert head + tail == pytest.approx(1.0, abs=1e-10)

    def test_bad_mixing(self):
        with pytest.raises(DomainError):
            MixingPMF.explicit([0.5, 0.6])
        with pytest.raises(DomainError):
            MixingPMF.geometric(1.5)


@pytest.mark.parametrize("model", MODELS, ids=IDS)
class TestStructure:
    def test_recursion(self, model):
        s = model.sigma
        nxt = log_V_row(model, 1)
        for n in range(1, 40):
            cur, nxt = nxt, log_V_row(model, n + 1)
            k = np.arange(1, n + 1)
            fin = np.isfinite(cur)
            b = np.logaddexp(np.log(n - s * k) + nxt[:n], nxt[1:])
            np.testing.assert_allclose(cur[fin], b[fin], atol=1e-9, rtol=0)
            assert np.all(~np.isfinite(b[~fin]))

    def test_table_matches_rows(self, model):
        T = log_V_table(model, 25)
        for n in (3, 11, 25):
            row = log_V_row(model, n)
            fin = np.isfinite(row)
            np.testing.assert_array_equal(np.isfinite(T[n, 1:n + 1]), fin)
            np.testing.assert_allclose(T[n, 1:n + 1][fin], row[fin], atol=1e-9)

    def test_addition_rule(self, model):
        assert check_addition_rule(model, 10).passed

    def test_eppf_normalization_by_enumeration(self, model):
        n = 8
        cache = {}
        total = 0.0
        k_mass = np.zeros(n + 1)
        for sp in set_partitions(n):
            key = tuple(sorted(len(b) for b in sp))
            if key not in cache:
                cache[key] = eppf(model, Partition(key))
            total += cache[key]
            k_mass[len(sp)] += cache[key]
        assert total == pytest.approx(1.0, abs=1e-9)
        np.testing.assert_allclose(k_mass[1:], prior_Kn_pmf(model, n).pmf, atol=1e-9)

    def test_gibbs_dependence(self, model):
        rep = check_gibbs_dependence(model, 7)
        assert rep.frequency_invariant
        assert rep.exchangeable

    def test_json_round_trip(self, model):
        again = model_from_dict(json.loads(model.to_json()))
        assert again == model
        assert parse_model(model.to_json()) == model


class TestDependenceClassification:
    def test_dirichlet_k_invariant(self):
        assert check_gibbs_dependence(Dirichlet(1.3), 8).k_invariant

    @pytest.mark.parametrize("model", [NGG(0.5, 1.0), PitmanYor(0.5, 1.0), GnedinGamma(0.4)],
                             ids=repr)
    def test_others_depend_on_k(self, model):
        assert not check_gibbs_dependence(model, 8).k_invariant


class TestLimits:
    def test_py_sigma_to_zero(self):
        p = Partition([4, 2, 1, 1])
        assert log_eppf(PitmanYor(1e-10, 1.5), p) == pytest.approx(
            log_eppf(Dirichlet(1.5), p), abs=1e-8)


class TestSampling:
    @pytest.mark.parametrize("model", [PitmanYor(0.5, 1.0), NGG(0.5, 1.0),
                                       MixedFiniteDirichlet(1.0, MixingPMF.poisson(3.0))],
                             ids=repr)
    def test_sample_kn_law(self, model, rng):
        n, size = 15, 40_000
        draws = sample_kn(model, n, size, rng)
        pmf = prior_Kn_pmf(model, n).pmf
        freq = np.bincount(draws, minlength=n + 1)[1:] / size
        se = np.sqrt(pmf * (1 - pmf) / size)
        assert np.all(np.abs(freq - pmf) <= 5 * se + 1e-12)

    def test_sample_partition_mean(self, rng):
        model = PitmanYor(0.5, 2.0)
        ks = [sample_partition(model, 30, rng).k for _ in range(3000)]
        dist = prior_Kn_pmf(model, 30)
        assert abs(np.mean(ks) - dist.mean()) < 5 * math.sqrt(dist.var() / 3000)


class TestProperties:
    @settings(max_examples=60, deadline=None)
    @given(freqs=st.lists(st.integers(1, 6), min_size=1, max_size=6),
           sigma=st.floats(0.01, 0.95), theta=st.floats(0.1, 20.0))
    def test_predictive_sums_to_one(self, freqs, sigma, theta):
        w_new, w_old = predictive_weights(PitmanYor(sigma, theta), Partition(freqs))
        assert w_new + w_old.sum() == pytest.approx(1.0, rel=1e-10)

    @settings(max_examples=40, deadline=None)
    @given(freqs=st.lists(st.integers(1, 5), min_size=1, max_size=5),
           sigma=st.floats(0.05, 0.9), beta=st.floats(0.05, 30.0))
    def test_ngg_predictive_sums_to_one(self, freqs, sigma, beta):
        w_new, w_old = predictive_weights(NGG(sigma, beta), Partition(freqs))
        assert w_new + w_old.sum() == pytest.approx(1.0, rel=1e-8)

    @settings(max_examples=40, deadline=None)
    @given(freqs=st.lists(st.integers(1, 5), min_size=1, max_size=6), data=st.data())
    def test_eppf_symmetric(self, freqs, data):
        perm = data.draw(st.permutations(freqs))
        m = NGG(0.3, 2.0)
        assert log_eppf(m, Partition(freqs)) == pytest.approx(log_eppf(m, Partition(perm)),
                                                              rel=1e-14)


class TestParsing:
    @pytest.mark.parametrize("text,model", [
        ("dp:2", Dirichlet(2.0)),
        ("py:0.5,1", PitmanYor(0.5, 1.0)),
        ("ngg:0.25,48.4185", NGG(0.25, 48.4185)),
        ("gnedin:0.5", GnedinGamma(0.5)),
        ("mfd:1,poisson,3", MixedFiniteDirichlet(1.0, MixingPMF.poisson(3.0))),
        ("mfd:1,geometric,0.5", MixedFiniteDirichlet(1.0, MixingPMF.geometric(0.5))),
    ])
    def test_inline(self, text, model):
        assert parse_model(text) == model

    def test_json_file(self, tmp_path):
        f = tmp_path / "m.json"
        f.write_text(PitmanYor(0.3, 4.0).to_json())
        assert parse_model(str(f)) == PitmanYor(0.3, 4.0)

    @pytest.mark.parametrize("text", ["foo:1", "py:0.5", "py:1.5,1", "dp:-1", "mfd:1,zeta,2"])
    def test_rejects(self, text):
        with pytest.raises(DomainError):
            parse_model(text)

    def test_missing_file(self):
        with pytest.raises(DataError):
            parse_model("/nonexistent/model.json")


class TestDomain:
    def test_py_negative_sigma_needs_integer_species(self):
        with pytest.raises(DomainError):
            PitmanYor(-0.5, 1.2)

    def test_bad_nk(self):
        with pytest.raises(DomainError):
            log_V(Dirichlet(1.0), 3, 4)
