import itertools
from fractions import Fraction

import numpy as np
import pytest
from _oracles import brute_sur

from csym.errors import BoundExceededError, ModelError
from csym.groups import FiniteAbelianGroup, count_sur
from csym.harness import (
    compare_classes,
    directional_checks,
    empirical_distribution,
    empirical_moment,
    empirical_moments,
    isotropy_gap_trend,
    moment_sum_oracle,
    moments_from_cokernels,
    sample_cokernels,
    verify_alternating_form_bound,
    verify_generation_bound,
)
from csym.limits import LimitDistribution
from csym.linalg import ExactMatrix, cokernel, cokernel_mod_batch
from csym.models import EntryDistribution, MatrixModel, draw_batch, standard_alternating
from csym.rng import SeedSpec

G = FiniteAbelianGroup.parse


def generation_probability(p, ell, k):
    """P[k uniform vectors span F_p^ell]."""
    if k < ell:
        return Fraction(0)
    out = Fraction(1)
    for i in range(ell):
        out *= 1 - Fraction(p**i, p**k)
    return out


class TestSampling:
    def test_rejects_zero_trials(self):
        with pytest.raises(ValueError):
            sample_cokernels(MatrixModel.symmetric(3, 2), 0, SeedSpec(1))

    def test_batching_does_not_change_samples(self):
        model = MatrixModel.symmetric(6, 4)
        a = sample_cokernels(model, 250, SeedSpec(9), batch=1000)
        b = sample_cokernels(model, 250, SeedSpec(9), batch=7)
        assert a == b

    def test_integer_model_uses_integer_cokernel(self):
        model = MatrixModel.iid(4)
        seed = SeedSpec(3)
        X = draw_batch(model, seed, 20)
        assert sample_cokernels(model, 20, seed) == [cokernel(ExactMatrix(W)) for W in X]

    def test_moment_deterministic(self):
        model = MatrixModel.iid(8, 2)
        a = empirical_moment(model, G("2"), 300, SeedSpec(4))
        b = empirical_moment(model, G("2"), 300, SeedSpec(4))
        assert a == b and a.mean >= 0

    def test_moment_matches_direct_average(self):
        model = MatrixModel.symmetric(5, 4)
        seed = SeedSpec(12)
        X = draw_batch(model, seed, 400)
        vals = [count_sur(H, G("2,2")) for H in cokernel_mod_batch(X, 4)]
        est = empirical_moment(model, G("2,2"), 400, seed)
        assert est.mean == pytest.approx(np.mean(vals))
        assert est.stderr == pytest.approx(np.std(vals, ddof=1) / 20)

    def test_shared_samples(self):
        model = MatrixModel.symmetric(6, 2)
        both = empirical_moments(model, [G("2"), G("2,2")], 300, SeedSpec(5))
        assert both[G("2")] == empirical_moment(model, G("2"), 300, SeedSpec(5))

    def test_translation_invariance(self):
        # X + S for a fixed symmetric S has the same law as X
        n, a, trials = 10, 2, 6000
        model = MatrixModel.symmetric(n, a)
        S = np.random.default_rng(0).integers(0, a, (n, n))
        S = np.triu(S) + np.triu(S, 1).T
        seed = SeedSpec(31)
        X = draw_batch(model, seed, trials)
        shifted = cokernel_mod_batch((X + S) % a, a)
        plain = sample_cokernels(model, trials, SeedSpec(32))
        e1 = moments_from_cokernels(shifted, G("2,2"), seed)
        e2 = moments_from_cokernels(plain, G("2,2"), seed)
        assert abs(e1.mean - e2.mean) <= 4 * (e1.stderr**2 + e2.stderr**2) ** 0.5


class TestMomentSumOracle:
    @pytest.mark.parametrize("model,g", [
        (MatrixModel.symmetric(2, 2), "2"),
        (MatrixModel.c_symmetric(ExactMatrix([[0, 1], [1, 0]], 2)), "2"),
        (MatrixModel.iid(2, 2), "2,2"),
        (MatrixModel.symmetric(3, 4), "2,4"),
        (MatrixModel.symmetric_mod_h(2, 2, 4), "4"),
    ])
    def test_sides_agree(self, model, g):
        lhs, rhs = moment_sum_oracle(model, G(g))
        assert lhs == rhs

    def test_lhs_matches_brute_force(self):
        # all 8 symmetric 2 x 2 matrices over Z/2, surjections counted by brute force
        total = Fraction(0)
        for x, y, z in itertools.product(range(2), repeat=3):
            H = cokernel(ExactMatrix([[x, y], [y, z], [2, 0], [0, 2]]).T)
            total += brute_sur(H, G("2"))
        lhs, _ = moment_sum_oracle(MatrixModel.symmetric(2, 2), G("2"))
        assert lhs == total / 8

    def test_non_uniform_entries_still_agree(self):
        model = MatrixModel.symmetric(2, 3, EntryDistribution.parse("uniform_range:0,1"))
        lhs, rhs = moment_sum_oracle(model, G("3"))
        assert lhs == rhs

    def test_errors(self):
        with pytest.raises(ModelError):
            moment_sum_oracle(MatrixModel.iid(2), G("2"))
        with pytest.raises(ValueError):
            moment_sum_oracle(MatrixModel.iid(2, 2), G("4"))
        with pytest.raises(BoundExceededError):
            moment_sum_oracle(MatrixModel.iid(3, 4), G("2"), bound=1000)


class TestDistribution:
    def test_single_trial(self):
        t = empirical_distribution(MatrixModel.symmetric(5, 2), 2, 1, SeedSpec(1))
        assert len(t.rows) == 1 and t.rows[0].freq == 1

    def test_frequencies_sum_to_one(self):
        for trials in (3, 7, 333):
            t = empirical_distribution(MatrixModel.iid(6, 4), 4, trials, SeedSpec(trials))
            assert t.frequency_sum() == 1
            assert sum(r.count for r in t.rows) == trials
            counts = [r.count for r in t.rows]
            assert counts == sorted(counts, reverse=True)

    def test_reference_rows_and_json(self):
        t = empirical_distribution(MatrixModel.symmetric(20, 8), 8, 2000, SeedSpec(2), LimitDistribution.sandpile(2))
        js = t.to_json()
        assert js["reference"] and 0 <= js["total_variation"] <= 1
        assert set(js["rows"][0]) == {"label", "count", "freq", "ref_prob", "abs_diff"}
        top = [r.group for r in t.rows[:3]]
        assert all(c["passed"] for c in compare_classes(t, top))

    def test_reference_needs_prime_power(self):
        with pytest.raises(ValueError):
            empirical_distribution(MatrixModel.symmetric(4, 6), 6, 10, SeedSpec(1), LimitDistribution.sandpile(2))
        t = empirical_distribution(MatrixModel.symmetric(4, 2), 2, 10, SeedSpec(1))
        with pytest.raises(ValueError):
            compare_classes(t, [G("1")])

    def test_unseen_class_counts_zero(self):
        t = empirical_distribution(MatrixModel.symmetric(20, 2), 2, 200, SeedSpec(3), LimitDistribution.sandpile(2))
        (res,) = compare_classes(t, [G("2,2,2,2,2,2,2,2")])
        assert res["count"] == 0


class TestBounds:
    def test_zero_form(self):
        z = ExactMatrix.zeros
        rep = verify_alternating_form_bound(2, 3, 2, z(3, modulus=2), z(2, modulus=2))
        assert rep.estimate == 1 and rep.details["g"] == 3 and rep.passed

    def test_nondegenerate_exact(self):
        # v = 0, or v nonzero and u orthogonal to Cv: 2^-8 + (1 - 2^-8) / 2
        C = standard_alternating(8, 8, 2)
        rep = verify_alternating_form_bound(2, 8, 2, C, ExactMatrix.zeros(2, modulus=2))
        assert rep.details["exact"] == "257/512"
        assert rep.bound == 2.0 ** (2 + 0 + 1 - 8) and rep.passed

    def test_mc(self):
        C = standard_alternating(10, 10, 3)
        rep = verify_alternating_form_bound(3, 10, 3, C, ExactMatrix.zeros(3, modulus=3), "mc", 10**5, SeedSpec(6))
        assert rep.target == pytest.approx(3.0**-3)
        assert rep.passed

    def test_errors(self):
        z = ExactMatrix.zeros
        with pytest.raises(ValueError):
            verify_alternating_form_bound(2, 2, 2, ExactMatrix.identity(2, 2), z(2, modulus=2))
        with pytest.raises(ValueError):
            verify_alternating_form_bound(4, 2, 2, z(2, modulus=4), z(2, modulus=4))
        with pytest.raises(ValueError):
            verify_alternating_form_bound(2, 2, 2, z(2, modulus=2), z(2, modulus=2), mode="guess")
        with pytest.raises(BoundExceededError):
            verify_alternating_form_bound(2, 6, 5, z(6, modulus=2), z(5, modulus=2), bound=1000)

    @pytest.mark.parametrize("a,ell,k", [(2, 1, 5), (3, 2, 6), (2, 3, 4), (5, 2, 3)])
    def test_generation_matches_exact(self, a, ell, k):
        rep = verify_generation_bound(a, ell, k, 40000, SeedSpec(k))
        exact = 1 - float(generation_probability(a, ell, k))
        assert abs(rep.estimate - exact) <= 4 * rep.stderr + 1e-12
        assert rep.passed and rep.bound == 2.0 ** (ell - k)

    def test_generation_composite_modulus(self):
        rep = verify_generation_bound(6, 2, 5, 40000, SeedSpec(2))
        exact = 1 - float(generation_probability(2, 2, 5) * generation_probability(3, 2, 5))
        assert abs(rep.estimate - exact) <= 4 * rep.stderr + 1e-12

    def test_generation_vacuous(self):
        assert verify_generation_bound(2, 3, 3, 100).passed
        assert verify_generation_bound(2, 3, 1, 100).estimate == 1
        with pytest.raises(ValueError):
            verify_generation_bound(2, 1, 0)


class TestDirectional:
    def test_structure_and_determinism(self):
        a = directional_checks(n=10, trials=400, seed=SeedSpec(1))
        b = directional_checks(n=10, trials=400, seed=SeedSpec(1))
        assert [s.name for s in a] == [s.name for s in b]
        assert [s.estimate.mean for s in a] == [s.estimate.mean for s in b]
        assert [s.predicted for s in a] == [1.25, 2.0, 1.0]
        assert a[2].lower is None and a[2].upper is None

    def test_optional_scenario(self):
        out = directional_checks(n=8, trials=50, seed=SeedSpec(2), h2_trials=100)
        assert len(out) == 4 and out[3].lower == 2.0 and out[3].estimate.trials == 100

    def test_gap_trend_exact_values(self):
        rows = isotropy_gap_trend(mc_n=10, trials=1000, seed=SeedSpec(3))
        assert rows[0]["exact"] == "17/32" and rows[1]["exact"] == "257/512"
        assert rows[0]["gap"] > rows[1]["gap"]
