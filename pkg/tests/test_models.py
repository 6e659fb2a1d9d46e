from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from csym.errors import ModelError
from csym.linalg import ExactMatrix, is_alternating
from csym.models import (
    RANDOMIZED,
    EntryDistribution,
    MatrixModel,
    check_balanced,
    corner_form,
    derive_form,
    draw_batch,
    sample,
    standard_alternating,
)
from csym.rng import SeedSpec, splitmix64, words_mod, words_to_unit

# upper chi-square quantiles at significance 1e-3
CHI2_999 = {1: 10.828, 3: 16.266, 15: 37.697}


def chi_square(counts, expected):
    counts = np.asarray(counts, dtype=float)
    expected = np.asarray(expected, dtype=float)
    return float(((counts - expected) ** 2 / expected).sum())


class TestRng:
    def test_splitmix_reference_value(self):
        # first output of the reference generator seeded with 0
        assert splitmix64(0) == 0xE220A8397B1DCDAF

    def test_reproducible(self):
        s = SeedSpec(12345, 7)
        assert np.array_equal(s.bits(5, 6, 1), SeedSpec(12345, 7).bits(5, 6, 1))

    def test_streams_and_channels_differ(self):
        s = SeedSpec(1)
        assert not np.array_equal(s.bits(4, 4), s.child(1).bits(4, 4))
        assert not np.array_equal(s.bits(4, 4, 0), s.bits(4, 4, 1))

    def test_position_independent_of_shape(self):
        s = SeedSpec(9)
        assert np.array_equal(s.bits(6, 5)[:3], s.bits(3, 5))

    @given(st.integers(0, 2**64 - 1), st.integers(0, 10**6), st.integers(1, 5), st.integers(1, 5), st.integers(0, 3))
    @settings(max_examples=50)
    def test_stream_bits_match_children(self, base, start, rows, cols, channel):
        s = SeedSpec(base, start)
        block = s.stream_bits(4, rows, cols, channel)
        for t in range(4):
            assert np.array_equal(block[t], s.child(start + t).bits(rows, cols, channel))

    def test_negative_stream_rejected(self):
        with pytest.raises(ValueError):
            SeedSpec(0, -1)

    def test_word_maps(self):
        w = SeedSpec(3).uniform_bits(200000)
        u = words_to_unit(w)
        assert 0 <= u.min() and u.max() < 1
        assert abs(u.mean() - 0.5) < 0.005
        counts = np.bincount(words_mod(w, 4), minlength=4)
        assert chi_square(counts, [50000] * 4) < CHI2_999[3]


class TestDistributions:
    def test_parse(self):
        assert EntryDistribution.parse("two_point:0,1,0.5") == EntryDistribution.two_point(0, 1, Fraction(1, 2))
        assert EntryDistribution.parse("uniform_mod:4") == EntryDistribution.uniform_mod(4)
        assert EntryDistribution.parse("uniform", 6) == EntryDistribution.uniform_mod(6)
        assert EntryDistribution.parse("uniform_range:-1,1").support() == {-1: Fraction(1, 3), 0: Fraction(1, 3), 1: Fraction(1, 3)}
        with pytest.raises(ModelError):
            EntryDistribution.parse("gaussian")

    def test_balanced_examples(self):
        assert check_balanced(EntryDistribution.two_point(0, 1, Fraction(1, 2))) == Fraction(1, 2)
        assert check_balanced(EntryDistribution.two_point(0, 0, Fraction(1, 2))) is None
        assert check_balanced(EntryDistribution.uniform_mod(4), 4) == Fraction(1, 2)
        assert check_balanced(EntryDistribution.uniform_mod(6), 6) == Fraction(1, 2)
        assert check_balanced(EntryDistribution.two_point(0, 1, Fraction(1, 5))) == Fraction(1, 5)
        # 0 and 2 agree mod 2
        assert check_balanced(EntryDistribution.two_point(0, 2, Fraction(1, 2)), 4) is None

    def test_unbalanced_model_rejected(self):
        with pytest.raises(ModelError):
            MatrixModel.symmetric(3, 4, EntryDistribution.two_point(1, 1, Fraction(1, 3)))

    def test_two_point_frequency(self):
        d = EntryDistribution.two_point(0, 1, Fraction(1, 4))
        x = d.draw(SeedSpec(5).uniform_bits(100000))
        assert chi_square(np.bincount(x, minlength=2), [75000, 25000]) < CHI2_999[1]


class TestModelValidation:
    def test_c_symmetric_requires_alternating(self):
        with pytest.raises(ModelError):
            MatrixModel.c_symmetric(ExactMatrix([[0, 1], [1, 0]], 4))
        with pytest.raises(ModelError):
            MatrixModel("c_symmetric", 2, 4, EntryDistribution.uniform_mod(4), C=ExactMatrix([[0, 1], [3, 0]], 2))

    def test_corner_positions(self):
        with pytest.raises(ModelError):
            MatrixModel.corner_perturbed(4, [(0, 1), (1, 2)], modulus=4)
        with pytest.raises(ModelError):
            MatrixModel.corner_perturbed(4, [(0, 1)], [2], modulus=4)
        with pytest.raises(ModelError):
            MatrixModel.corner_perturbed(4, [(2, 2)], modulus=4)
        with pytest.raises(ModelError):
            MatrixModel.corner_perturbed(4, [(0, 9)], modulus=4)

    def test_symmetric_mod_h_divides(self):
        with pytest.raises(ModelError):
            MatrixModel.symmetric_mod_h(3, 3, 4)

    def test_unknown_kind(self):
        with pytest.raises(ModelError):
            MatrixModel("banded", 3)


class TestSampling:
    seeds = st.integers(0, 2**63)

    @given(seeds)
    @settings(max_examples=30)
    def test_zero_form_gives_symmetric(self, s):
        X = sample(MatrixModel.c_symmetric(ExactMatrix.zeros(5, modulus=4)), SeedSpec(s))
        assert X == X.T

    @given(seeds, st.integers(2, 6))
    @settings(max_examples=30)
    def test_c_symmetric_identity(self, s, a):
        C = standard_alternating(6, 4, a)
        X = sample(MatrixModel.c_symmetric(C), SeedSpec(s))
        assert X - X.T == C

    @given(seeds)
    @settings(max_examples=30)
    def test_integer_c_symmetric(self, s):
        C = corner_form(4, [(0, 3)], [-1])
        X = sample(MatrixModel.c_symmetric(C), SeedSpec(s))
        assert X - X.T == C

    @given(seeds)
    @settings(max_examples=30)
    def test_corner_perturbed_pattern(self, s):
        model = MatrixModel.corner_perturbed(6, [(0, 1), (2, 5), (4, 3)], [1, 3, 5], modulus=8)
        X = sample(model, SeedSpec(s))
        D = (X - X.T).tolist()
        nz = {(i, j): v for i, r in enumerate(D) for j, v in enumerate(r) if v}
        assert nz == {(0, 1): 1, (1, 0): 7, (2, 5): 3, (5, 2): 5, (4, 3): 5, (3, 4): 3}

    @given(seeds, st.sampled_from([(2, 4), (2, 8), (4, 8), (3, 9)]))
    @settings(max_examples=30)
    def test_symmetric_mod_h(self, s, ha):
        h, a = ha
        X = sample(MatrixModel.symmetric_mod_h(6, h, a), SeedSpec(s))
        assert all(v % h == 0 for r in (X - X.T).tolist() for v in r)

    @given(seeds)
    @settings(max_examples=30)
    def test_alternating_uniform_is_alternating(self, s):
        X = sample(MatrixModel.alternating_uniform(5, 6), SeedSpec(s))
        assert is_alternating(X)

    @given(seeds)
    @settings(max_examples=30)
    def test_random_corner_form(self, s):
        X = sample(MatrixModel.random_corner(6, 3, 5), SeedSpec(s))
        D = X - X.T
        assert is_alternating(D)
        assert all(D[i, j] == 0 for i in range(6) for j in range(6) if max(i, j) >= 3)

    def test_iid_shape(self):
        X = sample(MatrixModel.iid(3, 5, m=7), SeedSpec(1))
        assert X.shape == (3, 7)

    def test_integer_default_is_fair_bit(self):
        X = draw_batch(MatrixModel.iid(4), SeedSpec(2), 500)
        assert set(np.unique(X)) == {0, 1}

    def test_reproducible_and_batch_consistent(self):
        model = MatrixModel.symmetric(7, 9)
        seed = SeedSpec(42, 10)
        batch = draw_batch(model, seed, 5)
        for t in range(5):
            assert np.array_equal(batch[t], draw_batch(model, seed.child(10 + t), 1)[0])
        assert sample(model, seed) == sample(model, SeedSpec(42, 10))

    def test_c_symmetric_marginals_and_independence(self):
        model = MatrixModel.c_symmetric(standard_alternating(4, 4, 2), EntryDistribution.two_point(0, 1, Fraction(1, 2)))
        X = draw_batch(model, SeedSpec(77), 10**5)
        for i, j in [(0, 0), (0, 1), (1, 3), (2, 3)]:
            ones = int(X[:, i, j].sum())
            assert chi_square([10**5 - ones, ones], [5 * 10**4] * 2) < CHI2_999[1]
        # joint law of two upper entries is the product law
        pair = X[:, 0, 1] * 2 + X[:, 2, 3]
        assert chi_square(np.bincount(pair, minlength=4), [25000] * 4) < CHI2_999[3]
        # and of a diagonal entry with an off-diagonal one
        pair = X[:, 1, 1] * 2 + X[:, 0, 2]
        assert chi_square(np.bincount(pair, minlength=4), [25000] * 4) < CHI2_999[3]

    def test_translation_to_symmetric(self):
        # X - M0 for a fixed C-symmetric M0 has the symmetric law
        a, n, trials = 4, 3, 10**5
        C = standard_alternating(n, 2, a)
        M0 = np.tril(np.array(C.entries), -1)
        assert ExactMatrix(M0 - M0.T, a) == C
        shifted = (draw_batch(MatrixModel.c_symmetric(C), SeedSpec(3), trials) - M0) % a
        sym = draw_batch(MatrixModel.symmetric(n, a), SeedSpec(4), trials)
        assert np.array_equal(shifted, shifted.transpose(0, 2, 1))
        for i in range(n):
            for j in range(i, n):
                c1 = np.bincount(shifted[:, i, j], minlength=a)
                c2 = np.bincount(sym[:, i, j], minlength=a)
                # two-sample homogeneity test on a 2 x a table
                tot = c1 + c2
                exp = tot / 2
                stat = chi_square(c1, exp) + chi_square(c2, exp)
                assert stat < CHI2_999[3]


class TestDeriveForm:
    def test_examples(self):
        assert derive_form(MatrixModel.symmetric(3, 4)) == ExactMatrix.zeros(3, modulus=4)
        C = standard_alternating(4, 2, 3)
        assert derive_form(MatrixModel.c_symmetric(C)) == C
        got = derive_form(MatrixModel.corner_perturbed(3, [(0, 1)], [1]))
        assert got == ExactMatrix([[0, 1, 0], [-1, 0, 0], [0, 0, 0]])
        assert derive_form(MatrixModel.symmetric_mod_h(3, 2, 4)) == RANDOMIZED
        assert derive_form(MatrixModel.random_corner(3, 2, 4)) == RANDOMIZED
        with pytest.raises(ModelError):
            derive_form(MatrixModel.iid(3))

    @given(st.integers(1, 6), st.sampled_from([0, 2, 3, 4, 5, 8]), st.data())
    def test_derived_form_is_alternating(self, n, a, data):
        k = data.draw(st.integers(0, n // 2))
        perm = data.draw(st.permutations(range(n)))
        positions = [(perm[2 * t], perm[2 * t + 1]) for t in range(k)]
        units = [1] * k if not a else [data.draw(st.sampled_from([u for u in range(1, a) if np.gcd(u, a) == 1])) for _ in range(k)]
        model = MatrixModel.corner_perturbed(n, positions, units, a)
        assert is_alternating(derive_form(model))
