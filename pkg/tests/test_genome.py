import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tvn import (
    Alphabet,
    ConfigError,
    DEFAULT_ALPHABET,
    InvalidGenomeError,
    Suffix,
    compose,
    crossover,
    mutate,
    random_suffix,
)


def suffix_from_word(word: str, alphabet: Alphabet = DEFAULT_ALPHABET) -> Suffix:
    return alphabet.encode_word(word)


class TestAlphabet:
    def test_default_is_62_alnum(self):
        assert DEFAULT_ALPHABET.size == 62
        assert DEFAULT_ALPHABET.char_at(0) == "a"
        assert DEFAULT_ALPHABET.char_at(61) == "9"

    def test_rejects_duplicates_whitespace_and_empty(self):
        with pytest.raises(ConfigError):
            Alphabet("aab")
        with pytest.raises(ConfigError):
            Alphabet("a b")
        with pytest.raises(ConfigError):
            Alphabet("")

    def test_char_at_total_within_range(self):
        alpha = Alphabet("xyz")
        assert [alpha.char_at(i) for i in range(3)] == ["x", "y", "z"]
        with pytest.raises(InvalidGenomeError):
            alpha.char_at(3)


class TestCompose:
    def test_known_rendering(self):
        # Four-character run: the suffix decodes to "3t3T".
        suffix = suffix_from_word("3t3T")
        assert compose("A photo of a cat", suffix, DEFAULT_ALPHABET) == "A photo of a cat 3t3T"

    def test_zero_length_suffix_keeps_rendering_rule(self):
        empty = Suffix(())
        assert compose("x", empty, DEFAULT_ALPHABET) == "x "

    def test_matches_plain_concatenation(self):
        suffix = suffix_from_word("qZ9aB")
        base = "A bird flying in the sky"
        assert compose(base, suffix, DEFAULT_ALPHABET) == base + " " + "qZ9aB"

    def test_length_contract(self):
        suffix = suffix_from_word("abcde")
        base = "hello world"
        assert len(compose(base, suffix, DEFAULT_ALPHABET)) == len(base) + 1 + 5

    def test_out_of_range_gene_rejected(self):
        small = Alphabet("ab")
        with pytest.raises(InvalidGenomeError):
            compose("x", Suffix((0, 5)), small)

    @given(
        st.text(
            alphabet=st.sampled_from(DEFAULT_ALPHABET.chars), min_size=1, max_size=8
        ),
        st.text(
            alphabet=st.sampled_from(DEFAULT_ALPHABET.chars), min_size=1, max_size=8
        ),
    )
    def test_injective_in_suffix_for_fixed_base(self, w1, w2):
        if len(w1) != len(w2):
            return
        s1, s2 = suffix_from_word(w1), suffix_from_word(w2)
        same = compose("base", s1, DEFAULT_ALPHABET) == compose(
            "base", s2, DEFAULT_ALPHABET
        )
        assert same == (s1 == s2)


class TestRandomSuffix:
    def test_same_seed_same_suffix(self):
        a = random_suffix(123, DEFAULT_ALPHABET, 5)
        b = random_suffix(123, DEFAULT_ALPHABET, 5)
        assert a == b

    def test_singleton_alphabet_forces_zero_genes(self):
        s = random_suffix(5, Alphabet("z"), 7)
        assert s.genes == (0,) * 7

    def test_negative_k_rejected_and_zero_needs_opt_in(self):
        with pytest.raises(ConfigError):
            random_suffix(0, DEFAULT_ALPHABET, -1)
        with pytest.raises(ConfigError):
            random_suffix(0, DEFAULT_ALPHABET, 0)
        assert random_suffix(0, DEFAULT_ALPHABET, 0, allow_empty=True) == Suffix(())

    def test_per_position_frequencies_uniform(self):
        # Chi-square statistic per position over 10^4 draws stays within
        # three standard deviations of the chi-square mean (df = 61).
        draws = 10_000
        rng = np.random.default_rng(2024)
        counts = np.zeros((5, 62))
        for _ in range(draws):
            s = random_suffix(rng, DEFAULT_ALPHABET, 5)
            for pos, g in enumerate(s.genes):
                counts[pos, g] += 1
        expected = draws / 62
        df = 61
        for pos in range(5):
            chi2 = float(((counts[pos] - expected) ** 2 / expected).sum())
            assert abs(chi2 - df) <= 3 * (2 * df) ** 0.5, f"position {pos}: {chi2}"


class TestCrossover:
    def test_equal_parents_give_equal_children(self):
        s = suffix_from_word("abcde")
        rng = np.random.default_rng(0)
        c1, c2 = crossover(s, s, rng)
        assert c1 == s and c2 == s

    def test_children_closed_over_parent_genes(self):
        a = suffix_from_word("AAAAA")
        b = suffix_from_word("BBBBB")
        rng = np.random.default_rng(7)
        c1, c2 = crossover(a, b, rng)
        allowed = {a.genes[0], b.genes[0]}
        for child in (c1, c2):
            assert set(child.genes) <= allowed

    def test_replayable_with_recorded_seed(self):
        a, b = suffix_from_word("abcde"), suffix_from_word("vwxyz")
        first = crossover(a, b, np.random.default_rng(99))
        second = crossover(a, b, np.random.default_rng(99))
        assert first == second

    def test_positionwise_gene_conservation(self):
        a, b = suffix_from_word("abcde"), suffix_from_word("vwxyz")
        c1, c2 = crossover(a, b, np.random.default_rng(3))
        for pos in range(5):
            assert {c1.genes[pos], c2.genes[pos]} == {a.genes[pos], b.genes[pos]}

    def test_length_mismatch_rejected(self):
        with pytest.raises(InvalidGenomeError):
            crossover(
                suffix_from_word("ab"), suffix_from_word("abc"), np.random.default_rng(0)
            )


class TestMutate:
    def test_rate_zero_is_identity(self):
        s = suffix_from_word("abcde")
        assert mutate(s, 0.0, np.random.default_rng(1), DEFAULT_ALPHABET) == s

    def test_rate_one_singleton_alphabet_is_identity(self):
        alpha = Alphabet("q")
        s = Suffix((0, 0, 0))
        assert mutate(s, 1.0, np.random.default_rng(1), alpha) == s

    def test_rate_outside_unit_interval_rejected(self):
        s = suffix_from_word("abc")
        for bad in (-0.1, 1.1):
            with pytest.raises(ConfigError):
                mutate(s, bad, np.random.default_rng(0), DEFAULT_ALPHABET)

    def test_mean_changed_positions_matches_binomial_band(self):
        # Resampling hits 0.3 * 5 = 1.5 positions per call; an observed
        # change requires the redraw to differ (61/62), so the observable
        # mean sits at 1.476. Assert the 1.5-centered three-sigma band.
        trials = 10_000
        rng = np.random.default_rng(77)
        s = suffix_from_word("abcde")
        changed = 0
        for _ in range(trials):
            m = mutate(s, 0.3, rng, DEFAULT_ALPHABET)
            changed += sum(x != y for x, y in zip(m.genes, s.genes))
        mean = changed / trials
        p_change = 0.3 * 61 / 62
        sigma = (5 * p_change * (1 - p_change) / trials) ** 0.5
        assert abs(mean - 5 * p_change) <= 3 * sigma
        assert abs(mean - 1.5) < 0.06  # redraws repeating a char shave ~0.024

    @given(
        st.tuples(*[st.integers(0, 61)] * 5),
        st.floats(0, 1),
        st.integers(0, 2**31 - 1),
    )
    @settings(max_examples=200)
    def test_never_changes_length_or_escapes_alphabet(self, genes, rate, seed):
        s = Suffix(tuple(genes))
        out = mutate(s, rate, np.random.default_rng(seed), DEFAULT_ALPHABET)
        assert len(out) == len(s)
        assert all(0 <= g < 62 for g in out.genes)
