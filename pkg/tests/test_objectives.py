import numpy as np
import pytest

from tvn import (
    ConfigError,
    DEFAULT_ALPHABET,
    ObjectiveContext,
    Suffix,
    build_zoo,
    cosine,
    eval_f1,
    eval_f2,
    eval_f3,
    eval_vector,
    eval_vectors,
    random_suffix,
)
from tvn.encoders import normalize
from tvn.nsga2 import dominates


class FakeEncoder:
    """Returns pre-registered vectors; any unseen text gets a hash vector."""

    def __init__(self, name, table, dim=8):
        self.name = name
        self.dim = dim
        self.table = {k: normalize(np.asarray(v, dtype=float)) for k, v in table.items()}

    def encode(self, texts):
        rows = []
        for t in texts:
            if t in self.table:
                rows.append(self.table[t])
            else:
                rng = np.random.default_rng(abs(hash((self.name, t))) % 2**32)
                rows.append(normalize(rng.normal(size=self.dim)))
        return np.vstack(rows)

    def encode_one(self, text):
        return self.encode([text])[0]


def _vec_with_cosine(base, c):
    """Unit vector at exactly cosine c from the unit vector ``base``."""
    base = normalize(np.asarray(base, dtype=float))
    ortho = np.zeros_like(base)
    ortho[1] = 1.0
    ortho = normalize(ortho - np.dot(ortho, base) * base)
    return c * base + (1 - c * c) ** 0.5 * ortho


BASE = "A photo of a cat."
PERTURBED = BASE + " abcde"
SUFFIX = DEFAULT_ALPHABET.encode_word("abcde")


def _fixed_ctx(c_target=0.4, c_subs=(0.9, 0.7), c_ref=0.85):
    e0 = np.zeros(8)
    e0[0] = 1.0
    target = FakeEncoder("t", {BASE: e0, PERTURBED: _vec_with_cosine(e0, c_target)})
    subs = [
        FakeEncoder(f"s{i}", {BASE: e0, PERTURBED: _vec_with_cosine(e0, c)})
        for i, c in enumerate(c_subs)
    ]
    ref = FakeEncoder("r", {BASE: e0, PERTURBED: _vec_with_cosine(e0, c_ref)})
    return ObjectiveContext(BASE, target, subs, ref)


class TestContextValidation:
    def test_target_cannot_be_substitute(self):
        e = FakeEncoder("x", {})
        with pytest.raises(ConfigError):
            ObjectiveContext(BASE, e, [e], FakeEncoder("r", {}))

    def test_substitutes_required(self):
        with pytest.raises(ConfigError):
            ObjectiveContext(BASE, FakeEncoder("t", {}), [], FakeEncoder("r", {}))

    def test_reference_coinciding_with_substitute_is_flagged(self):
        t = FakeEncoder("t", {})
        s = FakeEncoder("s", {})
        ctx = ObjectiveContext(BASE, t, [s], s)
        assert ctx.reference_is_substitute

    def test_base_encodings_cover_exactly_the_lineup(self):
        ctx = _fixed_ctx()
        assert set(ctx.base_encodings) == {"t", "s0", "s1", "r"}


class TestObjectiveValues:
    def test_exact_target_cosine(self):
        ctx = _fixed_ctx(c_target=0.4)
        assert eval_f1(ctx, SUFFIX) == pytest.approx(0.4, abs=1e-12)

    def test_f2_is_mean_of_substitute_cosines(self):
        ctx = _fixed_ctx(c_subs=(0.9, 0.7))
        assert eval_f2(ctx, SUFFIX) == pytest.approx(0.8, abs=1e-12)
        # Recompute each substitute cosine independently.
        independent = [
            cosine(enc.encode_one(PERTURBED), enc.encode_one(BASE))
            for enc in ctx.substitutes
        ]
        assert eval_f2(ctx, SUFFIX) == pytest.approx(
            sum(independent) / 2, abs=1e-12
        )

    def test_f2_single_substitute_equals_that_cosine(self):
        ctx = _fixed_ctx(c_subs=(0.66,))
        assert eval_f2(ctx, SUFFIX) == pytest.approx(0.66, abs=1e-12)

    def test_f2_min_mode(self):
        ctx = _fixed_ctx(c_subs=(0.9, 0.7))
        ctx_min = ObjectiveContext(
            BASE, ctx.target, ctx.substitutes, ctx.reference, f2_mode="min"
        )
        assert eval_f2(ctx_min, SUFFIX) == pytest.approx(0.7, abs=1e-12)

    def test_f3_matches_standalone_recomputation(self):
        zoo = build_zoo(seed=23)
        ctx = ObjectiveContext(
            BASE,
            zoo.closed[0].encoder,
            [m.encoder for m in zoo.closed[1:]],
            zoo.reference,
        )
        s = random_suffix(5, DEFAULT_ALPHABET, 5)
        manual = cosine(
            zoo.reference.encode_one(ctx.render(s)),
            zoo.reference.encode_one(BASE),
        )
        assert eval_f3(ctx, s) == pytest.approx(manual, abs=1e-12)

    def test_reference_equal_to_target_makes_f3_equal_f1(self):
        zoo = build_zoo(seed=23)
        target = zoo.closed[0].encoder
        ctx = ObjectiveContext(
            BASE, target, [m.encoder for m in zoo.closed[1:]], target
        )
        for seed in range(10):
            s = random_suffix(seed, DEFAULT_ALPHABET, 5)
            assert eval_f3(ctx, s) == pytest.approx(eval_f1(ctx, s), abs=1e-12)


class TestVector:
    def test_zero_length_suffix_gives_unit_objectives(self):
        # Degenerate K=0: the rendered prompt only gains a trailing space,
        # which the word-based encoders ignore, so every cosine is exact 1.
        zoo = build_zoo(seed=23)
        ctx = ObjectiveContext(
            BASE,
            zoo.closed[0].encoder,
            [m.encoder for m in zoo.closed[1:]],
            zoo.reference,
        )
        vec = eval_vector(ctx, Suffix(()))
        expected = (1.0, -1.0, -1.0)
        for got, want in zip(vec.as_tuple(), expected):
            assert got == pytest.approx(want, abs=1e-12)

    def test_componentwise_consistency_on_random_suffixes(self):
        zoo = build_zoo(seed=23)
        ctx = ObjectiveContext(
            BASE,
            zoo.closed[0].encoder,
            [m.encoder for m in zoo.closed[1:]],
            zoo.reference,
        )
        rng = np.random.default_rng(5)
        suffixes = [random_suffix(rng, DEFAULT_ALPHABET, 5) for _ in range(100)]
        vecs = eval_vectors(ctx, suffixes)
        for s, v in zip(suffixes, vecs):
            assert v.f1 == pytest.approx(eval_f1(ctx, s), abs=1e-12)
            assert v.f2 == pytest.approx(eval_f2(ctx, s), abs=1e-12)
            assert v.f3 == pytest.approx(eval_f3(ctx, s), abs=1e-12)
            assert v.as_tuple() == (v.f1, -v.f2, -v.f3)

    def test_dominance_matches_componentwise_improvement(self):
        better = _fixed_ctx(c_target=0.2, c_subs=(0.95, 0.95), c_ref=0.95)
        worse = _fixed_ctx(c_target=0.5, c_subs=(0.8, 0.8), c_ref=0.9)
        vb = eval_vector(better, SUFFIX)
        vw = eval_vector(worse, SUFFIX)
        assert dominates(vb, vw)
        assert not dominates(vw, vb)

    def test_purity_and_cache_transparency(self):
        zoo = build_zoo(seed=23)
        args = (
            BASE,
            zoo.closed[0].encoder,
            [m.encoder for m in zoo.closed[1:]],
            zoo.reference,
        )
        ctx1 = ObjectiveContext(*args)
        ctx2 = ObjectiveContext(*args)  # fresh base-encoding cache
        s = random_suffix(17, DEFAULT_ALPHABET, 5)
        assert eval_vector(ctx1, s) == eval_vector(ctx1, s)
        assert eval_vector(ctx1, s) == eval_vector(ctx2, s)

    def test_objective_ranges(self):
        zoo = build_zoo(seed=23)
        ctx = ObjectiveContext(
            BASE,
            zoo.closed[0].encoder,
            [m.encoder for m in zoo.closed[1:]],
            zoo.reference,
        )
        rng = np.random.default_rng(11)
        for v in eval_vectors(
            ctx, [random_suffix(rng, DEFAULT_ALPHABET, 5) for _ in range(50)]
        ):
            for g in v.as_tuple():
                assert -1.0 <= g <= 1.0
