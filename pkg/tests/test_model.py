import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from condmode import (EOS, EOS_ID, ModelState, NgramLM, Vocab, model_from_json, model_to_json,
                      sample, sequence_log_prob, to_autoregressive, uniform, uniform_mixture)
from condmode.errors import InvalidToken, ModelFormatError
from condmode.synthetic import ExplicitDistribution, LengthFamilyModel

from helpers import TableModel, random_distribution, total_complete_mass


class TestVocab:
    def test_eos_first(self):
        v = Vocab.from_tokens(["b", "a", "b"])
        assert v.tokens == (EOS, "a", "b")
        assert v.eos_id == EOS_ID == 0

    def test_rejects_bad_vocabularies(self):
        with pytest.raises(ValueError):
            Vocab(("a", EOS))
        with pytest.raises(ValueError):
            Vocab((EOS, "a", "a"))

    def test_encode_decode(self):
        v = Vocab.from_tokens(["x", "y"])
        ids = v.encode(["y", "x"])
        assert ids == (2, 1)
        assert v.decode(ids) == ["y", "x"]
        assert v.render(ids) == "y x </s>"
        assert v.render((), complete=True) == "</s>"

    def test_unknown_token(self):
        with pytest.raises(InvalidToken):
            Vocab.from_tokens(["x"]).index("zzz")

    def test_eos_not_allowed_inside_sequences(self):
        with pytest.raises(InvalidToken):
            Vocab.from_tokens(["x"]).encode([EOS])


def test_model_state_size():
    s = ModelState((), 16).extend(1).extend(2)
    assert len(s) == 2
    assert s.size_bytes == 32


class TestSequenceLogProb:
    def test_single_eos_factor(self):
        m = TableModel(("</s>", "a"), lambda p: [0.5, 0.5] if not p else [1.0, 0.0], 3)
        assert sequence_log_prob(m, ()) == pytest.approx(math.log(0.5), abs=1e-15)

    def test_uniform_clean_set(self):
        words = [f"w{i}" for i in range(20)]
        m = to_autoregressive(uniform([[w, "end"] for w in words]))
        for w in words:
            seq = m.vocab.encode([w, "end"])
            assert sequence_log_prob(m, seq) == pytest.approx(math.log(1 / 20), abs=1e-12)

    def test_bigram_hand_count(self):
        m = NgramLM(order=2, alpha=0.0).fit([["a", "b"], ["a", "b"], ["a", "c"]])
        seq = m.vocab.encode(["a", "b"])
        # P(a|<s>) = 1, P(b|a) = 2/3, P(</s>|b) = 1
        expected = math.log(1.0) + math.log(2 / 3) + math.log(1.0)
        assert sequence_log_prob(m, seq) == pytest.approx(expected, abs=1e-12)

    def test_zero_factor_is_minus_inf(self):
        m = to_autoregressive(uniform([["a"]]))
        assert sequence_log_prob(m, ()) == -math.inf

    def test_incomplete_skips_eos_factor(self):
        m = to_autoregressive(ExplicitDistribution.from_strings({"a": "1/2", "a b": "1/2"}))
        a = m.vocab.encode(["a"])
        assert sequence_log_prob(m, a, complete=False) == pytest.approx(0.0, abs=1e-15)
        assert sequence_log_prob(m, a) == pytest.approx(math.log(0.5), abs=1e-15)

    def test_invalid_token(self):
        m = to_autoregressive(uniform([["a"]]))
        with pytest.raises(InvalidToken):
            sequence_log_prob(m, (7,))


class TestSample:
    def test_point_mass_model(self):
        m = to_autoregressive(uniform([["only", "one"]]))
        for seed in range(5):
            h = sample(m, seed=seed)
            assert h.complete
            assert m.vocab.decode(h.seq) == ["only", "one"]
            assert h.logprob == 0.0

    def test_deterministic_for_seed(self):
        m = to_autoregressive(random_distribution(3))
        assert [sample(m, 11) for _ in range(3)] == [sample(m, 11)] * 3

    def test_truncation_marks_incomplete(self):
        m = TableModel(("</s>", "a"), lambda p: [0.0, 1.0], None)
        h = sample(m, seed=0, max_len=4)
        assert not h.complete and len(h.seq) == 4
        assert h.logprob == pytest.approx(0.0)

    def test_max_len_must_be_positive(self):
        m = to_autoregressive(uniform([["a"]]))
        with pytest.raises(ValueError):
            sample(m, max_len=0)

    def test_mixture_noise_frequency(self):
        clean = [[f"c{i}", "x"] for i in range(20)]
        noise = [[f"n{i}"] for i in range(10)]
        m = to_autoregressive(uniform_mixture(clean, noise, "1/10"))
        rng = np.random.default_rng(0)
        counts = {}
        n = 100_000
        for _ in range(n):
            h = sample(m, rng)
            counts[h.seq] = counts.get(h.seq, 0) + 1
        for toks in noise:
            freq = counts.get(m.vocab.encode(toks), 0) / n
            assert abs(freq - 0.01) <= 0.002


class TestSerialization:
    def test_explicit_round_trip_is_bit_exact(self):
        m = to_autoregressive(random_distribution(5))
        text = model_to_json(m)
        m2 = model_from_json(text)
        assert model_to_json(m2) == text
        for seq, p in m.distribution:
            assert sequence_log_prob(m2, seq) == sequence_log_prob(m, seq)

    def test_ngram_round_trip_is_bit_exact(self):
        m = NgramLM(order=3, alpha=0.5, max_len=7).fit([["a", "b", "c"], ["b", "a"], []])
        text = model_to_json(m)
        assert model_to_json(model_from_json(text)) == text

    def test_length_family_round_trip(self):
        m = LengthFamilyModel(0.25, 3, 4)
        m2 = model_from_json(model_to_json(m))
        assert (m2.q, m2.b, m2.length) == (0.25, 3, 4)

    @pytest.mark.parametrize("text", ["{", "[]", '{"kind": "nope", "vocab": ["</s>"], "params": {}}',
                                      '{"kind": "explicit", "vocab": ["</s>", "a"], "params": {}}'])
    def test_bad_json(self, text):
        with pytest.raises(ModelFormatError):
            model_from_json(text)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_normalization_and_replay(seed):
    """Every reachable next-token vector sums to one, and replaying a prefix
    from scratch gives the same vector as stepping incrementally."""
    m = to_autoregressive(random_distribution(seed))
    rng = np.random.default_rng(seed)
    state, prefix = m.initial_state(), []
    while True:
        lp = m.log_probs(state)
        assert np.exp(lp).sum() == pytest.approx(1.0, abs=1e-9)
        replay = m.prompt_state(prefix)
        np.testing.assert_allclose(m.log_probs(replay), lp, atol=1e-12)
        tok = int(rng.choice(len(lp), p=np.exp(lp) / np.exp(lp).sum()))
        if tok == EOS_ID:
            break
        prefix.append(tok)
        state = m.step(state, tok)


@pytest.mark.parametrize("seed", range(10))
def test_complete_mass_sums_to_one(seed):
    m = to_autoregressive(random_distribution(seed))
    assert total_complete_mass(m, m.max_len) == pytest.approx(1.0, abs=1e-9)


def test_log_probs_are_read_only():
    m = to_autoregressive(random_distribution(1))
    with pytest.raises(ValueError):
        m.log_probs(m.initial_state())[0] = 0.0
