import math

import pytest

from condmode import to_autoregressive, uniform_mixture
from condmode.oracle import EnumerationTooLarge, brute_force_mode, enumerate_complete
from condmode.synthetic import ExplicitDistribution, LengthFamilyModel

from test_exact import CLEAN, NOISE


def test_two_way_tie_in_lexicographic_order():
    m = to_autoregressive(ExplicitDistribution.from_strings({"a b": 0.5, "a": 0.5}))
    rows = enumerate_complete(m)
    assert [m.vocab.decode(s) for s, _ in rows] == [["a"], ["a", "b"]]
    assert rows[0][1] == rows[1][1] == pytest.approx(math.log(0.5))


def test_tie_mixture_top_thirty():
    m = to_autoregressive(uniform_mixture(CLEAN, NOISE, "1/3"))
    rows = enumerate_complete(m)
    assert len(rows) == 30
    for _, lp in rows:
        assert math.exp(lp) == pytest.approx(1 / 30, abs=1e-12)
    assert sum(math.exp(lp) for _, lp in rows) == pytest.approx(1.0, abs=1e-9)


def test_length_filter_and_prompt():
    m = to_autoregressive(ExplicitDistribution.from_strings({"a b": 0.25, "a c": 0.5, "b": 0.25}))
    best, argmax = brute_force_mode(m, length=1)
    assert argmax == [m.vocab.encode(["b"])]
    assert best == pytest.approx(math.log(0.25))
    rows = enumerate_complete(m, prompt=m.vocab.encode(["a"]))
    assert [m.vocab.decode(s) for s, _ in rows] == [["c"], ["b"]]
    assert brute_force_mode(m, length=4) == (-math.inf, [])


def test_enumeration_bound():
    m = LengthFamilyModel(0.1, 9, 8)
    with pytest.raises(EnumerationTooLarge):
        enumerate_complete(m)
