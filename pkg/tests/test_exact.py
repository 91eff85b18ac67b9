import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from condmode import (SearchBudget, empty_mode_report, global_mode, length_conditional_mode,
                      length_family, to_autoregressive, uniform_mixture)
from condmode.errors import BudgetExceeded, NoFeasibleSequence
from condmode.exact import EmptyModeRow, report_to_csv
from condmode.oracle import brute_force_mode
from condmode.synthetic import ExplicitDistribution

from helpers import (TableModel, binary_tree_model, chain_model, nodes_with_two_expanded_children,
                     random_distribution)

CLEAN = [[s, v, o] for s in ("cat", "kitten") for v in ("chased", "caught")
         for o in ("mice", "rats", "birds", "moths", "flies")]
NOISE = [[], ["cat"], ["chased"], ["mice"], ["cat", "cat"], ["cat", "chased"],
         ["chased", "mice"], ["cat", "cat", "cat"], ["chased", "chased"], ["mice", "mice", "mice"]]


def explicit(entries):
    return to_autoregressive(ExplicitDistribution.from_strings(entries))


class TestGlobalMode:
    def test_dominant_eos(self):
        m = TableModel(("</s>", "a", "b"),
                       lambda p: [0.6, 0.2, 0.2] if not p else [1.0, 0.0, 0.0], 2)
        res = global_mode(m)
        assert res.best.seq == ()
        assert res.logprob == pytest.approx(math.log(0.6))
        assert res.exhausted

    def test_ties_are_all_reported_in_lexicographic_order(self):
        m = explicit({"a": "1/2", "a b": "1/2"})
        res = global_mode(m)
        assert [m.vocab.decode(h.seq) for h in res.argmax] == [["a"], ["a", "b"]]
        assert all(h.complete for h in res.argmax)

    def test_tie_cap(self):
        m = to_autoregressive(uniform_mixture(CLEAN, NOISE, "1/3"))
        assert len(global_mode(m).argmax) == 16
        full = global_mode(m, max_ties=64)
        assert len(full.argmax) == 30
        assert full.logprob == pytest.approx(math.log(1 / 30), abs=1e-12)

    @pytest.mark.parametrize("eps,noisy", [("3/10", False), ("9/25", True)])
    def test_mixture_mode_side(self, eps, noisy):
        m = to_autoregressive(uniform_mixture(CLEAN, NOISE, eps))
        res = global_mode(m, max_ties=64)
        noise = {m.vocab.encode(s) for s in NOISE}
        assert all((h.seq in noise) == noisy for h in res.argmax)
        assert len(res.argmax) == (10 if noisy else 20)

    def test_budget_returns_partial(self):
        m = binary_tree_model(10)
        res = global_mode(m, SearchBudget(max_nodes=5))
        assert not res.exhausted
        assert res.stats.nodes_expanded == 5
        with pytest.raises(BudgetExceeded) as info:
            global_mode(m, SearchBudget(max_nodes=5), strict=True)
        assert info.value.result.stats.nodes_expanded == 5

    def test_depth_limit_marks_truncation(self):
        m = TableModel(("</s>", "a"), lambda p: [0.1, 0.9], None)
        with pytest.raises(ValueError):
            global_mode(m)
        res = global_mode(m, SearchBudget(max_depth=3))
        assert not res.exhausted
        assert res.best.seq == ()

    def test_prompt(self):
        m = explicit({"a b": "1/4", "a c": "1/2", "b": "1/4"})
        res = global_mode(m, prompt=m.vocab.encode(["a"]))
        assert m.vocab.decode(res.best.seq) == ["c"]
        assert res.logprob == pytest.approx(math.log(2 / 3))

    def test_invalid_budget(self):
        with pytest.raises(ValueError):
            SearchBudget(max_nodes=0)
        with pytest.raises(ValueError):
            global_mode(explicit({"a": 1}), max_ties=0)


@pytest.mark.parametrize("seed", range(50))
def test_matches_enumeration(seed):
    m = to_autoregressive(random_distribution(seed))
    best, argmax = brute_force_mode(m)
    pruned = global_mode(m, max_ties=64)
    full = global_mode(m, prune=False, max_ties=64)
    assert pruned.exhausted and full.exhausted
    assert [h.seq for h in pruned.argmax] == argmax
    assert abs(pruned.logprob - best) <= 1e-12
    assert [h.seq for h in full.argmax] == argmax
    assert pruned.stats.nodes_expanded <= full.stats.nodes_expanded


@pytest.mark.parametrize("seed", range(50))
def test_length_conditional_matches_enumeration(seed):
    m = to_autoregressive(random_distribution(seed))
    top = global_mode(m, max_ties=64).logprob
    for L in range(6):
        best, argmax = brute_force_mode(m, length=L)
        if not argmax:
            with pytest.raises(NoFeasibleSequence):
                length_conditional_mode(m, L, max_ties=64)
            continue
        res = length_conditional_mode(m, L, max_ties=64)
        assert [h.seq for h in res.argmax] == argmax
        assert abs(res.logprob - best) <= 1e-12
        assert res.logprob <= top + 1e-12


class TestLengthConditional:
    def test_zero_length(self):
        m = explicit({"": "1/5", "a": "4/5"})
        res = length_conditional_mode(m, 0)
        assert res.best.seq == ()
        assert res.logprob == pytest.approx(math.log(0.2))

    def test_unique_feasible_sequence(self):
        m = explicit({"a": "1/2", "a b c": "1/8", "b b": "3/8"})
        res = length_conditional_mode(m, 3)
        assert m.vocab.decode(res.best.seq) == ["a", "b", "c"]

    def test_infeasible(self):
        m = explicit({"a": "1/2", "b b": "1/2"})
        with pytest.raises(NoFeasibleSequence):
            length_conditional_mode(m, 3)

    def test_negative_length(self):
        with pytest.raises(ValueError):
            length_conditional_mode(explicit({"a": 1}), -1)


class TestStateCache:
    def test_greedy_chain_holds_linear_state(self):
        m = chain_model(100)
        res = global_mode(m)
        assert m.vocab.decode(res.best.seq) == ["a"] * 100
        assert res.stats.full_state_rebuilds == 0
        assert res.stats.peak_cached_states <= 105

    @pytest.mark.parametrize("k", [10, 40, 80])
    def test_chain_entries_grow_linearly(self, k):
        s = global_mode(chain_model(k)).stats
        # one stored entry per node, one full state at the root, one in flight
        assert s.peak_cached_entries <= 2 * k + 2
        off = global_mode(chain_model(k), use_cache=False).stats
        assert off.peak_cached_entries >= k * (k + 1) // 2

    @pytest.mark.parametrize("seed", range(3))
    def test_binary_tree_rebuild_accounting(self, seed):
        on_model = binary_tree_model(10, seed)
        on = global_mode(on_model)
        off = global_mode(binary_tree_model(10, seed), use_cache=False)
        assert on.argmax == off.argmax
        assert on.stats.nodes_expanded == off.stats.nodes_expanded
        expanded = set(on_model.calls)
        assert len(expanded) == on.stats.nodes_expanded
        assert on.stats.full_state_rebuilds == nodes_with_two_expanded_children(expanded, 3)
        assert on.stats.full_state_rebuilds > 0
        assert off.stats.full_state_rebuilds == 0

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 5000))
    def test_cache_never_changes_results(self, seed):
        m = to_autoregressive(random_distribution(seed))
        for L in (None, 2):
            if L is None:
                a, b = global_mode(m, max_ties=64), global_mode(m, use_cache=False, max_ties=64)
            else:
                try:
                    a = length_conditional_mode(m, L)
                except NoFeasibleSequence:
                    continue
                b = length_conditional_mode(m, L, use_cache=False)
            assert a.argmax == b.argmax
            assert a.exhausted == b.exhausted


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 5000))
def test_stats_consistent(seed):
    m = to_autoregressive(random_distribution(seed))
    s = global_mode(m).stats
    assert min(s.as_dict().values()) >= 0
    assert s.completes_considered <= s.nodes_expanded


class TestEmptyModeReport:
    def test_constant_q_threshold(self):
        models = [("constant", m) for m in length_family(1e-4, 2, range(10, 19))]
        rows = empty_mode_report(models)
        assert [r.length_bin for r in rows] == list(range(10, 19))
        assert [r.frac_empty_mode for r in rows] == [0.0] * 4 + [1.0] * 5
        for r in rows:
            assert r.geomean_p_empty == pytest.approx(1e-4, rel=1e-12)
            assert r.frac_exhausted == 1.0

    def test_identical_models(self):
        models = [("same", m) for m in length_family(0.3, 2, [3, 3, 3])]
        (row,) = empty_mode_report(models)
        assert row.n_models == 3
        assert row.geomean_p_empty == pytest.approx(0.3)
        # each clean sequence gets 0.7 / 8 < 0.3
        assert row.frac_empty_mode == 1.0

    def test_decaying_q_diverges(self):
        models = []
        for L in range(4, 15):
            for scale in (0.01, 0.02, 0.04):
                models += [("decay", m) for m in length_family(scale / L, 2, [L])]
        rows = empty_mode_report(models, workers=2)
        rate = [r.frac_empty_mode for r in rows]
        geo = [r.geomean_p_empty for r in rows]
        assert rate == sorted(rate) and rate[-1] == 1.0 and rate[0] == 0.0
        assert all(a > b for a, b in zip(geo, geo[1:]))
        for r, L in zip(rows, range(4, 15)):
            brute = [brute_force_mode(m)[1] == [()] for _, m in models if m.length == L]
            assert r.frac_empty_mode == sum(brute) / len(brute)

    def test_csv(self):
        rows = [EmptyModeRow("x", 3, 0.5, 0.1, 1.0)]
        text = report_to_csv(rows)
        assert text.splitlines() == [
            "label,length_bin,frac_empty_mode,geomean_p_empty,frac_exhausted",
            "x,3,0.5,0.1,1.0",
        ]
