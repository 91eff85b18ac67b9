"""Small hand-built models and generators shared by the test modules."""

from __future__ import annotations

import math
import random
from fractions import Fraction

import numpy as np

from condmode.model import EOS_ID, AutoregressiveModel, Vocab, readonly
from condmode.synthetic import ExplicitDistribution, to_autoregressive


def log_vector(probs):
    with np.errstate(divide="ignore"):
        return readonly(np.log(np.asarray(probs, dtype=float)))


class TableModel(AutoregressiveModel):
    """Next-token distribution given by ``fn(prefix) -> probabilities``.

    States carry the consumed tokens themselves, so the prefix can be read
    back from any state.  Every ``log_probs`` call is recorded.
    """

    kind = "table"

    def __init__(self, tokens, fn, max_len):
        self.vocab = Vocab(tuple(tokens))
        self.fn = fn
        self.max_len = max_len
        self.calls = []

    def advance(self, state, token):
        return int(token)

    def log_probs(self, state):
        prefix = tuple(state.entries)
        self.calls.append(prefix)
        return log_vector(self.fn(prefix))


def chain_model(depth=100):
    """Greedy chain: P(a)=0.999, P(b)=P(EOS)=0.0005 below ``depth``, EOS forced at it."""
    def fn(prefix):
        if len(prefix) >= depth:
            return [1.0, 0.0, 0.0]
        return [0.0005, 0.999, 0.0005]
    return TableModel(("</s>", "a", "b"), fn, depth)


def binary_tree_model(depth=10, seed=0):
    """Full binary tree of depth ``depth`` with uneven, prefix-dependent splits.

    Internal nodes put a little mass on EOS so early completions compete.
    """
    def fn(prefix):
        if len(prefix) >= depth:
            return [1.0, 0.0, 0.0]
        r = random.Random(hash((seed, prefix)) & 0xFFFFFFFF).uniform(0.35, 0.65)
        eos = 0.02
        return [eos, (1 - eos) * r, (1 - eos) * (1 - r)]
    return TableModel(("</s>", "l", "r"), fn, depth)


def nodes_with_two_expanded_children(expanded: set, n_tokens: int) -> int:
    """Parents for which at least two children appear among expanded prefixes."""
    count = 0
    for prefix in expanded:
        kids = sum(prefix + (t,) in expanded for t in range(1, n_tokens))
        count += kids >= 2
    return count


def random_distribution(seed, max_vocab=4, max_len=5, max_support=12):
    """Random explicit distribution with rational weights.

    ``max_vocab`` counts EOS.  Weights are small integers so exact ties are
    common.
    """
    rng = random.Random(seed)
    n_tokens = rng.randint(1, max_vocab - 1)
    words = "abc"[:n_tokens]
    vocab = Vocab(("</s>", *words))
    support = {}
    for _ in range(rng.randint(1, max_support)):
        length = rng.randint(0, max_len)
        seq = tuple(rng.randint(1, n_tokens) for _ in range(length))
        support[seq] = support.get(seq, 0) + rng.randint(1, 4)
    total = sum(support.values())
    return ExplicitDistribution({s: Fraction(w, total) for s, w in support.items()}, vocab)


def random_models(n=50, **kw):
    return [to_autoregressive(random_distribution(seed, **kw)) for seed in range(n)]


def total_complete_mass(model, max_len):
    """Sum of P(x) over every complete sequence of length <= ``max_len``."""
    total = 0.0
    frontier = [(model.initial_state(), 0.0)]
    for depth in range(max_len + 1):
        nxt = []
        for state, lp in frontier:
            vec = model.log_probs(state)
            if vec[EOS_ID] > -math.inf:
                total += math.exp(lp + vec[EOS_ID])
            if depth == max_len:
                continue
            for t in range(1, len(model.vocab)):
                if vec[t] > -math.inf:
                    nxt.append((model.step(state, t), lp + vec[t]))
        frontier = nxt
    return total
