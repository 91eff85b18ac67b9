"""Add-alpha smoothed n-gram language model with a hard length cap."""

from __future__ import annotations

import math
from collections import defaultdict
from typing import Iterable, Sequence

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_count
from .errors import EmptyCorpus, ModelFormatError, OrderTooLarge, UnseenContext
from .io import read_lines
from .model import (EOS_ID, AutoregressiveModel, Vocab, readonly, register_kind,
                    sequence_log_prob)

BOS_ID = -1  # context padding; never emitted


def read_corpus(path, chars: bool = False) -> list[list[str]]:
    """One sequence per line; whitespace tokens, or characters when ``chars``."""
    lines = read_lines(path)
    if chars:
        return [[c for c in line if not c.isspace()] for line in lines]
    return [line.split() for line in lines]


@register_kind("ngram")
class NgramLM(BaseEstimator, AutoregressiveModel):
    """Order-``n`` Markov model over tokens with add-``alpha`` smoothing.

    The next-token distribution at a context is
    ``(count + alpha) / (context_total + alpha * |V|)`` over the whole
    vocabulary including EOS.  After ``max_len`` tokens EOS is forced.

    Parameters
    ----------
    order : int
        n of the n-gram; the context is the previous ``order - 1`` tokens.
    alpha : float
        Additive smoothing.  ``0`` is allowed, but querying an unseen
        context then raises :class:`~condmode.errors.UnseenContext`.
    max_len : int
        Hard cap on sequence length.
    extra_tokens : list of str, optional
        Tokens added to the vocabulary even if absent from the corpus.
    """

    def __init__(self, order=2, alpha=1.0, max_len=64, extra_tokens=None):
        self.order = order
        self.alpha = alpha
        self.max_len = max_len
        self.extra_tokens = extra_tokens

    @property
    def vocab(self) -> Vocab:
        check_is_fitted(self, "counts_")
        return self.vocab_

    def _validate_params(self):
        check_count(self.order, "order", 1)
        check_count(self.max_len, "max_len", 1)
        if not self.alpha >= 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        if self.order > self.max_len + 1:
            raise OrderTooLarge(f"order {self.order} exceeds max_len + 1 = {self.max_len + 1}")

    def fit(self, X: Iterable[Sequence[str] | str], y=None):
        """Count n-grams over ``X`` (token lists, or strings split on whitespace)."""
        self._validate_params()
        corpus = [x.split() if isinstance(x, str) else list(x) for x in X]
        if not corpus:
            raise EmptyCorpus("corpus has no sequences")
        extra = self.extra_tokens or ()
        self.vocab_ = Vocab.from_tokens([t for seq in corpus for t in seq] + list(extra))
        counts = defaultdict(lambda: np.zeros(len(self.vocab_), dtype=np.int64))
        for seq in corpus:
            ids = [BOS_ID] * (self.order - 1) + list(self.vocab_.encode(seq)) + [EOS_ID]
            for i in range(self.order - 1, len(ids)):
                counts[tuple(ids[i - self.order + 1:i])][ids[i]] += 1
        self.counts_ = dict(sorted(counts.items()))
        self._cache = {}
        return self

    # -- model contract ---------------------------------------------------------

    def advance(self, state, token):
        return token

    def _context(self, entries) -> tuple:
        if self.order == 1:
            return ()
        hist = (BOS_ID,) * (self.order - 1) + tuple(entries[-(self.order - 1):])
        return hist[-(self.order - 1):]

    def state_key(self, state):
        return self._context(state.entries), min(len(state.entries), self.max_len)

    def log_probs(self, state):
        check_is_fitted(self, "counts_")
        key = self.state_key(state)
        vec = self._cache.get(key)
        if vec is None:
            vec = self._cache[key] = readonly(self._compute(*key))
        return vec

    def _compute(self, context, depth):
        V = len(self.vocab_)
        if depth >= self.max_len:
            vec = np.full(V, -np.inf)
            vec[EOS_ID] = 0.0
            return vec
        row = self.counts_.get(context)
        total = 0 if row is None else int(row.sum())
        if total == 0 and self.alpha == 0:
            raise UnseenContext(f"context {context} unseen and alpha == 0")
        num = np.full(V, float(self.alpha)) if row is None else row + float(self.alpha)
        with np.errstate(divide="ignore"):
            return np.log(num) - math.log(total + self.alpha * V)

    def score(self, X, y=None) -> float:
        """Mean log-likelihood per complete sequence of ``X``."""
        corpus = [x.split() if isinstance(x, str) else list(x) for x in X]
        return float(np.mean([sequence_log_prob(self, self.vocab_.encode(s)) for s in corpus]))

    # -- serialisation ----------------------------------------------------------

    def to_params(self):
        check_is_fitted(self, "counts_")
        return {
            "order": self.order,
            "alpha": self.alpha,
            "max_len": self.max_len,
            "counts": [[list(ctx), row.tolist()] for ctx, row in self.counts_.items()],
        }

    @classmethod
    def from_params(cls, vocab, params):
        try:
            model = cls(order=params["order"], alpha=params["alpha"], max_len=params["max_len"])
            model._validate_params()
            counts = {}
            for ctx, row in params["counts"]:
                if len(row) != len(vocab) or len(ctx) != model.order - 1:
                    raise ValueError("count row does not match vocabulary/order")
                counts[tuple(int(c) for c in ctx)] = np.asarray(row, dtype=np.int64)
        except (KeyError, TypeError, ValueError) as exc:
            raise ModelFormatError(f"bad ngram params: {exc}") from exc
        model.vocab_ = vocab
        model.counts_ = dict(sorted(counts.items()))
        model._cache = {}
        return model


def train(corpus, order: int = 2, alpha: float = 1.0, max_len: int = 64,
          extra_tokens=None) -> NgramLM:
    return NgramLM(order=order, alpha=alpha, max_len=max_len, extra_tokens=extra_tokens).fit(corpus)


def next_token_log_probs(model: NgramLM, state) -> np.ndarray:
    return model.log_probs(state)
