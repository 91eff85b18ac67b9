"""Prefix attribute predictors: P(A(x) = a | prefix, candidate next token).

The candidate is an explicit argument so a predictor can score all top-k
continuations of a hypothesis without the caller stepping the model first.
Length predictors work with *remaining* length: the number of tokens still to
be generated after ``prefix + candidate``, coarsened into 24 classes.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from typing import Callable, Hashable, Sequence

import numpy as np

from ._validation import check_count
from .errors import HorizonTooSmall, PredictorDomainError
from .model import EOS_ID, AutoregressiveModel, ModelState, sample_from

N_LENGTH_CLASSES = 24

# (first, last) remaining length of every class; the last class is open-ended.
LENGTH_CLASS_RANGES = tuple(
    [(r, r) for r in range(17)]
    + [(17 + 4 * i, 20 + 4 * i) for i in range(4)]
    + [(33, 48), (49, 64), (65, math.inf)]
)


def bucket_of(remaining: int) -> int:
    """Class id of a remaining length.

    0-16 map to themselves, 17-32 to four classes of width 4, 33-64 to two
    classes of width 16, and everything from 65 up to class 23.
    """
    remaining = check_count(remaining, "remaining", 0)
    if remaining <= 16:
        return remaining
    if remaining <= 32:
        return 17 + (remaining - 17) // 4
    if remaining <= 64:
        return 21 + (remaining - 33) // 16
    return 23


def _log(p: float) -> float:
    return math.log(p) if p > 0 else -math.inf


def _one_hot_log(n: int, k: int) -> np.ndarray:
    out = np.full(n, -np.inf)
    out[k] = 0.0
    return out


_EOS_CLASS_LOG = _one_hot_log(N_LENGTH_CLASSES, 0)
_EOS_CLASS_LOG.setflags(write=False)


class AttributePredictor(ABC):
    """Scores how likely the finished output is to carry an attribute value.

    ``class_log_probs`` returns a normalised log distribution over
    ``attribute_space`` for the output that will follow ``prefix + candidate``
    (``candidate`` may be EOS, which finishes the output).  ``log_prob`` picks
    the entry corresponding to a target attribute of the full output.
    """

    attribute_space: tuple

    def check_target(self, target) -> None:
        pass

    @abstractmethod
    def class_log_probs(self, prefix: Sequence[int], state: ModelState,
                        candidate: int) -> np.ndarray:
        ...

    @abstractmethod
    def target_class(self, target, prefix: Sequence[int], candidate: int) -> int | None:
        """Index into ``attribute_space`` that the target requires, or None if
        the target is already unreachable."""

    def log_prob(self, target, prefix, state, candidate) -> float:
        cls = self.target_class(target, prefix, candidate)
        if cls is None:
            return -math.inf
        return float(self.class_log_probs(prefix, state, candidate)[cls])


class _RemainingLength(AttributePredictor):
    """Target is the total generated length L of the finished output."""

    attribute_space = tuple(range(N_LENGTH_CLASSES))

    def check_target(self, target):
        if isinstance(target, bool) or not isinstance(target, (int, np.integer)) or target < 0:
            raise PredictorDomainError(f"length target must be a non-negative int, got {target!r}")

    def target_class(self, target, prefix, candidate):
        need = target - len(prefix) - (candidate != EOS_ID)
        return None if need < 0 else bucket_of(need)


class ExactLengthPredictor(_RemainingLength):
    """Remaining-length classes computed exactly from the model.

    P(exactly r more tokens | state) obeys f_0 = P(EOS | state) and
    f_r = sum_w P(w | state) f_{r-1}(state + w); it is memoised on the model's
    ``state_key`` so n-gram models cost O(contexts x depth x |V|).
    """

    def __init__(self, model: AutoregressiveModel, horizon: int | None = None):
        self.model = model
        if horizon is None:
            if model.max_len is None:
                raise HorizonTooSmall("model has no max_len; pass an explicit horizon")
            horizon = model.max_len
        self.horizon = check_count(horizon, "horizon", 0)
        if model.max_len is not None and model.max_len > self.horizon:
            raise HorizonTooSmall(
                f"forced EOS at depth {model.max_len} lies beyond horizon {self.horizon}")
        self._memo: dict[Hashable, np.ndarray] = {}
        self._class_memo: dict[Hashable, np.ndarray] = {}
        starts = [lo for lo, _ in LENGTH_CLASS_RANGES if lo <= self.horizon]
        self._class_starts = np.array(starts, dtype=np.intp)
        self._n_covered = len(starts)

    def remaining_length_probs(self, state: ModelState) -> np.ndarray:
        """Vector f[0..horizon] of P(exactly r more tokens, then EOS | state)."""
        key = self.model.state_key(state)
        f = self._memo.get(key)
        if f is not None:
            return f
        lp = self.model.log_probs(state)
        f = np.zeros(self.horizon + 1)
        f[0] = math.exp(lp[EOS_ID])
        if self.horizon > 0:
            for w in np.flatnonzero(lp > -np.inf):
                if w == EOS_ID:
                    continue
                child = self.remaining_length_probs(self.model.step(state, int(w)))
                f[1:] += math.exp(lp[w]) * child[:-1]
        f.setflags(write=False)
        self._memo[key] = f
        return f

    def class_probs_of_state(self, state: ModelState) -> np.ndarray:
        f = self.remaining_length_probs(state)
        out = np.zeros(N_LENGTH_CLASSES)
        n = self._n_covered
        # classes are contiguous, so each covered class sums up to the next start
        out[:n] = np.add.reduceat(f, self._class_starts)
        out[-1] += max(0.0, 1.0 - f.sum())
        return out

    def class_log_probs(self, prefix, state, candidate):
        if candidate == EOS_ID:
            return _EOS_CLASS_LOG
        child = self.model.step(state, candidate)
        key = self.model.state_key(child)
        out = self._class_memo.get(key)
        if out is None:
            with np.errstate(divide="ignore"):
                out = np.log(self.class_probs_of_state(child))
            out.setflags(write=False)
            self._class_memo[key] = out
        return out


def remaining_length_class(prefix, completion) -> int:
    return bucket_of(len(completion))


class MonteCarloPredictor(_RemainingLength):
    """Empirical attribute classes from ancestral rollouts, add-one smoothed.

    Each query draws from its own generator seeded by ``(seed, prefix,
    candidate)``, so answers do not depend on query order.  With the default
    ``attribute_fn`` the classes are remaining-length buckets; pass
    ``attribute_fn(prefix_and_candidate, completion) -> class`` together with
    ``target_fn`` and ``n_classes`` for other attributes.
    """

    def __init__(self, model: AutoregressiveModel, attribute_fn: Callable | None = None,
                 samples_per_query: int = 1000, seed: int = 0, *, n_classes: int = N_LENGTH_CLASSES,
                 target_fn: Callable | None = None, max_rollout: int = 256):
        self.model = model
        self.attribute_fn = attribute_fn or remaining_length_class
        self.samples_per_query = check_count(samples_per_query, "samples_per_query", 1)
        self.seed = seed
        self.n_classes = n_classes
        self.attribute_space = tuple(range(n_classes))
        self.target_fn = target_fn
        self.max_rollout = max_rollout
        self._memo: dict = {}

    def target_class(self, target, prefix, candidate):
        if self.target_fn is not None:
            return self.target_fn(target, prefix, candidate)
        return super().target_class(target, prefix, candidate)

    def check_target(self, target):
        if self.target_fn is None:
            super().check_target(target)

    def class_log_probs(self, prefix, state, candidate):
        key = (tuple(prefix), candidate, self.model.state_key(state))
        out = self._memo.get(key)
        if out is not None:
            return out
        n = self.samples_per_query
        counts = np.zeros(self.n_classes)
        extended = tuple(prefix) + ((candidate,) if candidate != EOS_ID else ())
        if candidate == EOS_ID:
            counts[self.attribute_fn(extended, ())] = n
        else:
            child = self.model.step(state, candidate)
            steps = self.max_rollout
            if self.model.max_len is not None:
                steps = max(0, self.model.max_len - len(child))
            rng = np.random.default_rng([self.seed, len(prefix), *prefix, candidate])
            for _ in range(n):
                completion, _ = sample_from(self.model, child, rng, steps + 1)
                counts[self.attribute_fn(extended, completion)] += 1
        out = np.log((counts + 1) / (n + self.n_classes))
        out.setflags(write=False)
        self._memo[key] = out
        return out


class FirstTokenPredictor(AttributePredictor):
    """Attribute "the output starts with ``token``"; targets are True/False.

    Deterministic once a first token exists.  Queried with ``candidate=None``
    at the empty prefix it returns the model's P(x_1 = token).
    """

    attribute_space = (False, True)

    def __init__(self, token: int, model: AutoregressiveModel | None = None):
        if token == EOS_ID:
            raise ValueError("first-token attribute needs a non-EOS token")
        self.token = token
        self.model = model

    def check_target(self, target):
        if target not in (True, False):
            raise PredictorDomainError(f"first-token target must be True or False, got {target!r}")

    def target_class(self, target, prefix, candidate):
        return int(bool(target))

    def probability(self, prefix, state=None, candidate=None) -> float:
        seq = tuple(prefix)
        if candidate is not None and candidate != EOS_ID:
            seq += (candidate,)
        if seq:
            return float(seq[0] == self.token)
        if candidate == EOS_ID:
            return 0.0
        if self.model is None or state is None:
            raise PredictorDomainError("P(first token) at the empty prefix needs the model")
        return math.exp(self.model.log_probs(state)[self.token])

    def class_log_probs(self, prefix, state, candidate):
        p = self.probability(prefix, state, candidate)
        return np.array([_log(1.0 - p), _log(p)])


class ConstantPredictor(AttributePredictor):
    """Fixed guidance ``log_value`` for every query; ranking-neutral."""

    attribute_space = (None,)

    def __init__(self, log_value: float = 0.0):
        self.log_value = float(log_value)

    def class_log_probs(self, prefix, state, candidate):
        return np.zeros(1)

    def target_class(self, target, prefix, candidate):
        return 0

    def log_prob(self, target, prefix, state, candidate):
        return self.log_value


def exact_length_predictor(model, horizon=None) -> ExactLengthPredictor:
    return ExactLengthPredictor(model, horizon)


def monte_carlo_predictor(model, attribute_fn=None, samples_per_query=1000, seed=0,
                          **kwargs) -> MonteCarloPredictor:
    return MonteCarloPredictor(model, attribute_fn, samples_per_query, seed, **kwargs)


def first_token_predictor(token: int, model=None) -> FirstTokenPredictor:
    return FirstTokenPredictor(token, model)
