"""Vocabulary, the autoregressive model contract, sequence scoring and sampling.

Every search in the package talks to models through :class:`AutoregressiveModel`.
A model exposes an initial state, a per-token ``advance`` that produces the new
position's cache entry (the analogue of one step of a transformer KV-cache), and
a next-token log-probability vector over the vocabulary, EOS included at index 0.
"""

from __future__ import annotations

import json
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Any, Hashable, Iterable, Sequence

import numpy as np

from ._validation import check_count, check_token_ids
from .errors import InvalidToken, ModelFormatError

EOS = "</s>"
EOS_ID = 0


@dataclass(frozen=True)
class Vocab:
    """Ordered token inventory; index 0 is always the end-of-sequence token."""

    tokens: tuple[str, ...]

    def __post_init__(self):
        tokens = tuple(self.tokens)
        object.__setattr__(self, "tokens", tokens)
        if not tokens or tokens[0] != EOS:
            raise ValueError(f"vocabulary must start with {EOS!r}")
        if len(set(tokens)) != len(tokens):
            raise ValueError("vocabulary tokens must be unique")
        object.__setattr__(self, "_index", {t: i for i, t in enumerate(tokens)})

    @classmethod
    def from_tokens(cls, tokens: Iterable[str]) -> "Vocab":
        """Build a vocabulary from arbitrary tokens: EOS first, the rest sorted."""
        rest = sorted(set(tokens) - {EOS})
        return cls((EOS, *rest))

    @property
    def eos_id(self) -> int:
        return EOS_ID

    def __len__(self):
        return len(self.tokens)

    def index(self, token: str) -> int:
        try:
            return self._index[token]
        except KeyError:
            raise InvalidToken(f"token {token!r} not in vocabulary") from None

    def encode(self, tokens: Iterable[str]) -> tuple[int, ...]:
        return check_token_ids([self.index(t) for t in tokens], len(self))

    def decode(self, ids: Iterable[int]) -> list[str]:
        return [self.tokens[i] for i in ids]

    def render(self, ids: Sequence[int], complete: bool = True) -> str:
        words = self.decode(ids)
        if complete:
            words.append(EOS)
        return " ".join(words)


@dataclass(frozen=True)
class ModelState:
    """Per-prefix state: one cache entry per consumed token.

    ``entry_bytes`` is an accounting figure only; it lets the search report
    memory in the same units as a per-position key/value cache.
    """

    entries: tuple = ()
    entry_bytes: int = 8

    def __len__(self):
        return len(self.entries)

    @property
    def size_bytes(self) -> int:
        return len(self.entries) * self.entry_bytes

    def extend(self, delta) -> "ModelState":
        return ModelState(self.entries + (delta,), self.entry_bytes)


@dataclass(frozen=True)
class Hypothesis:
    seq: tuple[int, ...]
    logprob: float
    complete: bool = True

    def __len__(self):
        return len(self.seq)

    def render(self, vocab: Vocab) -> str:
        return vocab.render(self.seq, self.complete)


class AutoregressiveModel(ABC):
    """Contract implemented by every model searched in this package.

    Subclasses set ``vocab`` and ``max_len`` (``None`` when unbounded) and
    implement :meth:`advance` and :meth:`log_probs`.  Models never change after
    construction; states are immutable values.
    """

    kind: str = "abstract"
    vocab: Vocab
    max_len: int | None = None
    entry_bytes: int = 8

    def initial_state(self) -> ModelState:
        return ModelState((), self.entry_bytes)

    @abstractmethod
    def advance(self, state: ModelState, token: int) -> Any:
        """Return the cache entry produced by feeding ``token`` after ``state``."""

    @abstractmethod
    def log_probs(self, state: ModelState) -> np.ndarray:
        """Natural-log next-token distribution over the vocabulary (read-only)."""

    def step(self, state: ModelState, token: int) -> ModelState:
        return state.extend(self.advance(state, token))

    def assemble(self, base: ModelState, deltas: Sequence[Any]) -> ModelState:
        """Rebuild a full state from an ancestor state plus the entries below it."""
        return ModelState(base.entries + tuple(deltas), base.entry_bytes)

    def state_key(self, state: ModelState) -> Hashable:
        """Hashable key that identifies the next-token distribution of ``state``
        and of every state reachable from it.  Used for memoisation."""
        return state.entries

    def prompt_state(self, prompt: Sequence[int] = ()) -> ModelState:
        state = self.initial_state()
        for tok in check_token_ids(prompt, len(self.vocab)):
            state = self.step(state, tok)
        return state

    def to_params(self) -> dict:
        raise NotImplementedError(f"{type(self).__name__} is not serialisable")

    @classmethod
    def from_params(cls, vocab: Vocab, params: dict) -> "AutoregressiveModel":
        raise NotImplementedError


def readonly(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


def sequence_log_prob(model: AutoregressiveModel, seq: Sequence[int],
                      complete: bool = True, prompt: Sequence[int] = ()) -> float:
    """Chain-rule log-probability of ``seq`` (optionally followed by EOS).

    Returns ``-inf`` as soon as one factor has zero probability.
    """
    seq = check_token_ids(seq, len(model.vocab))
    state = model.prompt_state(prompt)
    total = 0.0
    for i, tok in enumerate(seq):
        lp = model.log_probs(state)[tok]
        if lp == -math.inf:
            return -math.inf
        total += float(lp)
        if i + 1 < len(seq) or complete:
            state = model.step(state, tok)
    if complete:
        lp = model.log_probs(state)[EOS_ID]
        if lp == -math.inf:
            return -math.inf
        total += float(lp)
    return total


def _draw(rng: np.random.Generator, logp: np.ndarray) -> int:
    cdf = np.cumsum(np.exp(logp))
    return int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))


def sample_from(model: AutoregressiveModel, state: ModelState, rng: np.random.Generator,
                max_steps: int) -> tuple[tuple[int, ...], bool]:
    """Ancestral rollout from ``state``; returns (tokens, complete)."""
    out = []
    for _ in range(max_steps):
        tok = _draw(rng, model.log_probs(state))
        if tok == EOS_ID:
            return tuple(out), True
        out.append(tok)
        state = model.step(state, tok)
    return tuple(out), False


def sample(model: AutoregressiveModel, seed=0, max_len: int = 64,
           prompt: Sequence[int] = ()) -> Hypothesis:
    """Draw one ancestral sample.

    ``seed`` may be an int or a ``numpy.random.Generator`` (to draw many samples
    from one stream).  The hypothesis is marked incomplete when ``max_len``
    tokens were drawn without EOS.
    """
    check_count(max_len, "max_len", 1)
    rng = np.random.default_rng(seed)
    start = model.prompt_state(prompt)
    seq, complete = sample_from(model, start, rng, max_len)
    return Hypothesis(seq, sequence_log_prob(model, seq, complete, prompt), complete)


# -- serialisation -----------------------------------------------------------

MODEL_KINDS: dict[str, type] = {}


def register_kind(kind: str):
    def deco(cls):
        cls.kind = kind
        MODEL_KINDS[kind] = cls
        return cls
    return deco


def model_to_dict(model: AutoregressiveModel) -> dict:
    return {"kind": model.kind, "vocab": list(model.vocab.tokens), "params": model.to_params()}


def model_to_json(model: AutoregressiveModel) -> str:
    """Canonical JSON: sorted keys, no insignificant whitespace."""
    return json.dumps(model_to_dict(model), sort_keys=True, separators=(",", ":"),
                      ensure_ascii=False)


def model_from_dict(obj: dict) -> AutoregressiveModel:
    try:
        kind = obj["kind"]
        vocab = Vocab(tuple(obj["vocab"]))
        params = obj["params"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"malformed model object: {exc}") from exc
    if kind not in MODEL_KINDS:
        raise ModelFormatError(f"unknown model kind {kind!r}")
    return MODEL_KINDS[kind].from_params(vocab, params)


def model_from_json(text: str) -> AutoregressiveModel:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(str(exc)) from exc
    return model_from_dict(obj)
