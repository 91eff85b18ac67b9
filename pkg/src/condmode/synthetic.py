"""Analytic sequence distributions and their exact autoregressive compilation.

Distributions built from rationals keep exact :class:`fractions.Fraction`
probabilities; conversion to log-space floats happens only inside the model
returned by :func:`to_autoregressive`.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from ._validation import as_fraction, check_count, check_probability, check_token_ids
from .errors import EmptyVariantSet, ModelFormatError, VocabMismatch, ZeroSupport
from .model import EOS, EOS_ID, AutoregressiveModel, ModelState, Vocab, readonly, register_kind

NORMALIZATION_TOL = 1e-12


def _log(p) -> float:
    """Natural log of a non-negative Fraction/float without float underflow."""
    if p == 0:
        return -math.inf
    if isinstance(p, Fraction):
        return math.log(p.numerator) - math.log(p.denominator)
    return math.log(p)


class ExplicitDistribution:
    """Finite map from complete token-id sequences to strictly positive probabilities."""

    def __init__(self, entries: Mapping[Sequence[int], object], vocab: Vocab):
        self.vocab = vocab
        clean = {}
        for seq, p in entries.items():
            seq = check_token_ids(seq, len(vocab))
            p = as_fraction(p)
            if p <= 0:
                raise ValueError(f"probability of {seq} must be strictly positive, got {p}")
            clean[seq] = clean.get(seq, 0) + p
        if not clean:
            raise ZeroSupport("distribution has empty support")
        total = sum(clean.values())
        if abs(total - 1) > NORMALIZATION_TOL:
            raise ValueError(f"probabilities sum to {float(total)!r}, expected 1")
        self.entries = dict(sorted(clean.items()))

    @classmethod
    def from_strings(cls, entries: Mapping[str, object], vocab: Vocab | None = None):
        """Build from ``{"tok tok": prob}``; the empty string is the empty sequence."""
        split = {k: tuple(k.split()) for k in entries}
        if vocab is None:
            vocab = Vocab.from_tokens(t for toks in split.values() for t in toks)
        return cls({vocab.encode(split[k]): p for k, p in entries.items()}, vocab)

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries.items())

    def __eq__(self, other):
        if not isinstance(other, ExplicitDistribution):
            return NotImplemented
        return self.vocab == other.vocab and self.entries == other.entries

    def prob(self, seq: Sequence[int]):
        return self.entries.get(tuple(seq), Fraction(0))

    def total(self):
        return sum(self.entries.values())

    def max_len(self) -> int:
        return max(len(s) for s in self.entries)

    def modes(self) -> list[tuple[int, ...]]:
        """All argmax sequences, by exact comparison, in lexicographic order."""
        best = max(self.entries.values())
        return [s for s, p in self.entries.items() if p == best]

    def renamed(self, vocab: Vocab) -> "ExplicitDistribution":
        """Re-encode the same string sequences under a superset vocabulary."""
        return ExplicitDistribution(
            {vocab.encode(self.vocab.decode(s)): p for s, p in self.entries.items()}, vocab)

    def to_tsv(self) -> str:
        lines = []
        for seq, p in sorted(self.entries.items(), key=lambda kv: (-kv[1], kv[0])):
            lines.append(f"{_format_prob(p)}\t{' '.join(self.vocab.decode(seq))}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_tsv(cls, text: str, vocab: Vocab | None = None) -> "ExplicitDistribution":
        raw = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            if "\t" not in line:
                raise ModelFormatError(f"line {lineno}: expected 'probability<TAB>tokens'")
            prob, toks = line.split("\t", 1)
            try:
                p = as_fraction(prob)
            except (ValueError, ZeroDivisionError) as exc:
                raise ModelFormatError(f"line {lineno}: bad probability {prob!r}") from exc
            key = " ".join(toks.split())
            raw[key] = raw.get(key, 0) + p
        try:
            return cls.from_strings(raw, vocab)
        except (ValueError, ZeroSupport) as exc:
            raise ModelFormatError(str(exc)) from exc


def _format_prob(p) -> str:
    if isinstance(p, Fraction):
        return str(p.numerator) if p.denominator == 1 else f"{p.numerator}/{p.denominator}"
    return repr(float(p))


def uniform(sequences: Iterable[Sequence[str]], vocab: Vocab | None = None) -> ExplicitDistribution:
    """Uniform distribution over distinct string sequences."""
    seqs = sorted({tuple(s) for s in sequences})
    if not seqs:
        raise ZeroSupport("uniform distribution needs at least one sequence")
    if vocab is None:
        vocab = Vocab.from_tokens(t for s in seqs for t in s)
    p = Fraction(1, len(seqs))
    return ExplicitDistribution({vocab.encode(s): p for s in seqs}, vocab)


# -- low-entropy distractors --------------------------------------------------

class CriticalEpsilon(NamedTuple):
    exact: Fraction
    value: float


def critical_epsilon(n_clean: int, n_noise: int) -> CriticalEpsilon:
    """Noise rate above which one of ``n_noise`` uniform distractors outranks
    every one of ``n_clean`` uniform clean sequences: M / (M + N)."""
    if n_clean == 0 or n_noise == 0:
        raise ZeroSupport("both supports must be non-empty")
    n_clean = check_count(n_clean, "N", 1)
    n_noise = check_count(n_noise, "M", 1)
    exact = Fraction(n_noise, n_noise + n_clean)
    return CriticalEpsilon(exact, float(exact))


@dataclass(frozen=True)
class MixtureSpec:
    clean: ExplicitDistribution
    noise: ExplicitDistribution
    epsilon: object

    def __post_init__(self):
        eps = as_fraction(self.epsilon)
        check_probability(eps, "epsilon")
        object.__setattr__(self, "epsilon", eps)


def build_mixture(spec: MixtureSpec) -> ExplicitDistribution:
    """(1 - eps) * clean + eps * noise; overlapping supports add."""
    if spec.clean.vocab != spec.noise.vocab:
        raise VocabMismatch("clean and noise distributions use different vocabularies")
    eps = spec.epsilon
    out: dict = {}
    for weight, dist in ((1 - eps, spec.clean), (eps, spec.noise)):
        if weight == 0:
            continue
        for seq, p in dist:
            out[seq] = out.get(seq, 0) + weight * p
    return ExplicitDistribution(out, spec.clean.vocab)


def uniform_mixture(clean: Iterable[Sequence[str]], noise: Iterable[Sequence[str]],
                    epsilon) -> ExplicitDistribution:
    """Convenience wrapper: uniform clean and noise sets over a shared vocabulary."""
    clean, noise = [tuple(s) for s in clean], [tuple(s) for s in noise]
    vocab = Vocab.from_tokens(t for s in clean + noise for t in s)
    return build_mixture(MixtureSpec(uniform(clean, vocab), uniform(noise, vocab), epsilon))


def typo_channel(clean: ExplicitDistribution, p, typo_variants: Mapping[str, Sequence[str]]
                 ) -> ExplicitDistribution:
    """Corrupt each word independently: kept with prob 1 - p, otherwise replaced
    by one of its misspellings chosen uniformly.  The output enumerates every
    corruption pattern and lives on the clean vocabulary plus all misspellings."""
    p = as_fraction(p)
    check_probability(p, "p", open_high=True)
    words = {w for seq, _ in clean for w in clean.vocab.decode(seq)}
    for w in words:
        variants = typo_variants.get(w, ())
        if not variants:
            raise EmptyVariantSet(f"word {w!r} has no typo variants")
        if w in variants or len(set(variants)) != len(variants):
            raise ValueError(f"typo variants of {w!r} must be distinct and differ from it")
    extra = {v for w in words for v in typo_variants[w]}
    vocab = Vocab.from_tokens(set(clean.vocab.tokens[1:]) | extra)

    out: dict = {}
    for seq, mass in clean:
        options = []
        for w in clean.vocab.decode(seq):
            opts = [(w, 1 - p)]
            if p > 0:
                share = p / len(typo_variants[w])
                opts += [(v, share) for v in typo_variants[w]]
            options.append(opts)
        for combo in itertools.product(*options):
            key = vocab.encode(w for w, _ in combo)
            prob = mass
            for _, q in combo:
                prob *= q
            out[key] = out.get(key, 0) + prob
    return ExplicitDistribution(out, vocab)


def make_typo_variants(words: Iterable[str], n_variants: int) -> dict[str, list[str]]:
    """Deterministic misspellings: drops, adjacent swaps and doubled letters.

    Generated variants never collide with any input word.
    """
    words = sorted(set(words))
    taken = set(words)
    out = {}
    for w in words:
        cands = []
        cands += [w[:i] + w[i + 1:] for i in range(len(w))]
        cands += [w[:i] + w[i + 1] + w[i] + w[i + 2:] for i in range(len(w) - 1)]
        cands += [w[:i + 1] + w[i] + w[i + 1:] for i in range(len(w))]
        cands += [w + c for c in "qxzjkv"]
        chosen = []
        for c in cands:
            if c and c not in taken and c not in chosen:
                chosen.append(c)
            if len(chosen) == n_variants:
                break
        taken.update(chosen)
        out[w] = chosen
    return out


def count_typos(seq: Sequence[str], typo_variants: Mapping[str, Sequence[str]]) -> int:
    misspellings = {v for vs in typo_variants.values() for v in vs}
    return sum(1 for w in seq if w in misspellings)


# -- exact trie compilation ---------------------------------------------------

class _TrieNode:
    __slots__ = ("children", "mass", "end")

    def __init__(self):
        self.children: dict[int, int] = {}
        self.mass = Fraction(0)
        self.end = Fraction(0)


@register_kind("explicit")
class TrieModel(AutoregressiveModel):
    """Exact autoregressive factorisation of an :class:`ExplicitDistribution`.

    P(x_t | x_<t) = mass(prefix + x_t) / mass(prefix) and
    P(EOS | x) = P(x) / mass(x).  State entries are trie node ids.
    """

    def __init__(self, dist: ExplicitDistribution):
        self.distribution = dist
        self.vocab = dist.vocab
        self.max_len = dist.max_len()
        nodes = [_TrieNode()]
        for seq, p in dist:
            node = nodes[0]
            node.mass += p
            for tok in seq:
                nxt = node.children.get(tok)
                if nxt is None:
                    nxt = node.children[tok] = len(nodes)
                    nodes.append(_TrieNode())
                node = nodes[nxt]
                node.mass += p
            node.end += p
        self._nodes = nodes
        self._cache: dict[int, np.ndarray] = {}

    def _node_id(self, state: ModelState) -> int:
        return state.entries[-1] if state.entries else 0

    def advance(self, state, token):
        node = self._nodes[self._node_id(state)]
        try:
            return node.children[token]
        except KeyError:
            raise ValueError(f"token {token} has zero probability after this prefix") from None

    def log_probs(self, state):
        nid = self._node_id(state)
        vec = self._cache.get(nid)
        if vec is None:
            node = self._nodes[nid]
            vec = np.full(len(self.vocab), -np.inf)
            vec[EOS_ID] = _log(node.end / node.mass)
            for tok, child in node.children.items():
                vec[tok] = _log(self._nodes[child].mass / node.mass)
            vec = self._cache[nid] = readonly(vec)
        return vec

    def assemble(self, base, deltas):
        return ModelState(base.entries + tuple(deltas), base.entry_bytes)

    def state_key(self, state):
        return self._node_id(state)

    def to_params(self):
        return {"entries": [[self.vocab.decode(s), _format_prob(p)]
                            for s, p in self.distribution]}

    @classmethod
    def from_params(cls, vocab, params):
        try:
            entries = {vocab.encode(toks): p for toks, p in params["entries"]}
            return cls(ExplicitDistribution(entries, vocab))
        except (KeyError, TypeError, ValueError) as exc:
            raise ModelFormatError(f"bad explicit model params: {exc}") from exc


def to_autoregressive(dist: ExplicitDistribution) -> TrieModel:
    return TrieModel(dist)


# -- length families ----------------------------------------------------------

@register_kind("length_family")
class LengthFamilyModel(AutoregressiveModel):
    """Empty output with mass ``q`` mixed with ``b**length`` equiprobable clean
    sequences of exactly ``length`` tokens.  Conditionals are closed form, so
    the model stays cheap even when the clean set is huge."""

    def __init__(self, q: float, b: int, length: int):
        self.q = float(check_probability(q, "q", open_low=True, open_high=True))
        self.b = check_count(b, "b", 2)
        self.length = check_count(length, "length", 0)
        self.length_bin = self.length
        self.max_len = self.length
        self.vocab = Vocab((EOS, *(f"w{i}" for i in range(self.b))))
        lb = len(self.vocab)
        root = np.full(lb, -np.inf)
        if self.length == 0:
            root[EOS_ID] = 0.0
        else:
            root[EOS_ID] = math.log(self.q)
            root[1:] = math.log1p(-self.q) - math.log(self.b)
        inner = np.full(lb, -np.inf)
        inner[1:] = -math.log(self.b)
        last = np.full(lb, -np.inf)
        last[EOS_ID] = 0.0
        self._root, self._inner, self._last = map(readonly, (root, inner, last))

    def advance(self, state, token):
        return token

    def log_probs(self, state):
        d = len(state.entries)
        if d == 0:
            return self._root
        return self._last if d >= self.length else self._inner

    def state_key(self, state):
        return len(state.entries)

    def to_params(self):
        return {"q": self.q, "b": self.b, "length": self.length}

    @classmethod
    def from_params(cls, vocab, params):
        try:
            model = cls(params["q"], params["b"], params["length"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ModelFormatError(f"bad length_family params: {exc}") from exc
        if model.vocab != vocab:
            raise ModelFormatError("length_family vocabulary does not match its parameters")
        return model


def length_family(q: float | Callable[[int], float], b: int,
                  lengths: Iterable[int]) -> list[LengthFamilyModel]:
    """One model per length; ``q`` may be a constant or a function of the length."""
    q_of = q if callable(q) else (lambda _L: q)
    return [LengthFamilyModel(q_of(L), b, L) for L in lengths]
