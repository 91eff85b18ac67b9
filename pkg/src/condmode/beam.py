"""Beam search: plain, EOS-masked length-constrained, and attribute-conditional.

All three share one loop.  Completed hypotheses stay on the beam and keep
competing, so a wide enough beam provably reaches the exact (conditional)
mode.  The stored score of every entry is the plain model log-likelihood S;
attribute guidance is recomputed for the newest token at every step and only
used to rank, never added into S.  Because the per-step conditional terms
telescope, S + log P(a | x_1..t) is the full conditional score up to a
constant, so nothing else needs accumulating.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from ._validation import check_count
from .errors import LengthMismatch, NoFeasibleSequence
from .model import EOS_ID, AutoregressiveModel, Hypothesis, ModelState
from .predictors import AttributePredictor

TOP_K_SECTION = 500
TOP_K_EXPERIMENTS = 100
WINRATE_TIE_TOL = 1e-12


@dataclass(frozen=True)
class BeamConfig:
    """``top_k`` presets: 500 (:data:`TOP_K_SECTION`) or 100 (:data:`TOP_K_EXPERIMENTS`)."""

    beam_size: int = 5
    top_k: int = TOP_K_SECTION
    alpha: float = 1.0
    max_len: int | None = None

    def __post_init__(self):
        check_count(self.beam_size, "beam_size", 1)
        check_count(self.top_k, "top_k", 1)
        if not self.alpha >= 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        if self.max_len is not None:
            check_count(self.max_len, "max_len", 0)


@dataclass
class BeamEntry:
    hypothesis: Hypothesis
    guidance: float = 0.0
    frozen: bool = False
    state: ModelState | None = field(default=None, repr=False, compare=False)
    rank: float = field(default=0.0, repr=False, compare=False)

    @property
    def score(self) -> float:
        return self.hypothesis.logprob


def _top_k(lp: np.ndarray, k: int) -> list[int]:
    order = np.argsort(-lp, kind="stable")[:k]
    return [int(t) for t in order if lp[t] > -math.inf]


def _run(model, config, *, length=None, predictor=None, target=None, prompt=()):
    max_len = config.max_len
    if max_len is None:
        max_len = model.max_len - len(prompt) if model.max_len is not None else 64
    if length is not None:
        max_len = length
    guided = predictor is not None and config.alpha > 0

    start = model.prompt_state(prompt)
    beam = [BeamEntry(Hypothesis((), 0.0, False), state=start)]
    while any(not e.frozen for e in beam):
        # (entry, parent state, token); the child state is built only for survivors
        candidates = [(e, None, None) for e in beam if e.frozen]
        for e in beam:
            if e.frozen:
                continue
            prefix = e.hypothesis.seq
            lp = model.log_probs(e.state)
            if len(prefix) >= max_len:
                masked = np.full_like(lp, -np.inf)
                masked[EOS_ID] = lp[EOS_ID]
                lp = masked
            elif length is not None:
                lp = lp.copy()
                lp[EOS_ID] = -np.inf
            for w in _top_k(lp, config.top_k):
                s = e.hypothesis.logprob + float(lp[w])
                g = predictor.log_prob(target, prefix, e.state, w) if predictor is not None else 0.0
                rank = s + config.alpha * g if guided else s
                if rank == -math.inf:
                    continue
                done = w == EOS_ID
                seq = prefix if done else prefix + (w,)
                entry = BeamEntry(Hypothesis(seq, s, done), g, done, rank=rank)
                candidates.append((entry, e.state, w))
        candidates.sort(key=lambda c: (-c[0].rank, c[0].hypothesis.seq, c[0].frozen))
        beam = []
        for entry, parent, w in candidates[:config.beam_size]:
            if parent is not None and not entry.frozen:
                entry.state = model.step(parent, w)
            beam.append(entry)
    return beam


def _finalize(beam, use_guidance):
    def final(e):
        return e.score + e.guidance if use_guidance else e.score
    return sorted(beam, key=lambda e: (-final(e), e.hypothesis.seq))


def beam_search(model: AutoregressiveModel, config: BeamConfig = BeamConfig(), *,
                prompt: Sequence[int] = ()) -> list[Hypothesis]:
    """Plain beam search; EOS competes as an ordinary continuation.

    Returns completed hypotheses sorted by log-likelihood.
    """
    beam = _run(model, config, prompt=prompt)
    return [e.hypothesis for e in _finalize(beam, False)]


def length_constrained_beam(model: AutoregressiveModel, length: int,
                            config: BeamConfig = BeamConfig(), *,
                            prompt: Sequence[int] = ()) -> list[Hypothesis]:
    """Beam search whose outputs have exactly ``length`` tokens.

    EOS gets log-probability -inf before step ``length`` (the other tokens are
    not renormalised) and is the only continuation at step ``length``.
    """
    check_count(length, "length", 0)
    beam = _run(model, config, length=length, prompt=prompt)
    if not beam:
        raise NoFeasibleSequence(f"no beam entry reached length {length} with positive mass")
    return [e.hypothesis for e in _finalize(beam, False)]


def conditional_beam(model: AutoregressiveModel, predictor: AttributePredictor, target,
                     config: BeamConfig = BeamConfig(), *,
                     prompt: Sequence[int] = ()) -> list[BeamEntry]:
    """Attribute-conditional beam search.

    Each live hypothesis proposes its ``top_k`` continuations by model
    log-probability; candidates are ranked by S + alpha * log P_clf(target |
    prefix, candidate).  Finished entries are returned ordered by
    S + log P_clf(target | finished output), with ``alpha`` left out.  The
    returned :class:`BeamEntry` objects expose both S (``score``) and that
    final guidance term (``guidance``).
    """
    predictor.check_target(target)
    beam = _run(model, config, predictor=predictor, target=target, prompt=prompt)
    return _finalize(beam, True)


class Winrate(NamedTuple):
    frac_a: float
    frac_tie: float
    frac_b: float


def winrate(a_outputs: Sequence[Hypothesis], b_outputs: Sequence[Hypothesis]) -> Winrate:
    """Fraction of aligned inputs where each side found the higher log-likelihood."""
    if len(a_outputs) != len(b_outputs):
        raise LengthMismatch(f"{len(a_outputs)} vs {len(b_outputs)} outputs")
    if not a_outputs:
        raise ValueError("winrate needs at least one aligned pair")
    a_wins = b_wins = ties = 0
    for a, b in zip(a_outputs, b_outputs):
        sa, sb = a.logprob, b.logprob
        if sa == sb or abs(sa - sb) <= WINRATE_TIE_TOL:
            ties += 1
        elif sa > sb:
            a_wins += 1
        else:
            b_wins += 1
    n = len(a_outputs)
    return Winrate(a_wins / n, ties / n, b_wins / n)
