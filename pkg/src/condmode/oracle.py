"""Brute-force enumeration of every complete sequence of a small model.

This is the ground truth the searches are checked against, so it shares no
code with them: each candidate sequence is scored from scratch with
:func:`~condmode.model.sequence_log_prob`.
"""

from __future__ import annotations

import itertools
import math

from .errors import CondModeError
from .model import AutoregressiveModel, sequence_log_prob

ENUMERATION_LIMIT = 10**7
TIE_TOL = 1e-12


class EnumerationTooLarge(CondModeError):
    pass


def enumerate_complete(model: AutoregressiveModel, max_len: int | None = None,
                       prompt=()) -> list[tuple[tuple[int, ...], float]]:
    """All complete sequences of length <= ``max_len`` with positive mass.

    Sorted by descending log-probability; sequences whose log-probabilities
    agree within 1e-12 are listed in lexicographic token-id order.
    """
    if max_len is None:
        if model.max_len is None:
            raise ValueError("max_len required for models without a length cap")
        max_len = model.max_len - len(prompt)
    V = len(model.vocab)
    if V ** max_len > ENUMERATION_LIMIT:
        raise EnumerationTooLarge(f"{V}^{max_len} sequences exceed {ENUMERATION_LIMIT}")
    rows = []
    tokens = range(1, V)
    for length in range(max_len + 1):
        for seq in itertools.product(tokens, repeat=length):
            lp = sequence_log_prob(model, seq, True, prompt)
            if lp > -math.inf:
                rows.append((seq, lp))
    rows.sort(key=lambda r: -r[1])
    # lexicographic order inside runs of numerically tied values
    out, i = [], 0
    while i < len(rows):
        j = i + 1
        while j < len(rows) and rows[i][1] - rows[j][1] <= TIE_TOL:
            j += 1
        out.extend(sorted(rows[i:j]))
        i = j
    return out


def brute_force_mode(model, max_len=None, length=None):
    """(best log-prob, all argmax sequences) by enumeration, optionally at one length."""
    rows = enumerate_complete(model, max_len)
    if length is not None:
        rows = [r for r in rows if len(r[0]) == length]
    if not rows:
        return -math.inf, []
    best = rows[0][1]
    return best, [s for s, lp in rows if best - lp <= TIE_TOL]
