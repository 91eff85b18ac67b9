"""Exact mode search by depth-first branch-and-bound.

Two facts make the search tractable.  Extending a prefix never raises its
probability, so a prefix scoring below the best complete sequence found so
far can be discarded with its whole subtree.  And every expanded node already
has P(EOS | prefix), so each node offers one complete candidate for free.

State caching follows the "store one entry per node, rebuild on the second
child" heuristic: a node keeps only the cache entry produced by its own token.
Its first child borrows the parent's full state; if a second child is about to
be expanded the full state is reassembled from the entries stored on the path
back to the nearest ancestor holding a full state, and kept for the remaining
children.  A greedy chain of depth k therefore holds O(k) entries, not O(k^2).
"""

from __future__ import annotations

import csv
import io
import math
import sys
from dataclasses import dataclass, field, fields
from functools import partial
from typing import Iterable, Sequence

import numpy as np

from ._parallel import parallel_map
from ._validation import check_count
from .errors import BudgetExceeded, NoFeasibleSequence
from .model import EOS_ID, AutoregressiveModel, Hypothesis

DEFAULT_MAX_NODES = 1_000_000
DEFAULT_MAX_TIES = 16
TIE_TOL = 1e-12


@dataclass(frozen=True)
class SearchBudget:
    max_nodes: int = DEFAULT_MAX_NODES
    max_depth: int | None = None

    def __post_init__(self):
        check_count(self.max_nodes, "max_nodes", 1)
        if self.max_depth is not None:
            check_count(self.max_depth, "max_depth", 1)


@dataclass
class SearchStats:
    nodes_expanded: int = 0
    prunes: int = 0
    completes_considered: int = 0
    full_state_rebuilds: int = 0
    peak_cached_states: int = 0
    # Same accounting in cache entries (one per token position held).
    peak_cached_entries: int = 0

    def as_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass
class ModeResult:
    argmax: list[Hypothesis]
    exhausted: bool
    stats: SearchStats = field(default_factory=SearchStats)

    @property
    def best(self) -> Hypothesis | None:
        return self.argmax[0] if self.argmax else None

    @property
    def logprob(self) -> float:
        return self.argmax[0].logprob if self.argmax else -math.inf

    def is_empty_mode(self) -> bool:
        return any(len(h.seq) == 0 for h in self.argmax)


class _Node:
    __slots__ = ("delta", "parent", "full")

    def __init__(self, delta, parent, full=None):
        self.delta = delta
        self.parent = parent
        self.full = full


class _DFS:
    def __init__(self, model, budget, *, target_len, prune, use_cache, max_ties, prompt):
        self.model = model
        self.budget = budget
        self.target_len = target_len
        self.prune = prune
        self.use_cache = use_cache
        self.max_ties = max_ties
        self.base_state = model.prompt_state(prompt)
        if target_len is not None:
            self.depth_limit = target_len
        elif budget.max_depth is not None:
            self.depth_limit = budget.max_depth
        elif model.max_len is not None:
            self.depth_limit = model.max_len - len(prompt)
        else:
            raise ValueError("model has no max_len; set SearchBudget.max_depth")
        self.stats = SearchStats()
        self.best = -math.inf
        self.ties: list[Hypothesis] = []
        self.truncated = False
        # live cache accounting
        self._held_states = 0
        self._held_entries = 0

    # -- incumbent ------------------------------------------------------------

    def _offer(self, seq, logprob):
        self.stats.completes_considered += 1
        if logprob > self.best + TIE_TOL:
            self.best = logprob
            self.ties = [Hypothesis(seq, logprob, True)]
        elif logprob >= self.best - TIE_TOL and len(self.ties) < self.max_ties:
            self.ties.append(Hypothesis(seq, logprob, True))

    def _prunable(self, logprob):
        if not self.prune:
            return False
        if logprob < self.best - TIE_TOL:
            return True
        # Prefixes level with the incumbent can only yield ties; once the tie
        # list is full they are worthless.
        return len(self.ties) >= self.max_ties and logprob <= self.best + TIE_TOL

    # -- cache ----------------------------------------------------------------

    def _hold(self, states, entries, transient=0):
        """Adjust the held cache and record peaks.

        With the cache on, exactly one transient full state (the visiting
        node's) is alive besides the stored entries and retained states.
        """
        self._held_states += states
        self._held_entries += entries
        s = self.stats
        extra = (1, transient) if self.use_cache and transient else (0, 0)
        s.peak_cached_states = max(s.peak_cached_states, self._held_states + extra[0])
        s.peak_cached_entries = max(s.peak_cached_entries, self._held_entries + extra[1])

    def _rebuild(self, node):
        deltas = []
        cur = node
        while cur.full is None:
            deltas.append(cur.delta)
            cur = cur.parent
        self.stats.full_state_rebuilds += 1
        return self.model.assemble(cur.full, reversed(deltas))

    # -- search ---------------------------------------------------------------

    def run(self):
        root = _Node(None, None, self.base_state)
        self._hold(1, len(self.base_state))
        limit = sys.getrecursionlimit()
        need = self.depth_limit + 100
        if need > limit:
            sys.setrecursionlimit(need)
        try:
            self._expand(root, self.base_state, (), 0.0)
        finally:
            sys.setrecursionlimit(limit)

    def _expand(self, node, state, seq, logprob):
        """Visit ``node``; ``state`` is its full state, lent by the caller."""
        stats = self.stats
        if stats.nodes_expanded >= self.budget.max_nodes:
            self.truncated = True
            return
        stats.nodes_expanded += 1
        lp = self.model.log_probs(state)
        depth = len(seq)

        if self.target_len is None or depth == self.target_len:
            if lp[EOS_ID] > -math.inf:
                self._offer(seq, logprob + float(lp[EOS_ID]))
        if self.target_len is not None and depth == self.target_len:
            return

        children = [t for t in np.argsort(-lp, kind="stable").tolist()
                    if t != EOS_ID and lp[t] > -math.inf]
        if depth >= self.depth_limit:
            if any(not self._prunable(logprob + lp[t]) for t in children):
                self.truncated = True
            return

        retained = False
        for i, tok in enumerate(children):
            child_lp = logprob + float(lp[tok])
            assert child_lp <= logprob + 1e-12, "extension raised a prefix log-probability"
            if self._prunable(child_lp):
                stats.prunes += len(children) - i
                break
            if i == 0 or not self.use_cache:
                parent_state = state
            elif i == 1:
                parent_state = node.full = self._rebuild(node)
                retained = True
                self._hold(1, len(parent_state))
            else:
                parent_state = node.full
            delta = self.model.advance(parent_state, tok)
            child_state = parent_state.extend(delta)
            if self.use_cache:
                child = _Node(delta, node)
                held = (1, 1)
            else:
                child = _Node(delta, node, child_state)
                held = (1, len(child_state))
            self._hold(*held, transient=len(child_state))
            self._expand(child, child_state, seq + (tok,), child_lp)
            self._hold(-held[0], -held[1])
            if stats.nodes_expanded >= self.budget.max_nodes and i + 1 < len(children):
                self.truncated = True
                break
        if retained:
            self._hold(-1, -len(node.full))
            if node.parent is not None:  # the root keeps its base state
                node.full = None

    def result(self):
        ties = sorted(self.ties, key=lambda h: h.seq)
        return ModeResult(ties, exhausted=not self.truncated, stats=self.stats)


def _search(model, budget, *, target_len=None, prune=True, use_cache=True,
            max_ties=DEFAULT_MAX_TIES, prompt=(), strict=False):
    budget = budget or SearchBudget()
    check_count(max_ties, "max_ties", 1)
    dfs = _DFS(model, budget, target_len=target_len, prune=prune, use_cache=use_cache,
               max_ties=max_ties, prompt=tuple(prompt))
    dfs.run()
    result = dfs.result()
    if strict and not result.exhausted:
        raise BudgetExceeded("search budget exhausted before the space was covered", result)
    return result


def global_mode(model: AutoregressiveModel, budget: SearchBudget | None = None, *,
                prune: bool = True, use_cache: bool = True, max_ties: int = DEFAULT_MAX_TIES,
                prompt: Sequence[int] = (), strict: bool = False) -> ModeResult:
    """Exact unconditional mode by pruned DFS.

    Children are visited in descending conditional probability.  With
    ``prune=False`` the incumbent never prunes and the full tree is walked,
    which is the reference the pruned search must agree with.  If the budget
    runs out the best-so-far is returned with ``exhausted=False`` (or
    :class:`BudgetExceeded` is raised when ``strict``).
    """
    return _search(model, budget, prune=prune, use_cache=use_cache, max_ties=max_ties,
                   prompt=prompt, strict=strict)


def length_conditional_mode(model: AutoregressiveModel, length: int,
                            budget: SearchBudget | None = None, *, prune: bool = True,
                            use_cache: bool = True, max_ties: int = DEFAULT_MAX_TIES,
                            prompt: Sequence[int] = (), strict: bool = False) -> ModeResult:
    """Exact mode among complete sequences of exactly ``length`` tokens.

    EOS is masked above depth ``length`` and forced at it; the incumbent is the
    best length-``length`` completion.  Raises :class:`NoFeasibleSequence`
    when an exhaustive search finds no such sequence with positive mass.
    """
    check_count(length, "length", 0)
    result = _search(model, budget, target_len=length, prune=prune, use_cache=use_cache,
                     max_ties=max_ties, prompt=prompt, strict=strict)
    if result.exhausted and not result.argmax:
        raise NoFeasibleSequence(f"no sequence of length {length} has positive probability")
    return result


# -- empty-mode statistics ----------------------------------------------------

@dataclass(frozen=True)
class EmptyModeRow:
    label: str
    length_bin: object
    frac_empty_mode: float
    geomean_p_empty: float
    frac_exhausted: float
    n_models: int = 1

    CSV_COLUMNS = ("label", "length_bin", "frac_empty_mode", "geomean_p_empty", "frac_exhausted")


def _empty_mode_outcome(model, budget=None):
    result = global_mode(model, budget)
    log_p_empty = float(model.log_probs(model.initial_state())[EOS_ID])
    return result.is_empty_mode(), log_p_empty, result.exhausted


def empty_mode_report(models: Iterable[tuple[str, AutoregressiveModel]],
                      budget: SearchBudget | None = None, *, bin_of=None,
                      workers: int = 1) -> list[EmptyModeRow]:
    """Rate of empty modes and geometric-mean P(empty) per (label, length bin).

    ``bin_of(model)`` gives the bin; by default the model's ``length_bin``
    attribute.  Rows keep first-appearance order.
    """
    if bin_of is None:
        def bin_of(m):
            return getattr(m, "length_bin", "all")

    models = list(models)
    outcomes = parallel_map(partial(_empty_mode_outcome, budget=budget),
                            [m for _, m in models], workers)
    groups: dict[tuple, list] = {}
    for (label, model), outcome in zip(models, outcomes):
        groups.setdefault((label, bin_of(model)), []).append(outcome)

    rows = []
    for (label, length_bin), runs in groups.items():
        n = len(runs)
        mean_log = sum(r[1] for r in runs) / n
        rows.append(EmptyModeRow(
            label=label,
            length_bin=length_bin,
            frac_empty_mode=sum(r[0] for r in runs) / n,
            geomean_p_empty=math.exp(mean_log) if mean_log > -math.inf else 0.0,
            frac_exhausted=sum(r[2] for r in runs) / n,
            n_models=n,
        ))
    return rows


def report_to_csv(rows: Sequence[EmptyModeRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(EmptyModeRow.CSV_COLUMNS)
    for r in rows:
        writer.writerow([r.label, r.length_bin, repr(r.frac_empty_mode),
                         repr(r.geomean_p_empty), repr(r.frac_exhausted)])
    return buf.getvalue()
