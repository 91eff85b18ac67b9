"""Experiment harnesses behind the CLI: the search-winrate table and run manifests."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass
from typing import Sequence

from ._parallel import parallel_map
from .beam import BeamConfig, conditional_beam, length_constrained_beam, winrate
from .errors import NoFeasibleSequence
from .model import AutoregressiveModel, Hypothesis
from .predictors import ExactLengthPredictor, MonteCarloPredictor

WINRATE_COLUMNS = ("length_ratio_or_L", "method_a", "method_b", "frac_a", "frac_tie", "frac_b",
                   "beam_size", "k", "alpha")


@dataclass(frozen=True)
class WinrateRow:
    length_ratio_or_L: object
    method_a: str
    method_b: str
    frac_a: float
    frac_tie: float
    frac_b: float
    beam_size: int
    k: int
    alpha: float


@dataclass(frozen=True)
class RunManifest:
    command: str
    model_source: str
    config: dict
    seed: int
    tool_version: str
    wall_time_s: float

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2) + "\n"


def make_length_predictor(model, kind="exact-length", samples=1000, seed=0):
    if kind == "exact-length":
        return ExactLengthPredictor(model)
    if kind == "monte-carlo":
        return MonteCarloPredictor(model, samples_per_query=samples, seed=seed)
    raise ValueError(f"unknown length predictor {kind!r}")


_FAILED = Hypothesis((), -math.inf, False)


def _top(hyps):
    return hyps[0] if hyps else _FAILED


@dataclass(frozen=True)
class _Job:
    model: AutoregressiveModel
    prompt: tuple
    length: int
    config: BeamConfig
    predictor_kind: str
    samples: int
    seed: int


_PREDICTORS: dict = {}


def _predictor_for(job):
    # one predictor per (model, kind) per process so its memo is reused
    key = (id(job.model), job.predictor_kind, job.samples, job.seed)
    pred = _PREDICTORS.get(key)
    if pred is None:
        pred = _PREDICTORS[key] = make_length_predictor(job.model, job.predictor_kind,
                                                        job.samples, job.seed)
    return pred


def _run_pair(job: _Job) -> tuple[Hypothesis, Hypothesis]:
    pred = _predictor_for(job)
    cond = conditional_beam(job.model, pred, job.length, job.config, prompt=job.prompt)
    cond_top = cond[0].hypothesis if cond and cond[0].guidance > -math.inf else _FAILED
    try:
        cons_top = _top(length_constrained_beam(job.model, job.length, job.config,
                                                prompt=job.prompt))
    except NoFeasibleSequence:
        cons_top = _FAILED
    return cond_top, cons_top


def run_winrate(model: AutoregressiveModel, prompts: Sequence[Sequence[int]], *,
                lengths: Sequence[int] | None = None, ratios: Sequence[float] | None = None,
                references: Sequence[int] | None = None, beam_sizes: Sequence[int] = (5,),
                k: int = 100, alpha: float = 1.0, predictor: str = "exact-length",
                samples: int = 1000, seed: int = 0, workers: int = 1,
                return_outputs: bool = False):
    """Compare conditional beam (method a) with length-constrained beam (method b).

    Either ``lengths`` (absolute target lengths, the same for every prompt)
    or ``ratios`` with one reference length per prompt.  Returns
    :class:`WinrateRow` objects in (beam size, length/ratio) order, plus the
    raw top outputs when ``return_outputs``.
    """
    if (lengths is None) == (ratios is None):
        raise ValueError("give exactly one of lengths or ratios")
    if ratios is not None:
        if references is None or len(references) != len(prompts):
            raise ValueError("ratio mode needs one reference length per input")
        keys = list(ratios)
        targets = {r: [max(0, math.floor(r * ref + 0.5)) for ref in references] for r in ratios}
    else:
        keys = list(lengths)
        targets = {L: [L] * len(prompts) for L in lengths}

    jobs, index = [], []
    for B in beam_sizes:
        config = BeamConfig(beam_size=B, top_k=k, alpha=alpha)
        for key in keys:
            for prompt, L in zip(prompts, targets[key]):
                jobs.append(_Job(model, tuple(prompt), L, config, predictor, samples, seed))
                index.append((B, key))
    results = parallel_map(_run_pair, jobs, workers)

    rows, outputs = [], {}
    for (B, key), pair in zip(index, results):
        outputs.setdefault((B, key), []).append(pair)
    for (B, key), pairs in outputs.items():
        w = winrate([p[0] for p in pairs], [p[1] for p in pairs])
        rows.append(WinrateRow(key, "conditional", "constrained", w.frac_a, w.frac_tie, w.frac_b,
                               B, k, alpha))
    return (rows, outputs) if return_outputs else rows


def winrate_csv(rows: Sequence[WinrateRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(WINRATE_COLUMNS)
    for r in rows:
        writer.writerow([r.length_ratio_or_L, r.method_a, r.method_b, repr(r.frac_a),
                         repr(r.frac_tie), repr(r.frac_b), r.beam_size, r.k, repr(r.alpha)])
    return buf.getvalue()
