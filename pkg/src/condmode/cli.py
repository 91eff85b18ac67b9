"""``condmode`` command-line interface.

Exit codes: 0 success, 2 usage or parse error, 3 search budget exhausted,
4 infeasible constraint, 5 enumeration bound exceeded.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from pathlib import Path

from . import __version__
from .beam import (TOP_K_EXPERIMENTS, TOP_K_SECTION, BeamConfig, beam_search, conditional_beam,
                   length_constrained_beam)
from .errors import (BudgetExceeded, CondModeError, HorizonTooSmall, NoFeasibleSequence,
                     PredictorDomainError)
from .exact import SearchBudget, empty_mode_report, global_mode, length_conditional_mode, report_to_csv
from .harness import RunManifest, make_length_predictor, run_winrate, winrate_csv
from .io import file_digest, load_family_spec, load_model, read_lines
from .model import model_to_json
from .ngram import read_corpus, train
from .oracle import EnumerationTooLarge, enumerate_complete
from .predictors import ConstantPredictor, FirstTokenPredictor

EXIT_OK, EXIT_USAGE, EXIT_BUDGET, EXIT_INFEASIBLE, EXIT_ENUMERATION = 0, 2, 3, 4, 5
LN2 = math.log(2)


class UsageError(Exception):
    pass


class _Partial(Exception):
    """Raised after output was written for a search that ran out of budget."""


# -- small helpers ------------------------------------------------------------

def _int_list(text: str) -> list[int]:
    """``"4-12"`` or ``"5,20"`` (ranges are inclusive)."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        lo, sep, hi = part.partition("-")
        try:
            if sep:
                out.extend(range(int(lo), int(hi) + 1))
            else:
                out.append(int(part))
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad integer list {text!r}") from None
    if not out:
        raise argparse.ArgumentTypeError("empty list")
    return out


def _float_list(text: str) -> list[float]:
    try:
        values = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad number list {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def _fmt_lp(lp: float) -> str:
    if lp == -math.inf:
        return "-inf nats (-inf bits)"
    return f"{lp:.6f} nats ({lp / LN2:.6f} bits)"


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _source(path) -> str:
    try:
        return f"{path} sha256:{file_digest(path)}"
    except OSError:
        return str(path)


def _config(args) -> dict:
    skip = {"func", "command", "out", "out_dir"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _write_report(path, text: str, args, source: str, started: float) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    manifest = RunManifest(command=args.command, model_source=source, config=_config(args),
                           seed=args.seed, tool_version=__version__,
                           wall_time_s=round(time.perf_counter() - started, 6))
    Path(f"{path}.manifest.json").write_text(manifest.to_json(), encoding="utf-8")


def _emit(args, text_out: str, csv_out: str, json_obj, source: str, started: float) -> None:
    if args.format == "csv":
        sys.stdout.write(csv_out)
    elif args.format == "json":
        sys.stdout.write(json.dumps(json_obj, indent=2, sort_keys=True) + "\n")
    else:
        sys.stdout.write(text_out)
    if getattr(args, "out", None):
        _write_report(args.out, csv_out, args, source, started)


def _prompt_ids(model, text):
    return model.vocab.encode(text.split()) if text else ()


def _budget(args) -> SearchBudget:
    return SearchBudget(max_nodes=args.max_nodes)


# -- mode / cond-mode ---------------------------------------------------------

def _render_mode(args, model, result, source, started, extra=None):
    vocab = model.vocab
    stats = result.stats.as_dict()
    lines = []
    if not result.argmax:
        lines.append("mode: (none found)")
    for h in result.argmax:
        lines.append(f"mode: {vocab.render(h.seq)}")
    lines.append(f"logprob: {_fmt_lp(result.logprob)}")
    if len(result.argmax) > 1:
        lines.append(f"ties: {len(result.argmax)}")
    lines.append(f"exhausted: {str(result.exhausted).lower()}")
    lines.append("stats: " + " ".join(f"{k}={v}" for k, v in stats.items()))
    header = ["sequence", "length", "logprob", "exhausted", *stats]
    rows = [[vocab.render(h.seq), len(h.seq), repr(h.logprob), result.exhausted, *stats.values()]
            for h in result.argmax]
    obj = {"modes": [{"tokens": vocab.decode(h.seq), "logprob": h.logprob,
                      "log2prob": h.logprob / LN2} for h in result.argmax],
           "exhausted": result.exhausted, "stats": stats, **(extra or {})}
    _emit(args, "\n".join(lines) + "\n", _csv_text(header, rows), obj, source, started)
    if not result.exhausted and not args.allow_partial:
        raise _Partial


def cmd_mode(args) -> int:
    started = time.perf_counter()
    model = load_model(args.model)
    result = global_mode(model, _budget(args), max_ties=args.max_ties,
                         prompt=_prompt_ids(model, args.prompt))
    _render_mode(args, model, result, _source(args.model), started)
    return EXIT_OK


def cmd_cond_mode(args) -> int:
    started = time.perf_counter()
    model = load_model(args.model)
    prompt = _prompt_ids(model, args.prompt)
    if model.max_len is not None and args.length > model.max_len - len(prompt):
        raise NoFeasibleSequence(f"length {args.length} exceeds the model's maximum length")
    result = length_conditional_mode(model, args.length, _budget(args), max_ties=args.max_ties,
                                     prompt=prompt)
    _render_mode(args, model, result, _source(args.model), started, {"length": args.length})
    return EXIT_OK


# -- beam ---------------------------------------------------------------------

def _predictor(args, model):
    if args.predictor in ("exact-length", "monte-carlo"):
        if args.length is None:
            raise UsageError(f"--predictor {args.predictor} requires --length")
        return make_length_predictor(model, args.predictor, args.samples, args.seed), args.length
    if args.predictor == "first-token":
        if args.token is None:
            raise UsageError("--predictor first-token requires --token")
        return FirstTokenPredictor(model.vocab.index(args.token), model), True
    return ConstantPredictor(args.constant), None


def cmd_beam(args) -> int:
    started = time.perf_counter()
    model = load_model(args.model)
    prompt = _prompt_ids(model, args.prompt)
    config = BeamConfig(beam_size=args.beam, top_k=args.k, alpha=args.alpha, max_len=args.max_len)
    vocab = model.vocab
    if args.method == "plain":
        entries = [(h, None) for h in beam_search(model, config, prompt=prompt)]
    elif args.method == "constrained":
        if args.length is None:
            raise UsageError("--method constrained requires --length")
        entries = [(h, None) for h in length_constrained_beam(model, args.length, config,
                                                               prompt=prompt)]
    else:
        predictor, target = _predictor(args, model)
        entries = [(e.hypothesis, e.guidance)
                   for e in conditional_beam(model, predictor, target, config, prompt=prompt)]

    conditional = args.method == "conditional"
    lines, rows, objs = [], [], []
    for rank, (h, g) in enumerate(entries, 1):
        text = vocab.render(h.seq, h.complete)
        line = f"{rank}\tS={h.logprob:.6f} ({h.logprob / LN2:.6f} bits)"
        if conditional:
            line += f"\tguidance={g:.6f}"
        lines.append(f"{line}\t{text}")
        rows.append([rank, text, len(h.seq), repr(h.logprob)] + ([repr(g)] if conditional else []))
        objs.append({"rank": rank, "tokens": vocab.decode(h.seq), "logprob": h.logprob,
                     **({"guidance": g} if conditional else {})})
    header = ["rank", "sequence", "length", "logprob"] + (["guidance"] if conditional else [])
    _emit(args, "\n".join(lines) + "\n", _csv_text(header, rows), {"hypotheses": objs},
          _source(args.model), started)
    return EXIT_OK


# -- winrate ------------------------------------------------------------------

def cmd_winrate(args) -> int:
    started = time.perf_counter()
    model = load_model(args.model)
    if args.inputs:
        prompts = [_prompt_ids(model, line) for line in read_lines(args.inputs)]
    else:
        prompts = [()]
    kwargs = {}
    if args.length_ratios is not None:
        if not args.references:
            raise UsageError("--length-ratios requires --references")
        try:
            refs = [int(x) for x in read_lines(args.references)]
        except ValueError as exc:
            raise UsageError(f"bad references file: {exc}") from None
        if len(refs) != len(prompts):
            raise UsageError(f"{len(refs)} reference lengths for {len(prompts)} inputs")
        kwargs = {"ratios": args.length_ratios, "references": refs}
    else:
        kwargs = {"lengths": args.lengths}
    rows = run_winrate(model, prompts, beam_sizes=args.beam, k=args.k, alpha=args.alpha,
                       predictor=args.predictor, samples=args.samples, seed=args.seed,
                       workers=args.workers, **kwargs)
    text = "".join(f"{r.length_ratio_or_L}\tB={r.beam_size}\tconditional={r.frac_a:.3f}"
                   f"\ttie={r.frac_tie:.3f}\tconstrained={r.frac_b:.3f}\n" for r in rows)
    obj = {"rows": [r.__dict__ for r in rows]}
    _emit(args, text, winrate_csv(rows), obj, _source(args.model), started)
    return EXIT_OK


# -- replicate-figures --------------------------------------------------------

def cmd_replicate_figures(args) -> int:
    started = time.perf_counter()
    models = load_family_spec(args.spec)
    rows = empty_mode_report(models, _budget(args), workers=args.workers)
    report = report_to_csv(rows)
    source = _source(args.spec)
    out_dir = Path(args.out_dir)
    for name in ("empty_mode_rate.csv", "geomean_p_empty.csv"):
        _write_report(out_dir / name, report, args, source, started)
    text = "".join(f"{r.label}\tL={r.length_bin}\tempty_mode={r.frac_empty_mode:.3f}"
                   f"\tgeomean_p_empty={r.geomean_p_empty:.6g}\texhausted={r.frac_exhausted:.3f}\n"
                   for r in rows)
    _emit(args, text, report, {"rows": [r.__dict__ for r in rows]}, source, started)
    if any(r.frac_exhausted < 1 for r in rows) and not args.allow_partial:
        raise _Partial
    return EXIT_OK


# -- oracle -------------------------------------------------------------------

def cmd_oracle(args) -> int:
    started = time.perf_counter()
    model = load_model(args.model)
    max_len = args.max_len if args.max_len is not None else model.max_len
    if max_len is None:
        raise UsageError("--max-len is required for this model")
    rows = enumerate_complete(model, max_len)
    if args.length is not None:
        rows = [r for r in rows if len(r[0]) == args.length]
    if args.top is not None:
        rows = rows[:args.top]
    vocab = model.vocab
    text = "".join(f"{math.exp(lp):.12g}\t{lp:.6f}\t{vocab.render(seq)}\n" for seq, lp in rows)
    csv_out = _csv_text(["sequence", "length", "probability", "logprob"],
                        [[vocab.render(s), len(s), repr(math.exp(lp)), repr(lp)] for s, lp in rows])
    obj = {"rows": [{"tokens": vocab.decode(s), "probability": math.exp(lp), "logprob": lp}
                    for s, lp in rows]}
    _emit(args, text, csv_out, obj, _source(args.model), started)
    return EXIT_OK


# -- train-ngram --------------------------------------------------------------

def cmd_train_ngram(args) -> int:
    corpus = read_corpus(args.corpus, chars=args.chars)
    model = train(corpus, order=args.order, alpha=args.alpha, max_len=args.max_len)
    text = model_to_json(model)
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


# -- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--workers", type=int, default=1)
    common.add_argument("--format", choices=("text", "csv", "json"), default="text")

    search = argparse.ArgumentParser(add_help=False)
    search.add_argument("--max-nodes", type=int, default=SearchBudget().max_nodes)
    search.add_argument("--allow-partial", action="store_true",
                        help="exit 0 with the best-so-far result when the budget runs out")

    report = argparse.ArgumentParser(add_help=False)
    report.add_argument("--out", help="also write the CSV report here, with a manifest sidecar")

    parser = argparse.ArgumentParser(prog="condmode", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mode", parents=[common, search, report], help="exact global mode")
    p.add_argument("model")
    p.add_argument("--prompt", default="")
    p.add_argument("--max-ties", type=int, default=16)
    p.set_defaults(func=cmd_mode)

    p = sub.add_parser("cond-mode", parents=[common, search, report],
                       help="exact mode among outputs of one length")
    p.add_argument("model")
    p.add_argument("--length", type=int, required=True)
    p.add_argument("--prompt", default="")
    p.add_argument("--max-ties", type=int, default=16)
    p.set_defaults(func=cmd_cond_mode)

    p = sub.add_parser("beam", parents=[common, report], help="beam search")
    p.add_argument("model")
    p.add_argument("--method", choices=("plain", "constrained", "conditional"), default="plain")
    p.add_argument("--length", type=int)
    p.add_argument("--predictor", choices=("exact-length", "monte-carlo", "first-token", "constant"),
                   default="exact-length")
    p.add_argument("--token", help="target first token for --predictor first-token")
    p.add_argument("--constant", type=float, default=0.0,
                   help="log value returned by --predictor constant")
    p.add_argument("--beam", type=int, default=5)
    p.add_argument("--k", type=int, default=TOP_K_SECTION)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--max-len", type=int)
    p.add_argument("--prompt", default="")
    p.set_defaults(func=cmd_beam)

    p = sub.add_parser("winrate", parents=[common, report],
                       help="conditional vs length-constrained beam likelihood comparison")
    p.add_argument("model")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--lengths", type=_int_list)
    group.add_argument("--length-ratios", type=_float_list)
    p.add_argument("--inputs", help="prompt file, one input per line")
    p.add_argument("--references", help="reference output lengths, one per input line")
    p.add_argument("--beam", type=_int_list, default=[5])
    p.add_argument("--k", type=int, default=TOP_K_EXPERIMENTS)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--predictor", choices=("exact-length", "monte-carlo"), default="exact-length")
    p.add_argument("--samples", type=int, default=1000)
    p.set_defaults(func=cmd_winrate)

    p = sub.add_parser("replicate-figures", parents=[common, search],
                       help="empty-mode rate and geometric-mean P(empty) by length")
    p.add_argument("spec")
    p.add_argument("out_dir")
    p.set_defaults(func=cmd_replicate_figures)

    p = sub.add_parser("oracle", parents=[common, report], help="enumerate every complete sequence")
    p.add_argument("model")
    p.add_argument("--max-len", type=int)
    p.add_argument("--length", type=int, help="keep only outputs of this length")
    p.add_argument("--top", type=int)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("train-ngram", parents=[common], help="fit an n-gram model to a corpus")
    p.add_argument("corpus")
    p.add_argument("--order", type=int, default=2)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--max-len", type=int, default=64)
    p.add_argument("--chars", action="store_true", help="character-level tokens")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_train_ngram)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _Partial:
        print("condmode: search budget exhausted; result is best-so-far "
              "(use --allow-partial to accept)", file=sys.stderr)
        return EXIT_BUDGET
    except BudgetExceeded as exc:
        print(f"condmode: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except NoFeasibleSequence as exc:
        print(f"condmode: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except EnumerationTooLarge as exc:
        print(f"condmode: {exc}", file=sys.stderr)
        return EXIT_ENUMERATION
    except (UsageError, HorizonTooSmall, PredictorDomainError) as exc:
        print(f"condmode: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (CondModeError, ValueError, OSError) as exc:
        print(f"condmode: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
