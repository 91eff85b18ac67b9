"""Regenerate the bundled data files under src/condmode/data/.

    python3 scripts/make_assets.py
"""

import json
import random
from fractions import Fraction
from pathlib import Path

from condmode import model_to_json, train
from condmode.ngram import read_corpus

DATA = Path(__file__).resolve().parents[1] / "src" / "condmode" / "data"

SUBJECTS = ["the cat", "the dog", "a bird", "my friend", "the old man", "a child", "she", "he"]
VERBS = ["saw", "liked", "found", "chased", "watched", "heard"]
OBJECTS = ["the ball", "a tree", "the river", "the moon", "a small house", "the red car",
           "her friend", "the garden"]
ENDINGS = ["", "", "", "today", "at night", "in the park", "again", "for a while"]


def sentence(rng):
    words = f"{rng.choice(SUBJECTS)} {rng.choice(VERBS)} {rng.choice(OBJECTS)} {rng.choice(ENDINGS)}"
    return " ".join(words.split())


def corpus(rng, n=2000):
    lines = []
    for _ in range(n):
        u = rng.random()
        if u < 0.04:
            lines.append("")  # empty target: a low-entropy distractor
        elif u < 0.07:
            lines.append(" ".join(sentence(rng).split()[:2]))  # truncated
        else:
            lines.append(sentence(rng))
    return lines


def mixture(eps):
    clean = [f"{s} {v} {o}" for s in ("cat", "kitten") for v in ("chased", "caught")
             for o in ("mice", "rats", "birds", "moths", "flies")]
    noise = ["", "cat", "chased", "mice", "cat cat", "cat chased", "chased mice",
             "cat cat cat", "chased chased", "mice mice mice"]
    return {"kind": "mixture", "clean": clean, "noise": noise, "epsilon": eps}


def table1_demo():
    """Empty output is the global mode; each of lengths 4, 6, 8 has a fluent conditional mode."""
    by_len = {
        4: ["the meeting was postponed", "they postponed the meeting",
            "the meeting is delayed", "we delayed the meeting"],
        6: ["the meeting was postponed until friday", "they postponed the meeting until friday",
            "the meeting has been delayed again", "we will meet again on friday"],
        8: ["the board said the meeting was postponed again",
            "they postponed the meeting until friday this week",
            "the meeting has been delayed until next friday",
            "we were told the meeting would be delayed"],
    }
    units = {4: [12, 9, 8, 7], 6: [10, 8, 7, 6], 8: [9, 7, 6, 5]}
    # distractors: truncations and a repeated token
    extra = {"the": 6, "the meeting": 7, "meeting meeting": 4}
    empty_units = 14
    rows = [(Fraction(empty_units), "")]
    for L, sents in by_len.items():
        rows += [(Fraction(u), s) for u, s in zip(units[L], sents)]
    rows += [(Fraction(u), s) for s, u in extra.items()]
    total = sum(p for p, _ in rows)
    return [(p / total, s) for p, s in rows]


def main():
    rng = random.Random(0)
    DATA.mkdir(parents=True, exist_ok=True)
    lines = corpus(rng)
    (DATA / "corpus.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")

    prompts, refs = [], []
    for _ in range(20):
        words = sentence(rng).split()
        cut = rng.choice([1, 2])
        prompts.append(" ".join(words[:cut]))
        refs.append(str(len(words) - cut))
    (DATA / "prompts.txt").write_text("\n".join(prompts) + "\n", encoding="utf-8")
    (DATA / "references.txt").write_text("\n".join(refs) + "\n", encoding="utf-8")

    for name, eps in [("mixture_eps030.json", "3/10"), ("mixture_eps036.json", "9/25"),
                      ("mixture_tie.json", "1/3")]:
        (DATA / name).write_text(json.dumps(mixture(eps), indent=2) + "\n", encoding="utf-8")

    family_spec = {
        "kind": "length_family_spec",
        "families": [
            {"label": "constant-q", "b": 2, "lengths": list(range(10, 19)), "q": [1e-4]},
            {"label": "decaying-q", "b": 2, "lengths": list(range(4, 15)),
             "q": [{"scale": 0.01, "power": 1}, {"scale": 0.02, "power": 1},
                   {"scale": 0.04, "power": 1}]},
        ],
    }
    (DATA / "length_family.json").write_text(json.dumps(family_spec, indent=2) + "\n",
                                             encoding="utf-8")
    family_model = {"kind": "length_family", "vocab": ["</s>", "w0", "w1"],
                    "params": {"b": 2, "length": 14, "q": 0.0001}}
    (DATA / "family_L14.json").write_text(json.dumps(family_model, sort_keys=True) + "\n",
                                          encoding="utf-8")

    demo = table1_demo()
    text = "# empty output is modal; lengths 4/6/8 have fluent conditional modes\n"
    text += "".join(f"{p.numerator}/{p.denominator}\t{s}\n" for p, s in demo)
    (DATA / "table1_demo.tsv").write_text(text, encoding="utf-8")

    bigram = train(read_corpus(DATA / "corpus.txt"), order=2, alpha=1.0, max_len=64)
    (DATA / "ngram_bigram.json").write_text(model_to_json(bigram), encoding="utf-8")


if __name__ == "__main__":
    main()
