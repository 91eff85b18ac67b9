"""Loading models, distributions and spec files from disk or the bundled data."""

from __future__ import annotations

import hashlib
import json
from importlib import resources
from pathlib import Path

from .errors import ModelFormatError
from .model import MODEL_KINDS, AutoregressiveModel, model_from_dict
from .synthetic import ExplicitDistribution, length_family, to_autoregressive, uniform_mixture

BUNDLED_PREFIX = "bundled:"


def resolve(path) -> Path:
    """Map ``bundled:<name>`` to the packaged data file; other paths pass through."""
    path = str(path)
    if path.startswith(BUNDLED_PREFIX):
        ref = resources.files("condmode") / "data" / path[len(BUNDLED_PREFIX):]
        return Path(str(ref))
    return Path(path)


def read_text(path) -> str:
    try:
        return resolve(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise ModelFormatError(f"cannot read {path}: {exc}") from exc


def file_digest(path) -> str:
    return hashlib.sha256(resolve(path).read_bytes()).hexdigest()


def read_json(path) -> dict:
    try:
        obj = json.loads(read_text(path))
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: {exc}") from exc
    if not isinstance(obj, dict):
        raise ModelFormatError(f"{path}: expected a JSON object")
    return obj


def mixture_from_spec(obj: dict) -> ExplicitDistribution:
    try:
        clean = [s.split() for s in obj["clean"]]
        noise = [s.split() for s in obj["noise"]]
        return uniform_mixture(clean, noise, obj["epsilon"])
    except (KeyError, TypeError, ValueError, ZeroDivisionError) as exc:
        raise ModelFormatError(f"bad mixture spec: {exc}") from exc


def load_model(path) -> AutoregressiveModel:
    """Load a model from a canonical model JSON, a mixture spec JSON, or a
    distribution TSV (``probability<TAB>tokens`` per line)."""
    p = resolve(path)
    if p.suffix in (".tsv", ".txt"):
        return to_autoregressive(ExplicitDistribution.from_tsv(read_text(path)))
    obj = read_json(path)
    kind = obj.get("kind")
    if kind == "mixture":
        return to_autoregressive(mixture_from_spec(obj))
    if kind in MODEL_KINDS:
        return model_from_dict(obj)
    raise ModelFormatError(f"{path}: unknown kind {kind!r}")


def _q_function(q):
    if isinstance(q, (int, float)) and not isinstance(q, bool):
        return lambda L: float(q)
    if isinstance(q, dict):
        scale, power = float(q["scale"]), float(q.get("power", 1))
        return lambda L: scale * L ** (-power)
    raise ModelFormatError(f"bad q specification {q!r}")


def load_family_spec(path) -> list[tuple[str, AutoregressiveModel]]:
    """Expand a length-family spec into ``(label, model)`` pairs, one per
    (family, q-instance, length)."""
    obj = read_json(path)
    if obj.get("kind") != "length_family_spec":
        raise ModelFormatError(f"{path}: expected kind 'length_family_spec'")
    out = []
    try:
        for fam in obj["families"]:
            qs = fam["q"] if isinstance(fam["q"], list) else [fam["q"]]
            for L in fam["lengths"]:
                for q in qs:
                    out.extend((fam["label"], m)
                               for m in length_family(_q_function(q), fam["b"], [L]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"bad family spec: {exc}") from exc
    return out


def read_lines(path) -> list[str]:
    lines = read_text(path).split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    return lines
