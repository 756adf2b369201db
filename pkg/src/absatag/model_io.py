"""Versioned JSON model files.

Floats serialize as their shortest round-tripping decimal form, the weight
table keeps only nonzero rows sorted by feature id, and key order is fixed,
so save -> load -> save is byte-identical.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .crf import CrfParams
from .emit import FeatureEmitter
from .errors import MalformedRecord
from .labels import ALL_TAGS, NUM_TAGS

FORMAT_NAME = "absatag-model"
FORMAT_VERSION = 1


@dataclass
class TaggerModel:
    params: CrfParams
    emitter: FeatureEmitter | None = None
    vocab_ref: str | None = None


def save_model(model: TaggerModel, path: str) -> None:
    payload = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "tag_order": [t.value for t in ALL_TAGS],
        "transitions": [[float(x) for x in row] for row in model.params.transitions],
        "start": [float(x) for x in model.params.start],
        "end": [float(x) for x in model.params.end],
        "vocab_ref": model.vocab_ref,
        "emitter": None,
    }
    if model.emitter is not None:
        rows = model.emitter.nonzero_rows()
        payload["emitter"] = {
            "hash_dim": model.emitter.hash_dim,
            "hash_seed": model.emitter.hash_seed,
            "weights": {str(k): rows[k] for k in sorted(rows)},
        }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, ensure_ascii=False, indent=1)
        fh.write("\n")


def load_model(path: str) -> TaggerModel:
    with open(path, encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise MalformedRecord(f"{path}: not a valid model file ({exc})") from None
    if payload.get("format") != FORMAT_NAME:
        raise MalformedRecord(f"{path}: not an {FORMAT_NAME} file")
    if payload.get("version") != FORMAT_VERSION:
        raise MalformedRecord(
            f"{path}: unsupported model version {payload.get('version')!r}"
        )
    if payload.get("tag_order") != [t.value for t in ALL_TAGS]:
        raise MalformedRecord(f"{path}: tag order does not match this build")

    transitions = np.asarray(payload["transitions"], dtype=float)
    start = np.asarray(payload["start"], dtype=float)
    end = np.asarray(payload["end"], dtype=float)
    if transitions.shape != (NUM_TAGS, NUM_TAGS) or start.shape != (NUM_TAGS,):
        raise MalformedRecord(f"{path}: parameter shapes are wrong")
    params = CrfParams(transitions=transitions, start=start, end=end)

    emitter = None
    raw = payload.get("emitter")
    if raw is not None:
        emitter = FeatureEmitter(
            hash_dim=int(raw["hash_dim"]), hash_seed=int(raw["hash_seed"])
        )
        for key, row in raw["weights"].items():
            emitter.weights[int(key)] = np.asarray(row, dtype=float)
    return TaggerModel(
        params=params, emitter=emitter, vocab_ref=payload.get("vocab_ref")
    )
