"""ParserModel container and persistence shared by the three parser families."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

from ..errors import ModelMismatchError
from ..linear_model import LinearModel, load_model, save_model
from ..treebank import DepTree, sentence_fingerprint

EASY_FIRST = "easy_first"
SHIFT_REDUCE = "shift_reduce"
MST1 = "mst1"

PARSER_KINDS = (EASY_FIRST, SHIFT_REDUCE, MST1)

# Bump when the corresponding feature templates change shape.
TEMPLATE_VERSIONS = {
    EASY_FIRST: "ef-1",
    SHIFT_REDUCE: "sr-1",
    MST1: "fo-1",
}


@dataclass(frozen=True)
class ParserModel:
    """A trained parser: weights, template version, vocabulary and training fingerprints."""

    kind: str
    model: LinearModel
    feature_template_version: str
    vocab: frozenset[str]
    train_fingerprints: frozenset[str]


def require_kind(pm: ParserModel, kind: str) -> None:
    if pm.kind != kind:
        raise ModelMismatchError(f"expected a {kind} model, got {pm.kind}")


def build_vocab(gold: Sequence[DepTree], min_count: int = 2) -> frozenset[str]:
    """Forms seen at least ``min_count`` times; everything else maps to the unknown symbol."""
    counts: dict[str, int] = {}
    for tree in gold:
        for tok in tree.sentence:
            counts[tok.form] = counts.get(tok.form, 0) + 1
    return frozenset(form for form, c in counts.items() if c >= min_count)


def make_parser_model(kind: str, model: LinearModel, vocab: frozenset[str], gold: Sequence[DepTree]) -> ParserModel:
    return ParserModel(
        kind=kind,
        model=model,
        feature_template_version=TEMPLATE_VERSIONS[kind],
        vocab=vocab,
        train_fingerprints=frozenset(sentence_fingerprint(t) for t in gold),
    )


def save_parser_model(pm: ParserModel, path: str) -> None:
    meta = dict(pm.model.metadata)
    meta["parser_kind"] = pm.kind
    meta["template_version"] = pm.feature_template_version
    meta["vocab"] = json.dumps(sorted(pm.vocab))
    meta["train_fingerprints"] = json.dumps(sorted(pm.train_fingerprints))
    save_model(
        LinearModel(kind=pm.model.kind, weights=pm.model.weights, metadata=meta), path
    )


def load_parser_model(path: str) -> ParserModel:
    raw = load_model(path)
    meta = dict(raw.metadata)
    kind = meta.pop("parser_kind", None)
    if kind not in PARSER_KINDS:
        raise ModelMismatchError(f"{path}: not a parser model (kind={kind!r})")
    version = meta.pop("template_version", None)
    expected = TEMPLATE_VERSIONS[kind]
    if version != expected:
        raise ModelMismatchError(
            f"{path}: feature templates {version!r} do not match this build ({expected!r})"
        )
    vocab = frozenset(json.loads(meta.pop("vocab", "[]")))
    fingerprints = frozenset(json.loads(meta.pop("train_fingerprints", "[]")))
    return ParserModel(
        kind=kind,
        model=LinearModel(kind=raw.kind, weights=raw.weights, metadata=meta),
        feature_template_version=version,
        vocab=vocab,
        train_fingerprints=fingerprints,
    )
