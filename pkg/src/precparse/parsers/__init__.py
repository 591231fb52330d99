"""The three ensemble parsers: easy-first, arc-standard shift-reduce, and
first-order projective MST (Eisner), plus shared model persistence."""

from __future__ import annotations

from ..errors import ModelMismatchError
from ..treebank import DepTree, Sentence
from .easy_first import (
    ATTACH_LEFT,
    ATTACH_RIGHT,
    SINGLE_ACTION_MARGIN,
    ActionTrace,
    EasyFirstState,
    ParserAction,
    TraceStep,
    easy_first_parse,
    extract_easy_first_state_features,
    read_traces,
    train_easy_first,
    write_traces,
)
from .eisner import arc_scores, eisner_decode, eisner_parse, train_mst1
from .features import (
    NONE_SYM,
    ROOT_SYM,
    UNK_SYM,
    distance_bin,
    extract_first_order_features,
)
from .model import (
    EASY_FIRST,
    MST1,
    PARSER_KINDS,
    SHIFT_REDUCE,
    TEMPLATE_VERSIONS,
    ParserModel,
    build_vocab,
    load_parser_model,
    make_parser_model,
    require_kind,
    save_parser_model,
)
from .shift_reduce import (
    LEFT_ARC,
    RIGHT_ARC,
    SHIFT,
    oracle_transitions,
    replay_transitions,
    shift_reduce_parse,
    train_shift_reduce,
)

TRAINERS = {
    EASY_FIRST: train_easy_first,
    SHIFT_REDUCE: train_shift_reduce,
    MST1: train_mst1,
}


def parse_tree(pm: ParserModel, sentence: Sentence) -> DepTree:
    """Kind-dispatching parse that returns just the tree."""
    if pm.kind == EASY_FIRST:
        return easy_first_parse(pm, sentence)[0]
    if pm.kind == SHIFT_REDUCE:
        return shift_reduce_parse(pm, sentence)
    if pm.kind == MST1:
        return eisner_parse(pm, sentence)
    raise ModelMismatchError(f"unknown parser kind {pm.kind!r}")
