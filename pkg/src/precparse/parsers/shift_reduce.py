"""Linear-time greedy arc-standard parsing over a stack and buffer.

Transitions (s1 = stack top, s2 below it, b1 = buffer front):
  SHIFT      push b1
  LEFT_ARC   add arc s1 -> s2, pop s2
  RIGHT_ARC  add arc s2 -> s1, pop s1
Every parse of an n-token sentence uses exactly 2n transitions.
"""

from __future__ import annotations

from typing import AbstractSet, Optional, Sequence

from ..linear_model import AveragedPerceptron, FeatureVector, train_perceptron
from ..treebank import DepTree, Sentence, is_projective, projectivize
from .easy_first import ParserAction
from .features import NONE_SYM, UNK_SYM, distance_bin
from .model import SHIFT_REDUCE, ParserModel, build_vocab, make_parser_model, require_kind

SHIFT = "shift"
LEFT_ARC = "left_arc"
RIGHT_ARC = "right_arc"


class _Config:
    def __init__(self, sentence: Sentence, vocab: Optional[AbstractSet[str]]):
        n = len(sentence)
        self.stack = [0]
        self.buffer_pos = 1
        self.n = n
        self.heads = [0] * n
        self.forms = sentence.forms()
        self.tags = sentence.pos_tags()
        if vocab is not None:
            self.forms = [
                f if i == 0 or f in vocab else UNK_SYM for i, f in enumerate(self.forms)
            ]
        self.leftmost_child = [0] * (n + 1)
        self.rightmost_child = [0] * (n + 1)

    def done(self) -> bool:
        return self.buffer_pos > self.n and len(self.stack) == 1

    def legal(self) -> list[str]:
        acts = []
        if self.buffer_pos <= self.n:
            acts.append(SHIFT)
        if len(self.stack) >= 2:
            if self.stack[-2] != 0:
                acts.append(LEFT_ARC)
            acts.append(RIGHT_ARC)
        return acts

    def apply(self, act: str) -> ParserAction:
        if act == SHIFT:
            self.stack.append(self.buffer_pos)
            self.buffer_pos += 1
            return ParserAction(SHIFT, len(self.stack) - 1)
        s1, s2 = self.stack[-1], self.stack[-2]
        if act == LEFT_ARC:
            head, dep = s1, s2
            del self.stack[-2]
        else:
            head, dep = s2, s1
            del self.stack[-1]
        self.heads[dep - 1] = head
        if dep < head:
            if self.leftmost_child[head] == 0 or dep < self.leftmost_child[head]:
                self.leftmost_child[head] = dep
        elif dep > self.rightmost_child[head]:
            self.rightmost_child[head] = dep
        return ParserAction(act, len(self.stack) - 1, (head, dep))

    # -- features ------------------------------------------------------------

    def _stack_slot(self, depth: int):
        if depth > len(self.stack):
            return NONE_SYM, NONE_SYM, NONE_SYM, NONE_SYM
        node = self.stack[-depth]
        lc = self.leftmost_child[node]
        rc = self.rightmost_child[node]
        return (
            self.forms[node],
            self.tags[node],
            self.tags[lc] if lc else NONE_SYM,
            self.tags[rc] if rc else NONE_SYM,
        )

    def _buffer_slot(self, offset: int):
        pos = self.buffer_pos + offset
        if pos > self.n:
            return NONE_SYM, NONE_SYM
        return self.forms[pos], self.tags[pos]

    def state_features(self, act: str) -> FeatureVector:
        s1f, s1p, s1lc, s1rc = self._stack_slot(1)
        s2f, s2p, s2lc, s2rc = self._stack_slot(2)
        _, s3p, _, _ = self._stack_slot(3)
        b1f, b1p = self._buffer_slot(0)
        b2f, b2p = self._buffer_slot(1)
        _, b3p = self._buffer_slot(2)
        if len(self.stack) >= 2:
            dist = distance_bin(self.stack[-1] - self.stack[-2])
        else:
            dist = "0"
        base = [
            "bias",
            f"s1f={s1f}",
            f"s1p={s1p}",
            f"s1fp={s1f}|{s1p}",
            f"s2f={s2f}",
            f"s2p={s2p}",
            f"s2fp={s2f}|{s2p}",
            f"s3p={s3p}",
            f"b1f={b1f}",
            f"b1p={b1p}",
            f"b1fp={b1f}|{b1p}",
            f"b2f={b2f}",
            f"b2p={b2p}",
            f"b3p={b3p}",
            f"s1kids={s1lc}|{s1rc}",
            f"s2kids={s2lc}|{s2rc}",
            f"s1p,s2p={s1p}|{s2p}",
            f"s1f,s2f={s1f}|{s2f}",
            f"s1p,s2f={s1p}|{s2f}",
            f"s1f,s2p={s1f}|{s2p}",
            f"s1p,s2p,b1p={s1p}|{s2p}|{b1p}",
            f"s1p,b1p={s1p}|{b1p}",
            f"s2p,b1p={s2p}|{b1p}",
            f"s1p,b1p,b2p={s1p}|{b1p}|{b2p}",
            f"s2p,s1kids={s2p}|{s1lc}|{s1rc}",
            f"s1p,s2kids={s1p}|{s2lc}|{s2rc}",
            f"dist={dist}",
            f"s1p,s2p,dist={s1p}|{s2p}|{dist}",
        ]
        prefix = {SHIFT: "SH~", LEFT_ARC: "LA~", RIGHT_ARC: "RA~"}[act]
        return dict.fromkeys((prefix + name for name in base), 1.0)


def _best_action(model, config: _Config) -> tuple[str, FeatureVector]:
    best = None
    # Fixed candidate order makes exact ties deterministic (first max wins).
    for act in config.legal():
        fv = config.state_features(act)
        score = model.score(fv)
        if best is None or score > best[0]:
            best = (score, act, fv)
    return best[1], best[2]


def shift_reduce_parse(pm: ParserModel, sentence: Sentence, return_actions: bool = False):
    """Greedy arc-standard parse; always yields a valid tree.

    With ``return_actions`` the applied transition sequence (length 2n) is
    returned alongside the tree.
    """
    require_kind(pm, SHIFT_REDUCE)
    config = _Config(sentence, pm.vocab)
    applied = []
    while not config.done():
        act, _ = _best_action(pm.model, config)
        applied.append(config.apply(act))
    tree = DepTree(sentence, tuple(config.heads))
    if return_actions:
        return tree, applied
    return tree


def oracle_transitions(tree: DepTree) -> list[str]:
    """Canonical transition sequence that reconstructs a projective gold tree.

    Arcs are taken as soon as the dependent is saturated; SHIFT otherwise.
    """
    gold_children = tree.children()
    config = _Config(tree.sentence, None)
    seq = []

    def saturated(dep: int) -> bool:
        return all(config.heads[c - 1] == dep for c in gold_children[dep])

    while not config.done():
        act = None
        if len(config.stack) >= 2:
            s1, s2 = config.stack[-1], config.stack[-2]
            if s2 != 0 and tree.head(s2) == s1 and saturated(s2):
                act = LEFT_ARC
            elif tree.head(s1) == s2 and saturated(s1):
                act = RIGHT_ARC
        if act is None:
            if config.buffer_pos > config.n:
                raise ValueError("no oracle transition: tree is not projective")
            act = SHIFT
        seq.append(act)
        config.apply(act)
    return seq


def replay_transitions(sentence: Sentence, transitions: Sequence[str]) -> DepTree:
    """Apply a transition sequence and return the resulting tree."""
    config = _Config(sentence, None)
    for act in transitions:
        config.apply(act)
    return DepTree(sentence, tuple(config.heads))


def train_shift_reduce(gold: Sequence[DepTree], epochs: int = 10, seed: int = 0) -> ParserModel:
    """Static-oracle training: predict at every oracle configuration, update on
    mistakes, always follow the oracle transition.  Non-projective gold trees
    are projectivized for oracle derivation only."""
    vocab = build_vocab(gold)
    prepared = [tree if is_projective(tree) else projectivize(tree) for tree in gold]

    def update(p: AveragedPerceptron, tree: DepTree) -> None:
        oracle = oracle_transitions(tree)
        config = _Config(tree.sentence, vocab)
        for gold_act in oracle:
            pred_act, pred_fv = _best_action(p, config)
            if pred_act != gold_act:
                p.update(config.state_features(gold_act), 1.0)
                p.update(pred_fv, -1.0)
            config.apply(gold_act)

    model = train_perceptron(prepared, update, epochs=epochs, seed=seed)
    return make_parser_model(SHIFT_REDUCE, model, vocab, gold)
