"""Greedy easy-first parsing: at every step, perform the best-scoring attachment
between adjacent partial-tree roots anywhere in the sentence.

The per-step trace (applied action, best and second-best scores, pending count,
state features) is kept because the riskiness models train on it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import AbstractSet, Optional, Sequence

from ..errors import DataError
from ..linear_model import AveragedPerceptron, FeatureVector, train_perceptron
from ..treebank import DepTree, Sentence
from .features import NONE_SYM, UNK_SYM, distance_bin
from .model import EASY_FIRST, ParserModel, build_vocab, make_parser_model, require_kind

ATTACH_LEFT = "attach_left"
ATTACH_RIGHT = "attach_right"

# Stand-in margin width when a step has a single legal action.
SINGLE_ACTION_MARGIN = 1e6


@dataclass(frozen=True)
class ParserAction:
    """One decision: attach kinds carry the (head, dependent) edge they build."""

    kind: str
    position: int
    produced_edge: Optional[tuple[int, int]] = None

    def __post_init__(self):
        attaches = self.kind in (ATTACH_LEFT, ATTACH_RIGHT, "left_arc", "right_arc")
        if attaches != (self.produced_edge is not None):
            raise DataError(f"action {self.kind!r} must carry an edge iff it attaches")


@dataclass(frozen=True)
class TraceStep:
    action: ParserAction
    best_score: float
    second_best_score: float
    n_pending: int
    state_features: FeatureVector

    def __post_init__(self):
        if self.best_score < self.second_best_score:
            raise DataError("best_score must be >= second_best_score")


@dataclass(frozen=True)
class ActionTrace:
    sentence: Sentence
    steps: tuple[TraceStep, ...]


class EasyFirstState:
    """Pending list of partial-tree roots plus per-node child bookkeeping."""

    def __init__(self, sentence: Sentence, vocab: Optional[AbstractSet[str]] = None):
        n = len(sentence)
        self.sentence = sentence
        self.pending: list[int] = list(range(n + 1))  # 0 is the artificial root
        self.forms = sentence.forms()
        self.tags = sentence.pos_tags()
        if vocab is not None:
            self.forms = [
                f if i == 0 or f in vocab else UNK_SYM for i, f in enumerate(self.forms)
            ]
        self.leftmost_child = [0] * (n + 1)  # 0 = none
        self.rightmost_child = [0] * (n + 1)
        self.subtree_size = [1] * (n + 1)

    def legal_actions(self) -> list[ParserAction]:
        actions = []
        pending = self.pending
        for i in range(len(pending) - 1):
            left, right = pending[i], pending[i + 1]
            actions.append(ParserAction(ATTACH_RIGHT, i, (left, right)))
            if left != 0:  # the root can never become a dependent
                actions.append(ParserAction(ATTACH_LEFT, i, (right, left)))
        return actions

    def apply(self, action: ParserAction) -> None:
        head, dep = action.produced_edge
        if dep < head:
            if self.leftmost_child[head] == 0 or dep < self.leftmost_child[head]:
                self.leftmost_child[head] = dep
        else:
            if dep > self.rightmost_child[head]:
                self.rightmost_child[head] = dep
        self.subtree_size[head] += self.subtree_size[dep]
        self.pending.remove(dep)

    # -- features ----------------------------------------------------------

    def _slot(self, pending_pos: int) -> tuple[str, str, str, str, str]:
        """(form, pos, leftmost-child pos, rightmost-child pos, span bin) of a pending slot."""
        if pending_pos < 0 or pending_pos >= len(self.pending):
            return NONE_SYM, NONE_SYM, NONE_SYM, NONE_SYM, "0"
        node = self.pending[pending_pos]
        lc = self.leftmost_child[node]
        rc = self.rightmost_child[node]
        return (
            self.forms[node],
            self.tags[node],
            self.tags[lc] if lc else NONE_SYM,
            self.tags[rc] if rc else NONE_SYM,
            distance_bin(self.subtree_size[node]),
        )

    def action_features(self, action: ParserAction) -> FeatureVector:
        i = action.position
        af, ap, alc, arc_, alen = self._slot(i)
        bf, bp, blc, brc, blen = self._slot(i + 1)
        _, l1p, l1lc, l1rc, _ = self._slot(i - 1)
        _, l2p, _, _, _ = self._slot(i - 2)
        _, r1p, r1lc, r1rc, _ = self._slot(i + 2)
        _, r2p, _, _, _ = self._slot(i + 3)
        head, dep = action.produced_edge
        gap = distance_bin(abs(head - dep))
        base = [
            "bias",
            f"af={af}",
            f"ap={ap}",
            f"bf={bf}",
            f"bp={bp}",
            f"alc={alc}",
            f"arc={arc_}",
            f"blc={blc}",
            f"brc={brc}",
            f"l1p={l1p}",
            f"l2p={l2p}",
            f"r1p={r1p}",
            f"r2p={r2p}",
            f"l1c={l1lc}|{l1rc}",
            f"r1c={r1lc}|{r1rc}",
            f"alen={alen}",
            f"blen={blen}",
            f"gap={gap}",
            f"ap,bp={ap}|{bp}",
            f"af,bf={af}|{bf}",
            f"af,bp={af}|{bp}",
            f"ap,bf={ap}|{bf}",
            f"afp,bfp={af}|{ap}|{bf}|{bp}",
            f"ap,bp,len={ap}|{bp}|{alen}|{blen}",
            f"a,kids,b={ap}|{arc_}|{blc}|{bp}",
            f"l1,a,b={l1p}|{ap}|{bp}",
            f"a,b,r1={ap}|{bp}|{r1p}",
            f"l2,l1,a={l2p}|{l1p}|{ap}",
            f"b,r1,r2={bp}|{r1p}|{r2p}",
            f"l1,a,b,r1={l1p}|{ap}|{bp}|{r1p}",
        ]
        prefix = "AR~" if action.kind == ATTACH_RIGHT else "AL~"
        return dict.fromkeys((prefix + name for name in base), 1.0)


def extract_easy_first_state_features(state: EasyFirstState, action: ParserAction) -> FeatureVector:
    """The features the parser itself scores ``action`` with in ``state``."""
    return state.action_features(action)


def _pick(scored: list[tuple[float, ParserAction, FeatureVector]]):
    """Deterministic argmax: score, then smaller head, shorter arc, ATTACH_RIGHT first."""

    def key(entry):
        score, action, _ = entry
        head, dep = action.produced_edge
        return (score, -head, -abs(head - dep), action.kind == ATTACH_RIGHT)

    best = max(scored, key=key)
    runner_up = None
    for entry in scored:
        if entry is best:
            continue
        if runner_up is None or entry[0] > runner_up[0]:
            runner_up = entry
    second = runner_up[0] if runner_up is not None else best[0] - SINGLE_ACTION_MARGIN
    return best, second


def easy_first_parse(pm: ParserModel, sentence: Sentence) -> tuple[DepTree, ActionTrace]:
    """Parse one sentence, returning the tree and the full per-action trace."""
    require_kind(pm, EASY_FIRST)
    n = len(sentence)
    heads = [0] * n
    steps = []
    state = EasyFirstState(sentence, pm.vocab)
    while len(state.pending) > 1:
        scored = [
            (pm.model.score(fv), action, fv)
            for action in state.legal_actions()
            for fv in (state.action_features(action),)
        ]
        best, second = _pick(scored)
        score, action, fv = best
        head, dep = action.produced_edge
        heads[dep - 1] = head
        steps.append(
            TraceStep(
                action=action,
                best_score=score,
                second_best_score=second,
                n_pending=len(state.pending),
                state_features=fv,
            )
        )
        state.apply(action)
    tree = DepTree(sentence, tuple(heads))
    return tree, ActionTrace(sentence, tuple(steps))


def _saturated(dep: int, gold_children: Sequence[Sequence[int]], heads: list[int]) -> bool:
    return all(heads[child - 1] == dep for child in gold_children[dep])


def train_easy_first(gold: Sequence[DepTree], epochs: int = 10, seed: int = 0) -> ParserModel:
    """Error-driven training: when the model's best action is invalid for the gold
    tree, penalize it, reward the best currently-valid action, and apply the
    valid one.  An attachment is valid iff its edge is a gold edge whose
    dependent already has all of its gold children."""
    vocab = build_vocab(gold)

    def update(p: AveragedPerceptron, tree: DepTree) -> None:
        n = len(tree)
        heads = [0] * n
        gold_children = tree.children()
        state = EasyFirstState(tree.sentence, vocab)
        while len(state.pending) > 1:
            scored = [
                (p.score(fv), action, fv)
                for action in state.legal_actions()
                for fv in (state.action_features(action),)
            ]
            best, _ = _pick(scored)

            def is_valid(action: ParserAction) -> bool:
                head, dep = action.produced_edge
                return tree.head(dep) == head and _saturated(dep, gold_children, heads)

            chosen = best
            if not is_valid(best[1]):
                valid = [entry for entry in scored if is_valid(entry[1])]
                if valid:
                    chosen, _ = _pick(valid)
                    p.update(chosen[2], 1.0)
                    p.update(best[2], -1.0)
                # No valid action means the gold tree is not reachable
                # (non-projective); follow the model without updating.
            head, dep = chosen[1].produced_edge
            heads[dep - 1] = head
            state.apply(chosen[1])

    model = train_perceptron(list(gold), update, epochs=epochs, seed=seed)
    return make_parser_model(EASY_FIRST, model, vocab, gold)


# ---------------------------------------------------------------------------
# Trace serialization (JSON lines, one sentence per line)
# ---------------------------------------------------------------------------


def write_traces(traces: Sequence[ActionTrace], path: str) -> None:
    import json

    with open(path, "w", encoding="utf-8") as fh:
        for trace in traces:
            record = {
                "n": len(trace.sentence),
                "steps": [
                    {
                        "kind": step.action.kind,
                        "position": step.action.position,
                        "edge": list(step.action.produced_edge),
                        "best": step.best_score,
                        "second": step.second_best_score,
                        "n_pending": step.n_pending,
                        "features": step.state_features,
                    }
                    for step in trace.steps
                ],
            }
            fh.write(json.dumps(record, sort_keys=True))
            fh.write("\n")


def read_traces(path: str, sentences: Sequence[Sentence]) -> list[ActionTrace]:
    """Rebuild traces against their (aligned) sentences."""
    import json

    traces = []
    with open(path, "r", encoding="utf-8") as fh:
        records = [json.loads(line) for line in fh if line.strip()]
    if len(records) != len(sentences):
        raise DataError(
            f"{path}: {len(records)} traces for {len(sentences)} sentences"
        )
    for record, sentence in zip(records, sentences):
        if record["n"] != len(sentence):
            raise DataError(f"{path}: trace length {record['n']} != sentence length {len(sentence)}")
        steps = tuple(
            TraceStep(
                action=ParserAction(
                    kind=raw["kind"],
                    position=raw["position"],
                    produced_edge=tuple(raw["edge"]),
                ),
                best_score=raw["best"],
                second_best_score=raw["second"],
                n_pending=raw["n_pending"],
                state_features=raw["features"],
            )
            for raw in record["steps"]
        )
        traces.append(ActionTrace(sentence, steps))
    return traces
