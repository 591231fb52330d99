"""First-order projective MST parsing: Eisner's O(n^3) dynamic program over
edge-factored arc scores, trained with a structured averaged perceptron.
"""

from __future__ import annotations

from typing import Sequence

from ..linear_model import AveragedPerceptron, train_perceptron
from ..treebank import DepTree, Sentence, is_projective, projectivize
from .features import extract_first_order_features
from .model import MST1, ParserModel, build_vocab, make_parser_model, require_kind

_NEG = float("-inf")

# Chart directions: L = head on the right, R = head on the left.
_L, _R = 0, 1


def eisner_decode(scores: Sequence[Sequence[float]]) -> list[int]:
    """Maximum-scoring projective head assignment for ``scores[head][dep]``.

    ``scores`` is (n+1) x (n+1) with row/column 0 for the artificial root;
    entries with dep 0 or head == dep are ignored.  Ties resolve to the first
    candidate in a fixed ascending split-point order, so equal-scoring inputs
    always yield the same tree.
    """
    n = len(scores) - 1
    if n < 1:
        raise ValueError("need at least one token")
    # comp[i][j][d]: best complete span i..j with the head on side d
    # inc[i][j][d]: best span whose outermost arc connects i and j
    comp = [[[0.0, 0.0] for _ in range(n + 1)] for _ in range(n + 1)]
    inc = [[[0.0, 0.0] for _ in range(n + 1)] for _ in range(n + 1)]
    comp_bp = [[[-1, -1] for _ in range(n + 1)] for _ in range(n + 1)]
    inc_bp = [[[-1, -1] for _ in range(n + 1)] for _ in range(n + 1)]

    for length in range(1, n + 1):
        for i in range(0, n + 1 - length):
            j = i + length
            best, arg = _NEG, -1
            for q in range(i, j):
                value = comp[i][q][_R] + comp[q + 1][j][_L]
                if value > best:
                    best, arg = value, q
            inc[i][j][_R] = best + scores[i][j]
            inc[i][j][_L] = (best + scores[j][i]) if i > 0 else _NEG
            inc_bp[i][j][_R] = arg
            inc_bp[i][j][_L] = arg

            best, arg = _NEG, -1
            for q in range(i + 1, j + 1):
                value = inc[i][q][_R] + comp[q][j][_R]
                if value > best:
                    best, arg = value, q
            comp[i][j][_R] = best
            comp_bp[i][j][_R] = arg

            best, arg = _NEG, -1
            for q in range(i, j):
                value = comp[i][q][_L] + inc[q][j][_L]
                if value > best:
                    best, arg = value, q
            comp[i][j][_L] = best if i > 0 else _NEG
            comp_bp[i][j][_L] = arg

    heads = [0] * n

    def backtrack(i: int, j: int, direction: int, complete: bool) -> None:
        if i == j:
            return
        if complete:
            q = comp_bp[i][j][direction]
            if direction == _R:
                backtrack(i, q, _R, False)
                backtrack(q, j, _R, True)
            else:
                backtrack(i, q, _L, True)
                backtrack(q, j, _L, False)
        else:
            q = inc_bp[i][j][direction]
            if direction == _R:
                heads[j - 1] = i
            else:
                heads[i - 1] = j
            backtrack(i, q, _R, True)
            backtrack(q + 1, j, _L, True)

    backtrack(0, n, _R, True)
    return heads


def arc_scores(pm: ParserModel, sentence: Sentence) -> list[list[float]]:
    """Score every candidate arc with the model's first-order features."""
    n = len(sentence)
    scores = [[0.0] * (n + 1) for _ in range(n + 1)]
    model = pm.model
    for head in range(n + 1):
        for dep in range(1, n + 1):
            if head == dep:
                continue
            fv = extract_first_order_features(sentence, head, dep, pm.vocab)
            scores[head][dep] = model.score(fv)
    return scores


def eisner_parse(pm: ParserModel, sentence: Sentence) -> DepTree:
    """Globally optimal projective parse under the trained edge-factored scores."""
    require_kind(pm, MST1)
    heads = eisner_decode(arc_scores(pm, sentence))
    return DepTree(sentence, tuple(heads))


def train_mst1(gold: Sequence[DepTree], epochs: int = 10, seed: int = 0) -> ParserModel:
    """Structured averaged perceptron: decode, then add gold-arc features and
    subtract predicted-arc features wherever the two trees differ.  Gold trees
    are projectivized so the decoder can reach them."""
    vocab = build_vocab(gold)
    prepared = [tree if is_projective(tree) else projectivize(tree) for tree in gold]

    def update(p: AveragedPerceptron, tree: DepTree) -> None:
        sentence = tree.sentence
        n = len(sentence)
        fvs = {}
        scores = [[0.0] * (n + 1) for _ in range(n + 1)]
        for head in range(n + 1):
            for dep in range(1, n + 1):
                if head == dep:
                    continue
                fv = extract_first_order_features(sentence, head, dep, vocab)
                fvs[(head, dep)] = fv
                scores[head][dep] = p.score(fv)
        predicted = eisner_decode(scores)
        for dep in range(1, n + 1):
            gold_head = tree.head(dep)
            pred_head = predicted[dep - 1]
            if gold_head != pred_head:
                p.update(fvs[(gold_head, dep)], 1.0)
                p.update(fvs[(pred_head, dep)], -1.0)

    model = train_perceptron(prepared, update, epochs=epochs, seed=seed)
    return make_parser_model(MST1, model, vocab, gold)
