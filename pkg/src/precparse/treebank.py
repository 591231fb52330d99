"""Sentence/tree data types, CoNLL-X I/O, projectivity, splitting and a synthetic treebank generator.

Conventions: token indices are 1-based, index 0 is the artificial root and never
appears as a CoNLL row.  An abstained head is represented by ``ABSTAINED``
(``None`` in Python) in memory and by ``_`` in the HEAD column on disk.
"""

from __future__ import annotations

import hashlib
import random
import zlib
from dataclasses import dataclass
from typing import Callable, Final, Iterable, Optional, Sequence

from .errors import ConllParseError, DataError, TreeStructureError

ABSTAINED: Final = None

ROOT_FORM: Final = "<ROOT>"
ROOT_POS: Final = "<ROOT>"


@dataclass(frozen=True)
class Token:
    """One input token: 1-based position, surface form and coarse/fine POS tags."""

    index: int
    form: str
    pos: str
    fine_pos: str

    def __post_init__(self):
        if self.index < 1:
            raise DataError(f"token index must be >= 1, got {self.index}")
        if not self.form:
            raise DataError(f"token {self.index} has an empty form")
        if not self.pos:
            raise DataError(f"token {self.index} ({self.form!r}) has an empty POS tag")


@dataclass(frozen=True)
class Sentence:
    """An ordered sequence of tokens indexed 1..n with no gaps."""

    tokens: tuple[Token, ...]

    def __post_init__(self):
        for i, tok in enumerate(self.tokens, start=1):
            if tok.index != i:
                raise DataError(f"token indices must be 1..n; position {i} has index {tok.index}")

    def __len__(self) -> int:
        return len(self.tokens)

    def __iter__(self):
        return iter(self.tokens)

    def forms(self) -> list[str]:
        """Forms padded with the artificial root at position 0."""
        return [ROOT_FORM] + [t.form for t in self.tokens]

    def pos_tags(self) -> list[str]:
        """Coarse POS tags padded with the artificial root at position 0."""
        return [ROOT_POS] + [t.pos for t in self.tokens]


def _check_tree(heads: Sequence[int], n: int) -> None:
    """Raise unless ``heads`` (1-based tokens, values in 0..n) forms a tree rooted at 0."""
    if len(heads) != n:
        raise TreeStructureError(f"expected {n} heads, got {len(heads)}")
    for dep, head in enumerate(heads, start=1):
        if not 0 <= head <= n:
            raise TreeStructureError(f"token {dep}: head {head} out of range 0..{n}")
        if head == dep:
            raise TreeStructureError(f"token {dep} is its own head")
    # Each token has exactly one in-edge by construction, so tree-ness reduces
    # to every token reaching the root without revisiting itself.
    for start in range(1, n + 1):
        seen = set()
        node = start
        while node != 0:
            if node in seen:
                raise TreeStructureError(f"cycle through token {start} (heads={list(heads)})")
            seen.add(node)
            node = heads[node - 1]


@dataclass(frozen=True)
class DepTree:
    """A sentence with a full head assignment forming a tree rooted at index 0."""

    sentence: Sentence
    heads: tuple[int, ...]

    def __post_init__(self):
        _check_tree(self.heads, len(self.sentence))

    def __len__(self) -> int:
        return len(self.sentence)

    def head(self, dep: int) -> int:
        """Head of 1-based token ``dep``."""
        return self.heads[dep - 1]

    def children(self) -> list[list[int]]:
        """Dependents of each node 0..n, in surface order."""
        kids: list[list[int]] = [[] for _ in range(len(self.heads) + 1)]
        for dep, head in enumerate(self.heads, start=1):
            kids[head].append(dep)
        return kids


@dataclass(frozen=True)
class PartialDepTree:
    """A head assignment in which individual tokens may be ABSTAINED.

    Assigned tokens form set A, abstained tokens set S; the assigned arcs must
    be acyclic (abstained tokens act as detached fragment roots).
    """

    sentence: Sentence
    heads: tuple[Optional[int], ...]

    def __post_init__(self):
        n = len(self.sentence)
        if len(self.heads) != n:
            raise TreeStructureError(f"expected {n} head entries, got {len(self.heads)}")
        for dep, head in enumerate(self.heads, start=1):
            if head is ABSTAINED:
                continue
            if not 0 <= head <= n:
                raise TreeStructureError(f"token {dep}: head {head} out of range 0..{n}")
            if head == dep:
                raise TreeStructureError(f"token {dep} is its own head")
        for start in range(1, n + 1):
            seen = set()
            node: Optional[int] = start
            while node != 0 and node is not ABSTAINED:
                if node in seen:
                    raise TreeStructureError(f"cycle through token {start} among assigned arcs")
                seen.add(node)
                node = self.heads[node - 1]

    def __len__(self) -> int:
        return len(self.sentence)

    def assigned(self) -> list[int]:
        """1-based indices of tokens that have a head (the set A)."""
        return [i for i, h in enumerate(self.heads, start=1) if h is not ABSTAINED]

    def abstained(self) -> list[int]:
        """1-based indices of tokens without a head (the set S)."""
        return [i for i, h in enumerate(self.heads, start=1) if h is ABSTAINED]

    @staticmethod
    def from_tree(tree: DepTree) -> "PartialDepTree":
        return PartialDepTree(tree.sentence, tuple(tree.heads))


@dataclass(frozen=True)
class CorpusSplit:
    """Disjoint corpus roles: parser training, risk training, development, test."""

    parser_train: tuple[DepTree, ...]
    risk_train: tuple[DepTree, ...]
    dev: tuple[DepTree, ...]
    test: tuple[DepTree, ...]


# ---------------------------------------------------------------------------
# CoNLL-X reading and writing
# ---------------------------------------------------------------------------

_UNDERSCORE = "_"


def _parse_conllx_blocks(path: str):
    """Yield (sentence_start_line_no, rows) per sentence; rows are column lists."""
    rows: list[tuple[int, list[str]]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line.strip():
                if rows:
                    yield rows
                    rows = []
                continue
            cols = line.split("\t")
            if len(cols) < 8:
                raise ConllParseError(
                    f"expected >= 8 tab-separated columns, got {len(cols)}", line_no
                )
            rows.append((line_no, cols))
    if rows:
        yield rows


def _rows_to_sentence_and_heads(rows) -> tuple[Sentence, list[Optional[int]], int]:
    tokens = []
    heads: list[Optional[int]] = []
    first_line = rows[0][0]
    for expected_id, (line_no, cols) in enumerate(rows, start=1):
        raw_id = cols[0]
        if "-" in raw_id or "." in raw_id:
            raise ConllParseError(
                f"ID ranges / empty nodes are not supported (got {raw_id!r})", line_no
            )
        try:
            tok_id = int(raw_id)
        except ValueError:
            raise ConllParseError(f"non-integer ID column {raw_id!r}", line_no) from None
        if tok_id != expected_id:
            raise ConllParseError(f"token IDs must run 1..n; expected {expected_id}, got {tok_id}", line_no)
        form, cpos, pos = cols[1], cols[3], cols[4]
        if not form:
            raise ConllParseError("empty FORM column", line_no)
        head_col = cols[6]
        if head_col == _UNDERSCORE:
            heads.append(ABSTAINED)
        else:
            try:
                heads.append(int(head_col))
            except ValueError:
                raise ConllParseError(f"non-integer HEAD column {head_col!r}", line_no) from None
        fine = pos if pos != _UNDERSCORE else cpos
        tokens.append(Token(index=tok_id, form=form, pos=cpos, fine_pos=fine))
    return Sentence(tuple(tokens)), heads, first_line


def read_conllx(path: str) -> list[DepTree]:
    """Read gold trees from a CoNLL-X file; every token must have an integer head."""
    trees = []
    for sent_no, rows in enumerate(_parse_conllx_blocks(path), start=1):
        sentence, heads, first_line = _rows_to_sentence_and_heads(rows)
        if any(h is ABSTAINED for h in heads):
            raise ConllParseError(
                f"sentence {sent_no}: HEAD '_' not allowed in a gold treebank", first_line
            )
        try:
            trees.append(DepTree(sentence, tuple(heads)))
        except TreeStructureError as exc:
            raise TreeStructureError(f"sentence {sent_no} (line {first_line}): {exc}") from None
    return trees


def read_conllx_partial(path: str) -> list[PartialDepTree]:
    """Read possibly-abstained parses; HEAD '_' marks an abstained token."""
    trees = []
    for sent_no, rows in enumerate(_parse_conllx_blocks(path), start=1):
        sentence, heads, first_line = _rows_to_sentence_and_heads(rows)
        try:
            trees.append(PartialDepTree(sentence, tuple(heads)))
        except TreeStructureError as exc:
            raise TreeStructureError(f"sentence {sent_no} (line {first_line}): {exc}") from None
    return trees


def write_conllx(trees: Iterable[PartialDepTree | DepTree], path: str) -> None:
    """Write standard 10-column CoNLL-X; abstained heads become HEAD '_'."""
    with open(path, "w", encoding="utf-8") as fh:
        for tree in trees:
            heads = tree.heads
            for tok, head in zip(tree.sentence, heads):
                head_col = _UNDERSCORE if head is ABSTAINED else str(head)
                fh.write(
                    "\t".join(
                        (
                            str(tok.index),
                            tok.form,
                            _UNDERSCORE,
                            tok.pos,
                            tok.fine_pos,
                            _UNDERSCORE,
                            head_col,
                            _UNDERSCORE,
                            _UNDERSCORE,
                            _UNDERSCORE,
                        )
                    )
                )
                fh.write("\n")
            fh.write("\n")


def sentence_fingerprint(tree: DepTree) -> str:
    """Stable per-sentence digest over forms, tags and heads (train/risk overlap checks)."""
    parts = []
    for tok, head in zip(tree.sentence, tree.heads):
        parts.append(f"{tok.form}\x01{tok.pos}\x01{tok.fine_pos}\x01{head}")
    blob = "\x02".join(parts).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()[:16]


def corpus_fingerprint(trees: Sequence[DepTree]) -> str:
    """Order-insensitive digest of a whole corpus."""
    blob = "\n".join(sorted(sentence_fingerprint(t) for t in trees)).encode("ascii")
    return hashlib.sha256(blob).hexdigest()[:16]


# ---------------------------------------------------------------------------
# Projectivity
# ---------------------------------------------------------------------------


def _is_descendant(heads: Sequence[int], node: int, ancestor: int) -> bool:
    while node != 0:
        node = heads[node - 1]
        if node == ancestor:
            return True
    return ancestor == 0


def is_projective(tree: DepTree) -> bool:
    """True iff every token strictly between a head and its dependent descends from the head."""
    heads = tree.heads
    for dep, head in enumerate(heads, start=1):
        lo, hi = (head, dep) if head < dep else (dep, head)
        for between in range(lo + 1, hi):
            if not _is_descendant(heads, between, head):
                return False
    return True


def projectivize(tree: DepTree) -> DepTree:
    """Lift dependents of non-projective arcs to their grandparent until projective.

    Each lift moves one dependent closer to the root, so termination is
    guaranteed (the all-tokens-under-root tree is projective).
    """
    heads = list(tree.heads)

    def first_bad_dep() -> int | None:
        for dep, head in enumerate(heads, start=1):
            lo, hi = (head, dep) if head < dep else (dep, head)
            for between in range(lo + 1, hi):
                if not _is_descendant(heads, between, head):
                    return dep
        return None

    while (dep := first_bad_dep()) is not None:
        head = heads[dep - 1]
        heads[dep - 1] = 0 if head == 0 else heads[head - 1]
    return DepTree(tree.sentence, tuple(heads))


# ---------------------------------------------------------------------------
# Synthetic treebank generation
# ---------------------------------------------------------------------------

# Prepositions carry a per-form probability of attaching to the verb rather
# than the preceding object noun.  Forms near 0.5 are irreducibly ambiguous,
# which is what gives the risk models something to find.
_PREP_PROFILE: Final = (
    ("of", 0.05),
    ("to", 0.85),
    ("from", 0.80),
    ("by", 0.75),
    ("in", 0.50),
    ("on", 0.50),
    ("for", 0.45),
    ("at", 0.55),
    ("with", 0.35),
    ("as", 0.40),
)

_DETS: Final = ("the", "a", "this", "these", "some", "each")

_NOUN_VOCAB = 1200
_VERB_VOCAB = 600
_ADJ_VOCAB = 300
_ADV_VOCAB = 150


def _zipf_weights(n: int, exponent: float = 1.1) -> list[float]:
    return [1.0 / (rank**exponent) for rank in range(1, n + 1)]


class _Zipf:
    def __init__(self, items: Sequence[str], weights: Sequence[float]):
        self.items = list(items)
        total = sum(weights)
        acc = 0.0
        self.cum = []
        for w in weights:
            acc += w / total
            self.cum.append(acc)

    def draw(self, rng: random.Random) -> str:
        u = rng.random()
        lo, hi = 0, len(self.cum) - 1
        while lo < hi:
            mid = (lo + hi) // 2
            if self.cum[mid] < u:
                lo = mid + 1
            else:
                hi = mid
        return self.items[lo]


class _Generator:
    """Head-outward projective sentence generator over a small V/N/P/D/J/R grammar.

    Attachment ambiguity is built in: prepositional phrases after a verb pick
    their head from the current right frontier (verb, object noun, noun of the
    previous PP), so the same surface string arises from different trees;
    noun compounds vs. double objects add [V n n] ambiguity.
    """

    def __init__(self, rng: random.Random):
        self.rng = rng
        self.nouns = _Zipf([f"n{i}" for i in range(_NOUN_VOCAB)], _zipf_weights(_NOUN_VOCAB))
        self.verbs = _Zipf([f"v{i}" for i in range(_VERB_VOCAB)], _zipf_weights(_VERB_VOCAB))
        self.adjs = _Zipf([f"j{i}" for i in range(_ADJ_VOCAB)], _zipf_weights(_ADJ_VOCAB))
        self.advs = _Zipf([f"r{i}" for i in range(_ADV_VOCAB)], _zipf_weights(_ADV_VOCAB))
        self.dets = _Zipf(_DETS, _zipf_weights(len(_DETS)))
        self.preps = _Zipf(
            [form for form, _ in _PREP_PROFILE], _zipf_weights(len(_PREP_PROFILE))
        )
        self.verb_bias = dict(_PREP_PROFILE)

    # Each node is a mutable [form, pos, left_subtrees, right_subtrees] cell;
    # flattening left-to-right yields the surface order, so the output is
    # projective by construction.

    def sentence(self, budget: int):
        self.budget = budget
        if self.budget >= 2 and self.rng.random() < 0.08:
            root_child = self.noun_phrase()
        else:
            root_child = self.verb_clause()
        return root_child

    def _take(self) -> bool:
        if self.budget <= 0:
            return False
        self.budget -= 1
        return True

    def _node(self, form: str, pos: str):
        return [form, pos, [], []]

    def _attach_pp(self, frontier: list) -> None:
        """Generate one PP and attach it to a frontier node chosen by the
        preposition's verb-vs-noun bias; the PP's noun joins the frontier."""
        pp = self.prep_phrase()
        rng = self.rng
        noun_sites = [node for node in frontier if node[1] == "N"]
        if noun_sites and rng.random() >= self.verb_bias[pp[0]]:
            site = noun_sites[rng.randrange(len(noun_sites))]
        else:
            site = frontier[0]
        site[3].append(pp)
        del frontier[frontier.index(site) + 1 :]
        if pp[3] and pp[3][-1][1] == "N":
            frontier.append(pp[3][-1])

    def verb_clause(self):
        self._take()
        node = self._node(self.verbs.draw(self.rng), "V")
        rng = self.rng
        subj = None
        if rng.random() < 0.85 and self.budget > 0:
            subj = self.noun_phrase(allow_pp=False)
            node[2].append(subj)
        if subj is not None and rng.random() < 0.22 and self.budget > 1:
            # PP between subject and verb: inside the subject or on the verb
            pp = self.prep_phrase()
            if rng.random() >= self.verb_bias[pp[0]]:
                subj[3].append(pp)
            else:
                node[2].append(pp)
        if rng.random() < 0.12 and self.budget > 0:
            self._take()
            node[2].append(self._node(self.advs.draw(self.rng), "R"))
        frontier = [node]
        if rng.random() < 0.72 and self.budget > 0:
            obj = self.noun_phrase(allow_pp=False, allow_compound=True)
            node[3].append(obj)
            frontier.append(obj)
            if rng.random() < 0.10 and self.budget > 0:
                # double object: a second bare noun under the verb
                second = self.noun_phrase(allow_pp=False, bare=True)
                node[3].append(second)
                frontier = [node, second]
        while rng.random() < 0.50 and self.budget > 1:
            self._attach_pp(frontier)
        if rng.random() < 0.10 and self.budget > 0:
            self._take()
            node[3].append(self._node(self.advs.draw(self.rng), "R"))
        return node

    def noun_phrase(self, allow_pp: bool = True, allow_compound: bool = False, bare: bool = False):
        self._take()
        node = self._node(self.nouns.draw(self.rng), "N")
        rng = self.rng
        if bare:
            return node
        if allow_compound and rng.random() < 0.14 and self.budget > 0:
            self._take()
            node[2].append(self._node(self.nouns.draw(self.rng), "N"))
        if rng.random() < 0.40 and self.budget > 0:
            self._take()
            node[2].insert(0, self._node(self.adjs.draw(self.rng), "J"))
        if rng.random() < 0.50 and self.budget > 0:
            self._take()
            node[2].insert(0, self._node(self.dets.draw(self.rng), "D"))
        if allow_pp and rng.random() < 0.30 and self.budget > 1:
            node[3].append(self.prep_phrase())
        return node

    def prep_phrase(self):
        self._take()
        node = self._node(self.preps.draw(self.rng), "P")
        if self.budget > 0:
            node[3].append(self.noun_phrase(allow_pp=False))
        return node


def _emit(node, tokens: list, heads: list[int]) -> int:
    """Flatten a subtree left-to-right; returns the head's 1-based index."""
    left_idxs = [_emit(child, tokens, heads) for child in node[2]]
    my_idx = len(tokens) + 1
    tokens.append((node[0], node[1]))
    heads.append(0)
    for idx in left_idxs:
        heads[idx - 1] = my_idx
    for child in node[3]:
        heads[_emit(child, tokens, heads) - 1] = my_idx
    return my_idx


def generate_treebank(grammar_seed: int, n_sentences: int, max_len: int) -> list[DepTree]:
    """Generate a deterministic, fully projective synthetic treebank.

    The grammar covers verbs, nouns, prepositions, determiners, adjectives and
    adverbs; PP attachment is genuinely ambiguous (the same [V .. N P ..]
    surface arises from both verb and noun attachment), and lexical forms are
    Zipf-distributed so held-out data contains unseen words.
    """
    if max_len < 1:
        raise DataError(f"max_len must be >= 1, got {max_len}")
    rng = random.Random(grammar_seed)
    gen = _Generator(rng)
    trees = []
    for _ in range(n_sentences):
        budget = rng.randint(1, max_len)
        root_child = gen.sentence(budget)
        tokens: list[tuple[str, str]] = []
        heads: list[int] = []
        root_idx = _emit(root_child, tokens, heads)
        heads[root_idx - 1] = 0
        sent = Sentence(
            tuple(
                Token(index=i, form=form, pos=pos, fine_pos=pos)
                for i, (form, pos) in enumerate(tokens, start=1)
            )
        )
        trees.append(DepTree(sent, tuple(heads)))
    return trees


# ---------------------------------------------------------------------------
# Splitting and jackknifing
# ---------------------------------------------------------------------------


def split_corpus(
    trees: Sequence[DepTree],
    fractions: tuple[float, float, float, float],
    seed: int,
) -> CorpusSplit:
    """Deterministic shuffle followed by a contiguous four-way split."""
    if len(fractions) != 4:
        raise DataError("exactly four split fractions are required")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise DataError(f"split fractions must sum to 1, got {sum(fractions)!r}")
    order = list(trees)
    random.Random(seed).shuffle(order)
    n = len(order)
    bounds = []
    acc = 0.0
    for frac in fractions[:3]:
        acc += frac
        bounds.append(int(round(acc * n)))
    b1, b2, b3 = bounds
    return CorpusSplit(
        parser_train=tuple(order[:b1]),
        risk_train=tuple(order[b1:b2]),
        dev=tuple(order[b2:b3]),
        test=tuple(order[b3:]),
    )


ParserTrainer = Callable[[Sequence[DepTree]], Callable[[Sentence], DepTree]]


def jackknife_parse(
    trees: Sequence[DepTree],
    k_folds: int,
    parser_trainer: ParserTrainer,
) -> list[tuple[DepTree, DepTree]]:
    """Parse every sentence with a model that never saw it in training.

    Fold membership is round-robin by position; the output keeps the input
    order and pairs each gold tree with its held-out prediction.
    """
    if k_folds < 2:
        raise DataError(f"k_folds must be >= 2, got {k_folds}")
    if len(trees) < k_folds:
        raise DataError(f"need at least {k_folds} trees for {k_folds}-fold jackknifing")
    predictions: list[DepTree | None] = [None] * len(trees)
    for fold in range(k_folds):
        train = [t for i, t in enumerate(trees) if i % k_folds != fold]
        parse = parser_trainer(train)
        for i, tree in enumerate(trees):
            if i % k_folds == fold:
                predictions[i] = parse(tree.sentence)
    return [(gold, pred) for gold, pred in zip(trees, predictions)]  # type: ignore[misc]
