"""Metrics for precision-biased parsing: precision / recall / coverage over
token sets, sentence coverage, ROC curves with AUC, and the preposition
attachment risk breakdown.

Token sets follow the task definition: T = all tokens, A = tokens with an
assigned head, S = abstained tokens, C = correctly assigned tokens.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import AbstractSet, Optional, Sequence

from .errors import AlignmentError, DataError
from .riskiness import RiskAnnotatedTree
from .treebank import ABSTAINED, DepTree, PartialDepTree


@dataclass(frozen=True)
class EvalReport:
    """Counts over T/A/S/C plus the derived metrics."""

    n_total: int
    n_assigned: int
    n_correct: int
    sentence_coverage_value: Optional[float] = None

    def __post_init__(self):
        if not 0 <= self.n_correct <= self.n_assigned <= self.n_total:
            raise DataError(
                f"inconsistent counts: total={self.n_total} assigned={self.n_assigned} "
                f"correct={self.n_correct}"
            )

    @property
    def n_abstained(self) -> int:
        return self.n_total - self.n_assigned

    @property
    def precision(self) -> float:
        """|C|/|A|; defined as 0 when nothing was assigned."""
        return self.n_correct / self.n_assigned if self.n_assigned else 0.0

    @property
    def recall(self) -> float:
        return self.n_correct / self.n_total if self.n_total else 0.0

    @property
    def coverage(self) -> float:
        return self.n_assigned / self.n_total if self.n_total else 0.0

    @property
    def accuracy(self) -> float:
        """Fraction of all tokens with a correct head; equals precision at full coverage."""
        return self.n_correct / self.n_total if self.n_total else 0.0

    def as_lines(self) -> list[tuple[str, float]]:
        rows = [
            ("tokens", float(self.n_total)),
            ("assigned", float(self.n_assigned)),
            ("abstained", float(self.n_abstained)),
            ("correct", float(self.n_correct)),
            ("precision", self.precision),
            ("recall", self.recall),
            ("coverage", self.coverage),
            ("accuracy", self.accuracy),
        ]
        if self.sentence_coverage_value is not None:
            rows.append(("sentence_coverage", self.sentence_coverage_value))
        return rows


def _check_aligned(pred_sentence, gold_sentence, index: int) -> None:
    if len(pred_sentence) != len(gold_sentence):
        raise AlignmentError(
            f"sentence {index + 1}: predicted length {len(pred_sentence)} != gold "
            f"length {len(gold_sentence)}"
        )
    for p_tok, g_tok in zip(pred_sentence, gold_sentence):
        if p_tok.form != g_tok.form:
            raise AlignmentError(
                f"sentence {index + 1}, token {p_tok.index}: form {p_tok.form!r} != "
                f"gold {g_tok.form!r}"
            )


def evaluate(
    pred: Sequence[PartialDepTree | DepTree],
    gold: Sequence[DepTree],
    exclude_pos: AbstractSet[str] = frozenset(),
) -> EvalReport:
    """Count T, A and C over aligned corpora; tokens whose gold POS is in
    ``exclude_pos`` are dropped from all sets."""
    if len(pred) != len(gold):
        raise AlignmentError(f"{len(pred)} predicted sentences vs {len(gold)} gold")
    n_total = n_assigned = n_correct = 0
    for i, (p, g) in enumerate(zip(pred, gold)):
        _check_aligned(p.sentence, g.sentence, i)
        for tok, p_head, g_head in zip(g.sentence, p.heads, g.heads):
            if tok.pos in exclude_pos:
                continue
            n_total += 1
            if p_head is ABSTAINED:
                continue
            n_assigned += 1
            if p_head == g_head:
                n_correct += 1
    report = EvalReport(n_total=n_total, n_assigned=n_assigned, n_correct=n_correct)
    if report.n_assigned == report.n_total:
        # full coverage collapses the three metrics onto plain accuracy
        assert report.precision == report.recall == report.accuracy
    return report


def sentence_coverage(selected: int, total: int) -> float:
    """Selected sentences over all input sentences."""
    if total <= 0:
        raise DataError("total sentence count must be positive")
    if not 0 <= selected <= total:
        raise DataError(f"selected count {selected} out of range 0..{total}")
    return selected / total


# ---------------------------------------------------------------------------
# ROC
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RocPoint:
    threshold: float
    tpr: float
    fpr: float


def roc_curve(
    risks: Sequence[tuple[float, bool]],
    n_thresholds: Optional[int] = None,
) -> tuple[list[RocPoint], float]:
    """ROC for flagging incorrect decisions as risky.

    ``risks`` pairs a risk score with whether the decision was *correct*.  A
    decision is flagged at threshold t iff its risk is strictly above t.  TPR
    is the fraction of incorrect decisions flagged, FPR the fraction of
    correct ones.  AUC uses the trapezoid rule over the full-resolution curve
    (it equals the pairwise Mann-Whitney statistic); ``n_thresholds`` only
    thins the returned points.
    """
    n_correct = sum(1 for _, ok in risks if ok)
    n_incorrect = len(risks) - n_correct
    if n_correct == 0 or n_incorrect == 0:
        raise DataError("ROC needs at least one correct and one incorrect decision")

    by_score = sorted(risks, key=lambda pair: pair[0])
    thresholds = [float("-inf")]
    for score, _ in by_score:
        if score != thresholds[-1]:
            thresholds.append(score)

    # Sweep ascending thresholds, shrinking the flagged set from everything to
    # (strictly above max) = nothing.
    points = []
    flagged_correct = n_correct
    flagged_incorrect = n_incorrect
    idx = 0
    for t in thresholds:
        while idx < len(by_score) and by_score[idx][0] <= t:
            if by_score[idx][1]:
                flagged_correct -= 1
            else:
                flagged_incorrect -= 1
            idx += 1
        points.append(
            RocPoint(
                threshold=t,
                tpr=flagged_incorrect / n_incorrect,
                fpr=flagged_correct / n_correct,
            )
        )

    auc = 0.0
    for prev, cur in zip(points, points[1:]):
        auc += (prev.fpr - cur.fpr) * (prev.tpr + cur.tpr) / 2.0

    if n_thresholds is not None and n_thresholds >= 2 and len(points) > n_thresholds:
        picks = sorted(
            {round(i * (len(points) - 1) / (n_thresholds - 1)) for i in range(n_thresholds)}
        )
        points = [points[i] for i in picks]
    return points, auc


# ---------------------------------------------------------------------------
# Preposition attachment breakdown
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Confusion:
    """Risky/safe vs incorrect/correct counts; positive = flagged risky."""

    tp: int  # risky and incorrect
    fp: int  # risky but correct
    tn: int  # safe and correct
    fn: int  # safe but incorrect

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def __add__(self, other: "Confusion") -> "Confusion":
        return Confusion(
            self.tp + other.tp, self.fp + other.fp, self.tn + other.tn, self.fn + other.fn
        )


@dataclass(frozen=True)
class PPBreakdown:
    """Per-preposition-form confusion rows plus the overall matrix."""

    overall: Confusion
    per_form: tuple[tuple[str, Confusion], ...]


def pp_breakdown(
    rats: Sequence[RiskAnnotatedTree],
    gold: Sequence[DepTree],
    risk_threshold: float,
    prep_tag: str,
) -> PPBreakdown:
    """Classify every ``prep_tag`` token as risky (risk > threshold) or safe,
    crossed with head correctness; rows are lowercased surface forms sorted by
    frequency."""
    if len(rats) != len(gold):
        raise AlignmentError(f"{len(rats)} annotated sentences vs {len(gold)} gold")
    cells: dict[str, list[int]] = {}
    for i, (rat, g) in enumerate(zip(rats, gold)):
        if rat.edge_risks is None:
            raise DataError("pp_breakdown needs edge risks (action-only annotation given)")
        _check_aligned(rat.tree.sentence, g.sentence, i)
        for tok, risk, p_head, g_head in zip(
            g.sentence, rat.edge_risks, rat.tree.heads, g.heads
        ):
            if tok.pos != prep_tag:
                continue
            risky = risk > risk_threshold
            correct = p_head == g_head
            row = cells.setdefault(tok.form.lower(), [0, 0, 0, 0])
            if risky and not correct:
                row[0] += 1
            elif risky and correct:
                row[1] += 1
            elif not risky and correct:
                row[2] += 1
            else:
                row[3] += 1
    per_form = [(form, Confusion(*counts)) for form, counts in cells.items()]
    per_form.sort(key=lambda item: (-item[1].total, item[0]))
    overall = Confusion(0, 0, 0, 0)
    for _, conf in per_form:
        overall = overall + conf
    return PPBreakdown(overall=overall, per_form=tuple(per_form))
