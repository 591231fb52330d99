"""Turning risk annotations into output: per-edge abstention (pruning), whole
parse selection under a (risk threshold R, risky-count budget K) rule, and the
grid search that tunes (K, R) for target precision levels on a dev set.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from .errors import AlignmentError, DataError
from .evaluation import evaluate
from .riskiness import RiskAnnotatedTree
from .treebank import ABSTAINED, DepTree, PartialDepTree

GRID_RISK_THRESHOLDS = tuple(i / 100 for i in range(0, 51))  # 0.00 .. 0.50 step 0.01
GRID_MAX_RISKY = tuple(range(0, 5))  # K in 0..4

DEFAULT_PRECISION_TARGETS = tuple((890 + 5 * i) / 1000 for i in range(21))  # 0.89 .. 0.99


@dataclass(frozen=True)
class SelectionParams:
    """R: flag decisions with risk strictly above this; K: how many flagged
    decisions a sentence may carry and still be selected."""

    risk_threshold: float
    max_risky: int

    def __post_init__(self):
        if not 0.0 <= self.risk_threshold <= 1.0:
            raise DataError(f"risk_threshold must be in [0,1], got {self.risk_threshold}")
        if self.max_risky < 0:
            raise DataError(f"max_risky must be >= 0, got {self.max_risky}")


def prune(rat: RiskAnnotatedTree, risk_threshold: float) -> PartialDepTree:
    """Keep a head iff its risk is <= threshold; abstain otherwise."""
    if rat.edge_risks is None:
        raise DataError("pruning needs per-edge risks (action-only annotation given)")
    heads = tuple(
        head if risk <= risk_threshold else ABSTAINED
        for head, risk in zip(rat.tree.heads, rat.edge_risks)
    )
    return PartialDepTree(rat.tree.sentence, heads)


def count_risky(rat: RiskAnnotatedTree, risk_threshold: float) -> int:
    return sum(1 for risk in rat.selection_risks() if risk > risk_threshold)


def select_parses(
    rats: Sequence[RiskAnnotatedTree],
    params: SelectionParams,
) -> tuple[list[DepTree], list[DepTree]]:
    """Partition full trees into (selected, rejected): selected iff at most
    ``max_risky`` decisions exceed the risk threshold.  Action-annotated trees
    are judged on their action risks."""
    selected, rejected = [], []
    for rat in rats:
        if count_risky(rat, params.risk_threshold) <= params.max_risky:
            selected.append(rat.tree)
        else:
            rejected.append(rat.tree)
    return selected, rejected


@dataclass(frozen=True)
class GridPoint:
    params: SelectionParams
    precision: float
    sentence_coverage: float
    n_selected: int


@dataclass(frozen=True)
class GridSearchResult:
    target: float
    params: Optional[SelectionParams]
    precision: Optional[float]
    sentence_coverage: Optional[float]


def evaluate_grid(
    rats: Sequence[RiskAnnotatedTree],
    gold: Sequence[DepTree],
) -> list[GridPoint]:
    """Precision and sentence coverage of every (R, K) grid point (51 x 5)."""
    if len(rats) != len(gold):
        raise AlignmentError(f"{len(rats)} annotated sentences vs {len(gold)} gold")
    points = []
    for threshold in GRID_RISK_THRESHOLDS:
        risky_counts = [count_risky(rat, threshold) for rat in rats]
        for k in GRID_MAX_RISKY:
            chosen = [i for i, count in enumerate(risky_counts) if count <= k]
            pred = [PartialDepTree.from_tree(rats[i].tree) for i in chosen]
            report = evaluate(pred, [gold[i] for i in chosen]) if chosen else None
            points.append(
                GridPoint(
                    params=SelectionParams(risk_threshold=threshold, max_risky=k),
                    precision=report.precision if report else 0.0,
                    sentence_coverage=len(chosen) / len(rats) if rats else 0.0,
                    n_selected=len(chosen),
                )
            )
    return points


def grid_search(
    rats_dev: Sequence[RiskAnnotatedTree],
    gold_dev: Sequence[DepTree],
    precision_targets: Sequence[float] = DEFAULT_PRECISION_TARGETS,
) -> list[GridSearchResult]:
    """For each precision target, the grid point maximizing dev sentence
    coverage among points meeting the target; ties prefer smaller K, then
    larger R.  Unreachable targets get an empty result row."""
    points = evaluate_grid(rats_dev, gold_dev)
    results = []
    for target in precision_targets:
        feasible = [p for p in points if p.precision >= target]
        if not feasible:
            results.append(GridSearchResult(target, None, None, None))
            continue
        best = max(
            feasible,
            key=lambda p: (
                p.sentence_coverage,
                -p.params.max_risky,
                p.params.risk_threshold,
            ),
        )
        results.append(
            GridSearchResult(target, best.params, best.precision, best.sentence_coverage)
        )
    return results


# ---------------------------------------------------------------------------
# Precision/coverage sweeps (the data behind the tradeoff curves)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SweepPoint:
    threshold: float
    precision: float
    coverage: float


def precision_coverage_sweep(
    rats: Sequence[RiskAnnotatedTree],
    gold: Sequence[DepTree],
    thresholds: Optional[Sequence[float]] = None,
) -> list[SweepPoint]:
    """Prune at each threshold and measure precision and coverage.

    Default thresholds are the sorted unique risk values (plus 0 and 1), so the
    sweep is exhaustive over distinct operating points.
    """
    if thresholds is None:
        seen = {0.0, 1.0}
        for rat in rats:
            if rat.edge_risks is None:
                raise DataError("sweep needs per-edge risks")
            seen.update(rat.edge_risks)
        thresholds = sorted(seen)
    points = []
    for threshold in thresholds:
        pruned = [prune(rat, threshold) for rat in rats]
        report = evaluate(pruned, gold)
        points.append(
            SweepPoint(threshold=threshold, precision=report.precision, coverage=report.coverage)
        )
    return points


def tradeoff_frontier(points: Sequence[SweepPoint]) -> list[SweepPoint]:
    """Pareto frontier of a sweep: strictly increasing coverage with strictly
    decreasing precision (dominated and duplicate operating points dropped)."""
    best_by_cov: dict[float, SweepPoint] = {}
    for p in points:
        cur = best_by_cov.get(p.coverage)
        if cur is None or p.precision > cur.precision:
            best_by_cov[p.coverage] = p
    frontier: list[SweepPoint] = []
    for cov in sorted(best_by_cov):
        p = best_by_cov[cov]
        while frontier and frontier[-1].precision <= p.precision:
            frontier.pop()
        frontier.append(p)
    return frontier
