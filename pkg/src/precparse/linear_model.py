"""Sparse linear models: averaged-perceptron machinery, a binary MaxEnt classifier,
and a versioned text serialization with bit-exact round-trips.

Feature vectors are plain ``dict[str, float]`` maps; indicator features carry
value 1.0.  The bias lives under the reserved weight name ``__BIAS__`` and is
never part of a feature vector.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from typing import Callable, Sequence, TypeVar

import numpy as np
from scipy import sparse

from .errors import DataError, ModelFormatError

FeatureVector = dict[str, float]

BIAS = "__BIAS__"

PERCEPTRON_AVERAGED = "perceptron_averaged"
MAXENT = "maxent"

RISKY = "risky"
SAFE = "safe"

_FORMAT_MAGIC = "precparse-model"
_FORMAT_VERSION = "1"


@dataclass
class LinearModel:
    """A sparse weight map with a kind tag and free-form training metadata."""

    kind: str
    weights: dict[str, float]
    metadata: dict[str, str] = field(default_factory=dict)

    def score(self, fv: FeatureVector) -> float:
        """Dot product of weights and features plus bias; unknown features score 0."""
        w = self.weights
        total = w.get(BIAS, 0.0)
        for name, value in fv.items():
            weight = w.get(name)
            if weight is not None:
                total += weight * value
        return total


@dataclass
class RiskModel:
    """A MaxEnt model predicting Pr(decision is wrong) for one feature-set flavor."""

    model: LinearModel
    feature_set_id: str

    def __post_init__(self):
        from .riskiness import FEATURE_SETS  # local import to avoid a cycle

        if self.feature_set_id not in FEATURE_SETS:
            raise DataError(f"unknown feature set {self.feature_set_id!r}")


def sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def predict_risk(rm: RiskModel, fv: FeatureVector) -> float:
    """Probability in (0,1) that the decision described by ``fv`` is wrong."""
    p = sigmoid(rm.model.score(fv))
    return min(max(p, 1e-15), 1.0 - 1e-15)


# ---------------------------------------------------------------------------
# Averaged perceptron
# ---------------------------------------------------------------------------


class AveragedPerceptron:
    """Mutable weights with lazy averaging over one snapshot per training item.

    ``tick`` marks the end of an item; the averaged weights are the arithmetic
    mean of the weight vector after each tick.
    """

    def __init__(self):
        self.weights: dict[str, float] = {}
        self._totals: dict[str, float] = {}
        self._stamp: dict[str, int] = {}
        self._step = 0

    def score(self, fv: FeatureVector) -> float:
        w = self.weights
        total = 0.0
        for name, value in fv.items():
            weight = w.get(name)
            if weight is not None:
                total += weight * value
        return total

    def update(self, fv: FeatureVector, scale: float) -> None:
        """w[f] += scale * value for every feature in ``fv``."""
        if scale == 0.0:
            return
        w = self.weights
        totals = self._totals
        stamp = self._stamp
        step = self._step
        for name, value in fv.items():
            current = w.get(name, 0.0)
            totals[name] = totals.get(name, 0.0) + current * (step - stamp.get(name, 0))
            stamp[name] = step
            w[name] = current + scale * value

    def tick(self) -> None:
        self._step += 1

    def averaged(self) -> dict[str, float]:
        if self._step == 0:
            return {}
        out = {}
        for name, current in self.weights.items():
            total = self._totals.get(name, 0.0) + current * (self._step - self._stamp.get(name, 0))
            mean = total / self._step
            if mean != 0.0:
                out[name] = mean
        return out


Item = TypeVar("Item")


def train_perceptron(
    items: Sequence[Item],
    update_fn: Callable[[AveragedPerceptron, Item], None],
    epochs: int,
    seed: int,
    metadata: dict[str, str] | None = None,
) -> LinearModel:
    """Run ``update_fn`` over shuffled items for several epochs; return averaged weights.

    ``update_fn`` decodes one item against the current weights and applies any
    perceptron updates through the ``AveragedPerceptron`` it is handed.
    """
    if epochs < 1:
        raise DataError(f"epochs must be >= 1, got {epochs}")
    perceptron = AveragedPerceptron()
    rng = random.Random(seed)
    order = list(range(len(items)))
    for _ in range(epochs):
        rng.shuffle(order)
        for idx in order:
            update_fn(perceptron, items[idx])
            perceptron.tick()
    meta = dict(metadata or {})
    meta.setdefault("epochs", str(epochs))
    meta.setdefault("seed", str(seed))
    return LinearModel(kind=PERCEPTRON_AVERAGED, weights=perceptron.averaged(), metadata=meta)


# ---------------------------------------------------------------------------
# MaxEnt (binary logistic regression)
# ---------------------------------------------------------------------------


def _index_examples(examples: Sequence[tuple[FeatureVector, str]]):
    """Map feature names to columns (bias = column 0) and build a CSR design matrix."""
    names = sorted({name for fv, _ in examples for name in fv})
    col = {name: i + 1 for i, name in enumerate(names)}
    rows, cols, vals = [], [], []
    y = np.zeros(len(examples))
    for i, (fv, label) in enumerate(examples):
        if label not in (RISKY, SAFE):
            raise DataError(f"label must be {RISKY!r} or {SAFE!r}, got {label!r}")
        y[i] = 1.0 if label == RISKY else 0.0
        rows.append(i)
        cols.append(0)
        vals.append(1.0)
        for name, value in fv.items():
            if not math.isfinite(value):
                raise DataError(f"non-finite value {value!r} for feature {name!r}")
            rows.append(i)
            cols.append(col[name])
            vals.append(value)
    x = sparse.csr_matrix(
        (vals, (rows, cols)), shape=(len(examples), len(names) + 1), dtype=np.float64
    )
    return names, x, y


def _objective_and_grad(x, y, w: np.ndarray, l2_sigma: float):
    """L2-regularized negative log-likelihood and its gradient (bias unregularized)."""
    z = x @ w
    # log(1 + e^z) - y*z, computed stably
    nll = float(np.sum(np.logaddexp(0.0, z) - y * z))
    p = 1.0 / (1.0 + np.exp(-np.clip(z, -500, 500)))
    grad = x.T @ (p - y)
    reg = 1.0 / (l2_sigma * l2_sigma)
    nll += 0.5 * reg * float(np.dot(w[1:], w[1:]))
    grad[1:] += reg * w[1:]
    return nll, grad


def maxent_objective(
    examples: Sequence[tuple[FeatureVector, str]],
    weights: dict[str, float],
    l2_sigma: float = 1.0,
) -> tuple[float, dict[str, float]]:
    """Objective value and analytic gradient at an arbitrary weight map.

    Exposed so the gradient can be checked against finite differences.
    """
    names, x, y = _index_examples(examples)
    w = np.zeros(len(names) + 1)
    w[0] = weights.get(BIAS, 0.0)
    for i, name in enumerate(names):
        w[i + 1] = weights.get(name, 0.0)
    value, grad = _objective_and_grad(x, y, w, l2_sigma)
    grad_map = {BIAS: float(grad[0])}
    for i, name in enumerate(names):
        grad_map[name] = float(grad[i + 1])
    return value, grad_map


def train_maxent(
    examples: Sequence[tuple[FeatureVector, str]],
    l2_sigma: float = 1.0,
    tol: float = 1e-6,
    max_iter: int = 500,
    metadata: dict[str, str] | None = None,
) -> LinearModel:
    """Fit a binary MaxEnt model by full-batch gradient descent with backtracking.

    Minimizes sum of per-example log-losses plus (1/(2 sigma^2)) * ||w||^2 with
    the bias left unregularized; stops when the gradient max-norm drops below
    ``tol`` or after ``max_iter`` accepted steps.  Deterministic throughout.
    """
    labels = {label for _, label in examples}
    if labels != {RISKY, SAFE}:
        raise DataError(f"need at least one example of each label, got labels {sorted(labels)}")
    if l2_sigma <= 0:
        raise DataError(f"l2_sigma must be positive, got {l2_sigma}")
    names, x, y = _index_examples(examples)
    w = np.zeros(len(names) + 1)
    value, grad = _objective_and_grad(x, y, w, l2_sigma)
    step_size = 1.0 / max(1.0, float(len(examples)))
    n_iter = 0
    while n_iter < max_iter and float(np.max(np.abs(grad))) >= tol:
        grad_sq = float(np.dot(grad, grad))
        t = step_size * 2.0
        accepted = False
        for _ in range(60):
            candidate = w - t * grad
            cand_value, cand_grad = _objective_and_grad(x, y, candidate, l2_sigma)
            if cand_value <= value - 1e-4 * t * grad_sq:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            break  # step size underflow: numerically converged
        assert cand_value <= value, "objective must not increase on an accepted step"
        w, value, grad = candidate, cand_value, cand_grad
        step_size = t
        n_iter += 1
    weights = {}
    if w[0] != 0.0:
        weights[BIAS] = float(w[0])
    for i, name in enumerate(names):
        if w[i + 1] != 0.0:
            weights[name] = float(w[i + 1])
    meta = dict(metadata or {})
    meta.setdefault("l2_sigma", repr(l2_sigma))
    meta.setdefault("iterations", str(n_iter))
    return LinearModel(kind=MAXENT, weights=weights, metadata=meta)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def save_model(model: LinearModel, path: str) -> None:
    """Versioned line-oriented text format; feature lines are sorted for stable bytes."""
    header_meta = json.dumps(model.metadata, sort_keys=True, ensure_ascii=False)
    names = sorted(model.weights)
    for name in names:
        if "\t" in name or "\n" in name:
            raise DataError(f"feature name {name!r} contains a tab or newline")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{_FORMAT_MAGIC}\t{_FORMAT_VERSION}\t{model.kind}\t{header_meta}\n")
        for name in names:
            fh.write(f"{name}\t{model.weights[name]:.17g}\n")


def load_model(path: str) -> LinearModel:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        parts = header.split("\t")
        if len(parts) != 4 or parts[0] != _FORMAT_MAGIC:
            raise ModelFormatError(f"{path}: not a precparse model file")
        if parts[1] != _FORMAT_VERSION:
            raise ModelFormatError(
                f"{path}: unsupported model format version {parts[1]!r} (expected {_FORMAT_VERSION})"
            )
        kind = parts[2]
        try:
            metadata = json.loads(parts[3])
        except json.JSONDecodeError as exc:
            raise ModelFormatError(f"{path}: bad metadata header: {exc}") from None
        weights = {}
        for line_no, raw in enumerate(fh, start=2):
            line = raw.rstrip("\n")
            if not line:
                continue
            try:
                name, value = line.split("\t")
                weights[name] = float(value)
            except ValueError:
                raise ModelFormatError(f"{path}: malformed weight line {line_no}") from None
    return LinearModel(kind=kind, weights=weights, metadata=metadata)
