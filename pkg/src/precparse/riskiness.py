"""Riskiness estimation for head attachments: ensemble disagreement and the
five learned risk-classifier feature sets, plus risk training-data generation.

Risk is oriented as probability-of-being-wrong: 1 means certainly wrong,
0 certainly right.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from .errors import DataError, ModelMismatchError, OverlapError
from .linear_model import (
    MAXENT,
    RISKY,
    SAFE,
    FeatureVector,
    LinearModel,
    RiskModel,
    load_model,
    predict_risk,
    save_model,
)
from .parsers import (
    EASY_FIRST,
    ActionTrace,
    ParserModel,
    easy_first_parse,
    extract_first_order_features,
    parse_tree,
    require_kind,
)
from .parsers.features import NONE_SYM
from .treebank import DepTree, Sentence, sentence_fingerprint

ACTION_PROCESS = "action_process"
ACTION_STATE = "action_state"
EDGE_STATE = "edge_state"
EDGE_FACTORED = "edge_factored"
EDGE_HIGHER = "edge_higher"

ACTION_SETS = (ACTION_PROCESS, ACTION_STATE)
EDGE_SETS = (EDGE_STATE, EDGE_FACTORED, EDGE_HIGHER)
FEATURE_SETS = ACTION_SETS + EDGE_SETS

KIND_ACTION = "action"
KIND_EDGE = "edge"


@dataclass(frozen=True)
class RiskAnnotatedTree:
    """A full parse plus riskiness scores: per-token edge risks, and per-action
    risks when the annotator was an action-based model (then edge_risks is None)."""

    tree: DepTree
    edge_risks: Optional[tuple[float, ...]]
    action_risks: Optional[tuple[float, ...]] = None

    def __post_init__(self):
        if self.edge_risks is None and self.action_risks is None:
            raise DataError("a RiskAnnotatedTree needs edge or action risks")
        if self.edge_risks is not None:
            if len(self.edge_risks) != len(self.tree):
                raise DataError("need exactly one edge risk per token")
            if any(not 0.0 <= r <= 1.0 for r in self.edge_risks):
                raise DataError("edge risks must lie in [0,1]")
        if self.action_risks is not None and any(
            not 0.0 <= r <= 1.0 for r in self.action_risks
        ):
            raise DataError("action risks must lie in [0,1]")

    def selection_risks(self) -> tuple[float, ...]:
        """Risks counted by parse selection: action risks when present, else edge risks."""
        if self.action_risks is not None:
            return self.action_risks
        return self.edge_risks


@dataclass(frozen=True)
class EnsembleConfig:
    """k >= 2 trained parsers; the base member's tree carries the output edges."""

    members: tuple[ParserModel, ...]
    base_index: Optional[int] = None

    def __post_init__(self):
        if len(self.members) < 2:
            raise DataError(f"an ensemble needs at least 2 members, got {len(self.members)}")

    def base(self) -> int:
        if self.base_index is not None:
            return self.base_index
        for i, member in enumerate(self.members):
            if member.kind == EASY_FIRST:
                return i
        return 0


@dataclass(frozen=True)
class RiskExample:
    features: FeatureVector
    label: str
    kind: str
    provenance: tuple[int, int]  # (sentence id, step or token index)

    def __post_init__(self):
        if self.label not in (RISKY, SAFE):
            raise DataError(f"bad label {self.label!r}")
        if self.kind not in (KIND_ACTION, KIND_EDGE):
            raise DataError(f"bad example kind {self.kind!r}")


# ---------------------------------------------------------------------------
# Ensemble riskiness
# ---------------------------------------------------------------------------


def ensemble_risk(cfg: EnsembleConfig, sentence: Sentence) -> RiskAnnotatedTree:
    """Risk 0 where all members assign the same head, 1 anywhere they disagree."""
    parses = [parse_tree(member, sentence) for member in cfg.members]
    base = parses[cfg.base()]
    risks = []
    for dep in range(1, len(sentence) + 1):
        heads = {parse.head(dep) for parse in parses}
        risks.append(0.0 if len(heads) == 1 else 1.0)
    return RiskAnnotatedTree(tree=base, edge_risks=tuple(risks))


# ---------------------------------------------------------------------------
# Feature extractors for the learned risk models
# ---------------------------------------------------------------------------


def features_action_process(trace: ActionTrace, step_index: int) -> FeatureVector:
    """Five numeric process features: sentence length, parentless-token count,
    best and second-best action scores, and their margin."""
    step = trace.steps[step_index]
    return {
        "sent_len": float(len(trace.sentence)),
        "n_parentless": float(step.n_pending - 1),
        "best_score": step.best_score,
        "second_score": step.second_best_score,
        "margin": step.best_score - step.second_best_score,
    }


def features_action_state(trace: ActionTrace, step_index: int) -> FeatureVector:
    """The parser's own scoring features for the applied action, unchanged."""
    return dict(trace.steps[step_index].state_features)


def _attaching_step(trace: ActionTrace, token: int) -> int:
    for i, step in enumerate(trace.steps):
        if step.action.produced_edge is not None and step.action.produced_edge[1] == token:
            return i
    raise DataError(f"token {token} was never attached in the trace")


def features_edge_state(trace: ActionTrace, token: int) -> FeatureVector:
    """State features of the step that attached ``token``; the label (assigned
    elsewhere) is by edge correctness, not action correctness."""
    return dict(trace.steps[_attaching_step(trace, token)].state_features)


def features_edge_factored(sentence: Sentence, predicted: DepTree, token: int) -> FeatureVector:
    """Post-hoc first-order features of the predicted arc, independent of the parsing process."""
    return extract_first_order_features(sentence, predicted.head(token), token)


def features_edge_higher(sentence: Sentence, predicted: DepTree, token: int) -> FeatureVector:
    """Edge-factored features plus sibling / child / grandparent context from
    the predicted tree."""
    fv = features_edge_factored(sentence, predicted, token)
    tags = sentence.pos_tags()
    children = predicted.children()
    head = predicted.head(token)

    def pos(i: int) -> str:
        return tags[i]

    def adjacent_siblings(node: int, parent: int) -> tuple[str, str]:
        sibs = children[parent]
        left = [s for s in sibs if s < node and s != node]
        right = [s for s in sibs if s > node]
        left_pos = pos(left[-1]) if left else NONE_SYM
        right_pos = pos(right[0]) if right else NONE_SYM
        return left_pos, right_pos

    tok_ls, tok_rs = adjacent_siblings(token, head)
    kids = children[token]
    lc = pos(kids[0]) if kids else NONE_SYM
    rc = pos(kids[-1]) if kids else NONE_SYM
    grand = predicted.head(head) if head != 0 else 0
    gp = pos(grand)
    if head != 0:
        par_ls, par_rs = adjacent_siblings(head, grand)
    else:
        par_ls, par_rs = NONE_SYM, NONE_SYM

    hp = tags[head]
    dp = tags[token]
    extra = [
        f"eh_toksib={tok_ls}|{tok_rs}",
        f"eh_toksib,dp={tok_ls}|{tok_rs}|{dp}",
        f"eh_parsib={par_ls}|{par_rs}",
        f"eh_kids={lc}|{rc}",
        f"eh_kids,dp={lc}|{rc}|{dp}",
        f"eh_gp={gp}",
        f"eh_gp,hp,dp={gp}|{hp}|{dp}",
    ]
    for name in extra:
        fv[name] = 1.0
    return fv


# ---------------------------------------------------------------------------
# Risk training data
# ---------------------------------------------------------------------------


def _action_labels(trace: ActionTrace, gold: DepTree) -> list[str]:
    """RISKY per step iff the applied action was invalid for the gold tree:
    wrong edge, or a right edge taken before the dependent was saturated."""
    gold_children = gold.children()
    heads = [0] * len(gold)
    labels = []
    for step in trace.steps:
        head, dep = step.action.produced_edge
        valid = gold.head(dep) == head and all(
            heads[c - 1] == dep for c in gold_children[dep]
        )
        labels.append(SAFE if valid else RISKY)
        heads[dep - 1] = head
    return labels


def generate_risk_examples(
    parser: ParserModel,
    risk_train: Sequence[DepTree],
    feature_set_id: str,
) -> list[RiskExample]:
    """Parse the riskiness-training corpus and emit labeled decisions.

    EDGE examples: one per token, RISKY iff the predicted head is wrong
    (a premature action that still produced a gold edge counts as SAFE).
    ACTION examples: one per parser action, RISKY iff the action was invalid.
    The parser must not have been trained on any riskiness-training sentence.
    """
    require_kind(parser, EASY_FIRST)
    if feature_set_id not in FEATURE_SETS:
        raise DataError(f"unknown feature set {feature_set_id!r}")
    overlap = [
        i
        for i, tree in enumerate(risk_train)
        if sentence_fingerprint(tree) in parser.train_fingerprints
    ]
    if overlap:
        raise OverlapError(
            f"{len(overlap)} riskiness-training sentences (first at index {overlap[0]}) "
            "were part of the parser's training data"
        )
    examples = []
    for sent_id, gold in enumerate(risk_train):
        predicted, trace = easy_first_parse(parser, gold.sentence)
        if feature_set_id in ACTION_SETS:
            labels = _action_labels(trace, gold)
            for step_index, label in enumerate(labels):
                if feature_set_id == ACTION_PROCESS:
                    fv = features_action_process(trace, step_index)
                else:
                    fv = features_action_state(trace, step_index)
                examples.append(
                    RiskExample(fv, label, KIND_ACTION, (sent_id, step_index))
                )
        else:
            for token in range(1, len(gold) + 1):
                label = SAFE if predicted.head(token) == gold.head(token) else RISKY
                if feature_set_id == EDGE_STATE:
                    fv = features_edge_state(trace, token)
                elif feature_set_id == EDGE_FACTORED:
                    fv = features_edge_factored(gold.sentence, predicted, token)
                else:
                    fv = features_edge_higher(gold.sentence, predicted, token)
                examples.append(RiskExample(fv, label, KIND_EDGE, (sent_id, token)))
    return examples


# ---------------------------------------------------------------------------
# Risk scoring of parser output
# ---------------------------------------------------------------------------


def score_risks(
    rm: RiskModel,
    parser_output: tuple[DepTree, Optional[ActionTrace]],
) -> RiskAnnotatedTree:
    """Annotate one parse with riskiness scores.

    Edge feature sets yield per-token edge risks; action feature sets yield
    per-action risks only (usable for parse selection, not for pruning).
    """
    tree, trace = parser_output
    fsid = rm.feature_set_id
    if fsid in ACTION_SETS:
        if trace is None:
            raise DataError(f"feature set {fsid} needs the parser's action trace")
        risks = []
        for step_index in range(len(trace.steps)):
            if fsid == ACTION_PROCESS:
                fv = features_action_process(trace, step_index)
            else:
                fv = features_action_state(trace, step_index)
            risks.append(predict_risk(rm, fv))
        return RiskAnnotatedTree(tree=tree, edge_risks=None, action_risks=tuple(risks))
    risks = []
    for token in range(1, len(tree) + 1):
        if fsid == EDGE_STATE:
            if trace is None:
                raise DataError("edge_state risk scoring needs the parser's action trace")
            fv = features_edge_state(trace, token)
        elif fsid == EDGE_FACTORED:
            fv = features_edge_factored(tree.sentence, tree, token)
        else:
            fv = features_edge_higher(tree.sentence, tree, token)
        risks.append(predict_risk(rm, fv))
    return RiskAnnotatedTree(tree=tree, edge_risks=tuple(risks))


def require_edge_model(rm: RiskModel) -> None:
    """Reject action-based models where per-edge risks are required."""
    if rm.feature_set_id in ACTION_SETS:
        raise ModelMismatchError(
            f"feature set {rm.feature_set_id} scores parser actions and can only "
            "drive parse selection, not per-edge abstention"
        )


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def save_risk_model(rm: RiskModel, path: str) -> None:
    meta = dict(rm.model.metadata)
    meta["feature_set"] = rm.feature_set_id
    save_model(LinearModel(rm.model.kind, rm.model.weights, meta), path)


def load_risk_model(path: str) -> RiskModel:
    raw = load_model(path)
    if raw.kind != MAXENT:
        raise ModelMismatchError(f"{path}: not a MaxEnt risk model (kind={raw.kind!r})")
    meta = dict(raw.metadata)
    fsid = meta.pop("feature_set", None)
    if fsid not in FEATURE_SETS:
        raise ModelMismatchError(f"{path}: missing or unknown feature set {fsid!r}")
    return RiskModel(LinearModel(raw.kind, raw.weights, meta), fsid)


def _escape(name: str) -> str:
    return name.replace("%", "%25").replace(" ", "%20").replace(":", "%3A")


def _unescape(name: str) -> str:
    return name.replace("%3A", ":").replace("%20", " ").replace("%25", "%")


def write_risk_examples(examples: Sequence[RiskExample], path: str) -> None:
    """Line format: label<TAB>kind<TAB>sent,idx<TAB>feature:value pairs."""
    with open(path, "w", encoding="utf-8") as fh:
        for ex in examples:
            feats = " ".join(
                f"{_escape(name)}:{ex.features[name]:.17g}" for name in sorted(ex.features)
            )
            fh.write(f"{ex.label}\t{ex.kind}\t{ex.provenance[0]},{ex.provenance[1]}\t{feats}\n")


def read_risk_examples(path: str) -> list[RiskExample]:
    examples = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line:
                continue
            try:
                label, kind, prov, feats = line.split("\t")
                sent_id, idx = prov.split(",")
                fv = {}
                if feats:
                    for pair in feats.split(" "):
                        name, value = pair.rsplit(":", 1)
                        fv[_unescape(name)] = float(value)
                examples.append(RiskExample(fv, label, kind, (int(sent_id), int(idx))))
            except (ValueError, DataError) as exc:
                raise DataError(f"{path}: bad risk example on line {line_no}: {exc}") from None
    return examples
