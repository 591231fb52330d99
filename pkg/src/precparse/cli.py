"""Command-line pipeline: generate data, train parsers, parse, train riskiness
models, prune, run the ensemble, select parses, and evaluate.

Exit codes: 0 success, 2 usage, 3 data error, 4 model mismatch.
"""

from __future__ import annotations

import functools
import sys
from concurrent.futures import ProcessPoolExecutor
from typing import Sequence

import click

from . import evaluation, precision_bias, riskiness
from .errors import DataError, ModelFormatError, ModelMismatchError
from .linear_model import train_maxent
from .parsers import (
    EASY_FIRST,
    PARSER_KINDS,
    TRAINERS,
    ParserModel,
    easy_first_parse,
    load_parser_model,
    parse_tree,
    read_traces,
    save_parser_model,
    write_traces,
)
from .riskiness import (
    FEATURE_SETS,
    EnsembleConfig,
    RiskAnnotatedTree,
    ensemble_risk,
    generate_risk_examples,
    load_risk_model,
    require_edge_model,
    save_risk_model,
    score_risks,
    write_risk_examples,
)
from .treebank import (
    DepTree,
    corpus_fingerprint,
    generate_treebank,
    read_conllx,
    read_conllx_partial,
    write_conllx,
)

EXIT_DATA_ERROR = 3
EXIT_MODEL_MISMATCH = 4


def _guarded(fn):
    """Map toolkit exceptions onto the documented exit codes."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (ModelFormatError, ModelMismatchError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_MODEL_MISMATCH)
        except (DataError, OSError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_DATA_ERROR)

    return wrapper


@click.group()
def main():
    """Precision-biased dependency parsing toolkit."""


# ---------------------------------------------------------------------------
# Parallel parsing helpers (workers load the model once)
# ---------------------------------------------------------------------------

_WORKER_MODELS: list[ParserModel] = []


def _init_workers(model_paths: Sequence[str]) -> None:
    global _WORKER_MODELS
    _WORKER_MODELS = [load_parser_model(p) for p in model_paths]


def _parse_worker(sentence):
    return parse_tree(_WORKER_MODELS[0], sentence)


def _parse_traced_worker(sentence):
    return easy_first_parse(_WORKER_MODELS[0], sentence)


def _ensemble_worker(sentence):
    return ensemble_risk(EnsembleConfig(tuple(_WORKER_MODELS)), sentence)


def _parallel_map(worker, sentences, model_paths: Sequence[str], threads: int):
    if threads <= 1:
        _init_workers(model_paths)
        return [worker(s) for s in sentences]
    with ProcessPoolExecutor(
        max_workers=threads, initializer=_init_workers, initargs=(model_paths,)
    ) as pool:
        return list(pool.map(worker, sentences, chunksize=16))


# ---------------------------------------------------------------------------
# Risk-annotation TSV: sent_index<TAB>kind<TAB>index<TAB>risk
# ---------------------------------------------------------------------------


def _write_risks(rats: Sequence[RiskAnnotatedTree], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for i, rat in enumerate(rats):
            if rat.edge_risks is not None:
                for token, risk in enumerate(rat.edge_risks, start=1):
                    fh.write(f"{i}\tedge\t{token}\t{risk:.17g}\n")
            if rat.action_risks is not None:
                for step, risk in enumerate(rat.action_risks):
                    fh.write(f"{i}\taction\t{step}\t{risk:.17g}\n")


def _read_risks(trees: Sequence[DepTree], path: str) -> list[RiskAnnotatedTree]:
    edge: dict[int, dict[int, float]] = {}
    action: dict[int, dict[int, float]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line:
                continue
            try:
                sent, kind, index, risk = line.split("\t")
                bucket = {"edge": edge, "action": action}[kind]
                bucket.setdefault(int(sent), {})[int(index)] = float(risk)
            except (ValueError, KeyError):
                raise DataError(f"{path}: malformed risk line {line_no}") from None
    rats = []
    for i, tree in enumerate(trees):
        edge_risks = None
        if i in edge:
            per_tok = edge[i]
            if sorted(per_tok) != list(range(1, len(tree) + 1)):
                raise DataError(f"{path}: sentence {i}: incomplete edge risks")
            edge_risks = tuple(per_tok[t] for t in range(1, len(tree) + 1))
        action_risks = None
        if i in action:
            per_step = action[i]
            if sorted(per_step) != list(range(len(per_step))):
                raise DataError(f"{path}: sentence {i}: non-contiguous action risks")
            action_risks = tuple(per_step[s] for s in range(len(per_step)))
        if edge_risks is None and action_risks is None:
            raise DataError(f"{path}: no risks for sentence {i}")
        rats.append(RiskAnnotatedTree(tree=tree, edge_risks=edge_risks, action_risks=action_risks))
    return rats


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


@main.command()
@click.option("--seed", type=int, required=True)
@click.option("--n", "n_sentences", type=int, required=True)
@click.option("--max-len", type=int, default=12, show_default=True)
@click.option("--out", type=click.Path(), required=True)
@_guarded
def gen(seed, n_sentences, max_len, out):
    """Generate a synthetic projective treebank in CoNLL-X format."""
    trees = generate_treebank(seed, n_sentences, max_len)
    write_conllx(trees, out)
    click.echo(f"sentences\t{len(trees)}")
    click.echo(f"tokens\t{sum(len(t) for t in trees)}")


@main.command("train-parser")
@click.option("--kind", type=click.Choice(PARSER_KINDS), required=True)
@click.option("--train", "train_path", type=click.Path(exists=True), required=True)
@click.option("--model-out", type=click.Path(), required=True)
@click.option("--epochs", type=int, default=10, show_default=True)
@click.option("--seed", type=int, required=True)
@_guarded
def train_parser(kind, train_path, model_out, epochs, seed):
    """Train one of the three parsers and save the model."""
    gold = read_conllx(train_path)
    pm = TRAINERS[kind](gold, epochs=epochs, seed=seed)
    pm.model.metadata["train_corpus"] = corpus_fingerprint(gold)
    save_parser_model(pm, model_out)
    correct = total = 0
    for tree in gold:
        predicted = parse_tree(pm, tree.sentence)
        correct += sum(1 for a, b in zip(predicted.heads, tree.heads) if a == b)
        total += len(tree)
    click.echo(f"train_accuracy\t{correct / total:.6f}")


@main.command()
@click.option("--model", "model_path", type=click.Path(exists=True), required=True)
@click.option("--input", "input_path", type=click.Path(exists=True), required=True)
@click.option("--output", type=click.Path(), required=True)
@click.option("--traces-out", type=click.Path(), default=None)
@click.option("--threads", type=int, default=1, show_default=True)
@_guarded
def parse(model_path, input_path, output, traces_out, threads):
    """Parse every sentence (full coverage); optionally dump easy-first traces."""
    pm = load_parser_model(model_path)
    sentences = [t.sentence for t in read_conllx_partial(input_path)]
    if traces_out is not None:
        if pm.kind != EASY_FIRST:
            raise ModelMismatchError("action traces are only available from an easy_first model")
        pairs = _parallel_map(_parse_traced_worker, sentences, [model_path], threads)
        write_conllx([tree for tree, _ in pairs], output)
        write_traces([trace for _, trace in pairs], traces_out)
    else:
        trees = _parallel_map(_parse_worker, sentences, [model_path], threads)
        write_conllx(trees, output)
    click.echo(f"sentences\t{len(sentences)}")


@main.command("train-risk")
@click.option("--parser-model", type=click.Path(exists=True), required=True)
@click.option("--risk-train", type=click.Path(exists=True), required=True)
@click.option("--feature-set", type=click.Choice(FEATURE_SETS), required=True)
@click.option("--model-out", type=click.Path(), required=True)
@click.option("--sigma", type=float, default=1.0, show_default=True)
@click.option("--max-iter", type=int, default=500, show_default=True)
@click.option("--examples-out", type=click.Path(), default=None)
@_guarded
def train_risk(parser_model, risk_train, feature_set, model_out, sigma, max_iter, examples_out):
    """Generate labeled risk examples with a held-out parser, then fit MaxEnt."""
    pm = load_parser_model(parser_model)
    gold = read_conllx(risk_train)
    examples = generate_risk_examples(pm, gold, feature_set)
    if examples_out is not None:
        write_risk_examples(examples, examples_out)
    n_risky = sum(1 for ex in examples if ex.label == riskiness.RISKY)
    model = train_maxent(
        [(ex.features, ex.label) for ex in examples], l2_sigma=sigma, max_iter=max_iter
    )
    save_risk_model(riskiness.RiskModel(model, feature_set), model_out)
    click.echo(f"examples\t{len(examples)}")
    click.echo(f"risky_fraction\t{n_risky / len(examples):.6f}")


@main.command()
@click.option("--risk-model", type=click.Path(exists=True), required=True)
@click.option("--input", "input_path", type=click.Path(exists=True), required=True)
@click.option("--traces", type=click.Path(exists=True), default=None)
@click.option("--threshold", type=float, required=True)
@click.option("--output", type=click.Path(), required=True)
@click.option("--risks-out", type=click.Path(), default=None)
@_guarded
def prune(risk_model, input_path, traces, threshold, output, risks_out):
    """Abstain from every attachment whose riskiness exceeds the threshold."""
    rm = load_risk_model(risk_model)
    require_edge_model(rm)
    trees = read_conllx(input_path)
    trace_list = None
    if rm.feature_set_id == riskiness.EDGE_STATE:
        if traces is None:
            raise DataError("feature set edge_state needs --traces from `parse --traces-out`")
        trace_list = read_traces(traces, [t.sentence for t in trees])
    rats = []
    for i, tree in enumerate(trees):
        rats.append(score_risks(rm, (tree, trace_list[i] if trace_list else None)))
    pruned = [precision_bias.prune(rat, threshold) for rat in rats]
    write_conllx(pruned, output)
    if risks_out is not None:
        _write_risks(rats, risks_out)
    assigned = sum(len(p.assigned()) for p in pruned)
    total = sum(len(p) for p in pruned)
    click.echo(f"coverage\t{assigned / total:.6f}")


@main.command()
@click.option("--model", "model_paths", type=click.Path(exists=True), multiple=True, required=True)
@click.option("--input", "input_path", type=click.Path(exists=True), required=True)
@click.option("--out-prefix", required=True)
@click.option("--threads", type=int, default=1, show_default=True)
@_guarded
def ensemble(model_paths, input_path, out_prefix, threads):
    """Agreement-based riskiness: keep only edges all members agree on."""
    if len(model_paths) < 2:
        raise DataError(f"an ensemble needs at least 2 models, got {len(model_paths)}")
    sentences = [t.sentence for t in read_conllx_partial(input_path)]
    rats = _parallel_map(_ensemble_worker, sentences, list(model_paths), threads)
    agreed = [precision_bias.prune(rat, 0.0) for rat in rats]
    write_conllx([rat.tree for rat in rats], f"{out_prefix}.base.conllx")
    write_conllx(agreed, f"{out_prefix}.agreed.conllx")
    _write_risks(rats, f"{out_prefix}.risks.tsv")
    assigned = sum(len(p.assigned()) for p in agreed)
    total = sum(len(p) for p in agreed)
    click.echo(f"coverage\t{assigned / total:.6f}")


@main.command()
@click.option("--input", "input_path", type=click.Path(exists=True), required=True)
@click.option("--risks", type=click.Path(exists=True), required=True)
@click.option("--gold", type=click.Path(exists=True), default=None)
@click.option("--k", "--K", "max_risky", type=int, default=None)
@click.option("--threshold", type=float, default=None)
@click.option("--tune", is_flag=True, default=False)
@click.option("--targets", default=None, help="Comma-separated precision targets in percent.")
@click.option("--out-prefix", required=True)
@_guarded
def select(input_path, risks, gold, max_risky, threshold, tune, targets, out_prefix):
    """Select whole parses with at most K risky decisions; or tune (K, R) on gold."""
    trees = read_conllx(input_path)
    rats = _read_risks(trees, risks)
    if tune:
        if gold is None:
            raise DataError("--tune needs --gold")
        gold_trees = read_conllx(gold)
        if targets is None:
            target_values = precision_bias.DEFAULT_PRECISION_TARGETS
        else:
            target_values = tuple(float(t) / 100 for t in targets.split(","))
        results = precision_bias.grid_search(rats, gold_trees, target_values)
        report_path = f"{out_prefix}.tuned.tsv"
        with open(report_path, "w", encoding="utf-8") as fh:
            fh.write("target\tK\tR\tdev_precision\tdev_sentence_coverage\n")
            for row in results:
                if row.params is None:
                    fh.write(f"{row.target:.4f}\tunreachable\t-\t-\t-\n")
                else:
                    fh.write(
                        f"{row.target:.4f}\t{row.params.max_risky}\t"
                        f"{row.params.risk_threshold:.2f}\t{row.precision:.6f}\t"
                        f"{row.sentence_coverage:.6f}\n"
                    )
        click.echo(f"report\t{report_path}")
        return
    if max_risky is None or threshold is None:
        raise DataError("either --tune or both --k and --threshold are required")
    params = precision_bias.SelectionParams(risk_threshold=threshold, max_risky=max_risky)
    selected, rejected = precision_bias.select_parses(rats, params)
    write_conllx(selected, f"{out_prefix}.selected.conllx")
    write_conllx(rejected, f"{out_prefix}.rejected.conllx")
    coverage = evaluation.sentence_coverage(len(selected), len(rats)) if rats else 0.0
    click.echo(f"selected\t{len(selected)}")
    click.echo(f"sentence_coverage\t{coverage:.6f}")
    if gold is not None:
        gold_trees = read_conllx(gold)
        chosen_gold = []
        gold_by_id = {id(rat.tree): g for rat, g in zip(rats, gold_trees)}
        for tree in selected:
            chosen_gold.append(gold_by_id[id(tree)])
        from .treebank import PartialDepTree

        report = evaluation.evaluate(
            [PartialDepTree.from_tree(t) for t in selected], chosen_gold
        )
        click.echo(f"precision\t{report.precision:.6f}")


@main.command("eval")
@click.option("--pred", type=click.Path(exists=True), required=True)
@click.option("--gold", type=click.Path(exists=True), required=True)
@click.option("--punct-exclude", default="", help="Comma-separated POS tags to drop.")
@_guarded
def eval_cmd(pred, gold, punct_exclude):
    """Precision / recall / coverage of a (possibly partial) parse against gold."""
    pred_trees = read_conllx_partial(pred)
    gold_trees = read_conllx(gold)
    exclude = frozenset(t for t in punct_exclude.split(",") if t)
    report = evaluation.evaluate(pred_trees, gold_trees, exclude_pos=exclude)
    for name, value in report.as_lines():
        click.echo(f"{name}\t{value:.6g}")


@main.command()
@click.option("--pred", type=click.Path(exists=True), required=True)
@click.option("--risks", type=click.Path(exists=True), required=True)
@click.option("--gold", type=click.Path(exists=True), required=True)
@click.option("--out", type=click.Path(), required=True)
@click.option("--n-thresholds", type=int, default=None)
@_guarded
def roc(pred, risks, gold, out, n_thresholds):
    """ROC curve (TSV) and AUC for identifying wrong attachments as risky."""
    pred_trees = read_conllx(pred)
    gold_trees = read_conllx(gold)
    rats = _read_risks(pred_trees, risks)
    scored = []
    for rat, g in zip(rats, gold_trees):
        if rat.edge_risks is None:
            raise DataError("roc needs edge risks")
        for risk, p_head, g_head in zip(rat.edge_risks, rat.tree.heads, g.heads):
            scored.append((risk, p_head == g_head))
    points, auc = evaluation.roc_curve(scored, n_thresholds)
    with open(out, "w", encoding="utf-8") as fh:
        fh.write("threshold\ttpr\tfpr\n")
        for p in points:
            fh.write(f"{p.threshold:.17g}\t{p.tpr:.6f}\t{p.fpr:.6f}\n")
    click.echo(f"auc\t{auc:.6f}")


@main.command("pp-report")
@click.option("--pred", type=click.Path(exists=True), required=True)
@click.option("--risks", type=click.Path(exists=True), required=True)
@click.option("--gold", type=click.Path(exists=True), required=True)
@click.option("--threshold", type=float, required=True)
@click.option("--tag", default="P", show_default=True, help="POS tag of prepositions.")
@_guarded
def pp_report(pred, risks, gold, threshold, tag):
    """Risky/safe vs correct/incorrect confusion for preposition attachments."""
    pred_trees = read_conllx(pred)
    gold_trees = read_conllx(gold)
    rats = _read_risks(pred_trees, risks)
    breakdown = evaluation.pp_breakdown(rats, gold_trees, threshold, tag)
    o = breakdown.overall
    click.echo(f"TP\t{o.tp}\nFP\t{o.fp}\nTN\t{o.tn}\nFN\t{o.fn}")
    click.echo("form\tTP\tFP\tTN\tFN\ttotal")
    for form, c in breakdown.per_form:
        click.echo(f"{form}\t{c.tp}\t{c.fp}\t{c.tn}\t{c.fn}\t{c.total}")


if __name__ == "__main__":
    main()
