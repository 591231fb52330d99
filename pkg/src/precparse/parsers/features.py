"""First-order arc features shared by the MST parser and the edge-based risk extractors."""

from __future__ import annotations

from typing import AbstractSet, Optional

from ..errors import DataError
from ..linear_model import FeatureVector
from ..treebank import Sentence

ROOT_SYM = "<ROOT>"
NONE_SYM = "<NONE>"
UNK_SYM = "<UNK>"


def distance_bin(distance: int) -> str:
    """Bins 1,2,3,4,5,6-10,>10 over absolute distances."""
    d = abs(distance)
    if d <= 5:
        return str(d)
    if d <= 10:
        return "6-10"
    return ">10"


def _form_at(forms: list[str], i: int, vocab: Optional[AbstractSet[str]]) -> str:
    if i < 0 or i >= len(forms):
        return NONE_SYM
    form = forms[i]
    if vocab is not None and i != 0 and form not in vocab:
        return UNK_SYM
    return form


def _pos_at(tags: list[str], i: int) -> str:
    if i < 0 or i >= len(tags):
        return NONE_SYM
    return tags[i]


def extract_first_order_features(
    sentence: Sentence,
    head: int,
    dep: int,
    vocab: Optional[AbstractSet[str]] = None,
) -> FeatureVector:
    """McDonald-style edge-factored templates for the arc (head, dep).

    Every template is emitted twice: bare and conjoined with arc direction
    plus binned head-dependent distance.  Forms outside ``vocab`` (when one is
    given) are replaced by a reserved unknown-word symbol.
    """
    n = len(sentence)
    if not 0 <= head <= n:
        raise DataError(f"head index {head} out of range 0..{n}")
    if not 1 <= dep <= n:
        raise DataError(f"dependent index {dep} out of range 1..{n}")
    if head == dep:
        raise DataError(f"arc ({head},{dep}) is a self-loop")

    forms = sentence.forms()
    tags = sentence.pos_tags()
    hf = _form_at(forms, head, vocab)
    hp = tags[head]
    df = _form_at(forms, dep, vocab)
    dp = tags[dep]

    base = [
        f"hf={hf}",
        f"hp={hp}",
        f"hfp={hf}|{hp}",
        f"df={df}",
        f"dp={dp}",
        f"dfp={df}|{dp}",
        f"hp,dp={hp}|{dp}",
        f"hf,df={hf}|{df}",
        f"hp,df={hp}|{df}",
        f"hf,dp={hf}|{dp}",
        f"hfp,dfp={hf}|{hp}|{df}|{dp}",
        f"hp,dfp={hp}|{df}|{dp}",
        f"hfp,dp={hf}|{hp}|{dp}",
        f"hfp,df={hf}|{hp}|{df}",
        f"hf,dfp={hf}|{df}|{dp}",
    ]
    lo, hi = (head, dep) if head < dep else (dep, head)
    for between in range(lo + 1, hi):
        base.append(f"btw={hp}|{tags[between]}|{dp}")
    hp1 = _pos_at(tags, head + 1)
    hm1 = _pos_at(tags, head - 1)
    dp1 = _pos_at(tags, dep + 1)
    dm1 = _pos_at(tags, dep - 1)
    base.append(f"ctx1={hp}|{hp1}|{dm1}|{dp}")
    base.append(f"ctx2={hm1}|{hp}|{dm1}|{dp}")
    base.append(f"ctx3={hp}|{hp1}|{dp}|{dp1}")
    base.append(f"ctx4={hm1}|{hp}|{dp}|{dp1}")

    direction = "R" if head < dep else "L"
    suffix = f"/{direction}{distance_bin(dep - head)}"
    names = base + [name + suffix for name in base]
    return dict.fromkeys(names, 1.0)
