"""Scoring of yes/no hallucination predictions."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

ANSWERS = ("Yes", "No")


class EvalError(ValueError):
    pass


@dataclass(frozen=True)
class Prediction:
    id: str
    answer: str
    score: float | None = None


@dataclass
class MetricsReport:
    f1_pos: float
    f1_neg: float
    macro_f1: float
    micro_f1: float
    accuracy: float
    yes_ratio: float
    auroc: float | None
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def to_dict(self) -> dict:
        d = asdict(self)
        if d["auroc"] is None:
            del d["auroc"]
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_table(self) -> str:
        cols = [("Macro F1", self.macro_f1), ("F1 (pos)", self.f1_pos), ("F1 (neg)", self.f1_neg),
                ("Micro F1", self.micro_f1), ("AUROC", self.auroc), ("Acc", self.accuracy),
                ("Yes Ratio", self.yes_ratio)]
        head = " | ".join(f"{name:>9}" for name, _ in cols)
        row = " | ".join(f"{'-':>9}" if v is None else f"{v:9.2f}" for _, v in cols)
        counts = f"tp={self.tp} fp={self.fp} tn={self.tn} fn={self.fn}"
        return f"{head}\n{row}\n{counts}\n"


def _f1(tp: int, fp: int, fn: int) -> float:
    # No predicted and no actual positives counts as perfect agreement.
    if tp + fp + fn == 0:
        return 100.0
    return 100.0 * 2 * tp / (2 * tp + fp + fn)


def auroc(scores, labels) -> float:
    """Mann-Whitney AUC in percent; tied scores share their average rank."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels, dtype=bool)
    n_pos, n_neg = int(y.sum()), int((~y).sum())
    if n_pos == 0 or n_neg == 0:
        raise EvalError("AUROC needs both positive and negative gold labels")
    order = np.argsort(s, kind="stable")
    ranks = np.empty(len(s))
    sorted_s = s[order]
    i = 0
    while i < len(s):
        j = i
        while j + 1 < len(s) and sorted_s[j + 1] == sorted_s[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    u = ranks[y].sum() - n_pos * (n_pos + 1) / 2.0
    return 100.0 * u / (n_pos * n_neg)


def _check_answer(value, where: str) -> str:
    if value not in ANSWERS:
        raise EvalError(f"{where}: answer must be 'Yes' or 'No', got {value!r}")
    return value


def score(predictions: list[Prediction], gold: dict[str, str]) -> MetricsReport:
    """Confusion counts and percentages with Yes as the positive class.

    Raises:
        EvalError: on duplicate or unknown prediction ids, gold ids without a
            prediction, or answers other than Yes/No.
    """
    for gid, ans in gold.items():
        _check_answer(ans, f"gold {gid}")
    by_id: dict[str, Prediction] = {}
    for p in predictions:
        _check_answer(p.answer, f"prediction {p.id}")
        if p.id in by_id:
            raise EvalError(f"duplicate prediction id {p.id!r}")
        if p.id not in gold:
            raise EvalError(f"prediction id {p.id!r} not in gold set")
        by_id[p.id] = p
    missing = [gid for gid in gold if gid not in by_id]
    if missing:
        raise EvalError(f"{len(missing)} gold ids without prediction, first {missing[0]!r}")
    if not gold:
        raise EvalError("empty gold set")

    tp = fp = tn = fn = 0
    for gid, ans in gold.items():
        pred = by_id[gid].answer
        if ans == "Yes":
            tp += pred == "Yes"
            fn += pred == "No"
        else:
            fp += pred == "Yes"
            tn += pred == "No"
    total = tp + fp + tn + fn
    f1_pos = _f1(tp, fp, fn)
    f1_neg = _f1(tn, fn, fp)
    ids = sorted(gold)
    auc = None
    if all(by_id[i].score is not None for i in ids):
        labels = [gold[i] == "Yes" for i in ids]
        if any(labels) and not all(labels):
            auc = auroc([by_id[i].score for i in ids], labels)
    return MetricsReport(
        f1_pos=f1_pos,
        f1_neg=f1_neg,
        macro_f1=(f1_pos + f1_neg) / 2.0,
        micro_f1=f1_pos,  # Yes-positive pooled counts; equals f1_pos for one binary task
        accuracy=100.0 * (tp + tn) / total,
        yes_ratio=100.0 * (tp + fp) / total,
        auroc=auc,
        tp=tp, fp=fp, tn=tn, fn=fn,
    )


def _jsonl(path: Path):
    with path.open(encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise EvalError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from None
            if not isinstance(obj, dict) or "id" not in obj or "answer" not in obj:
                raise EvalError(f"{path}:{lineno}: expected an object with 'id' and 'answer'")
            yield lineno, obj


def read_gold(path: str | Path) -> dict[str, str]:
    path = Path(path)
    gold: dict[str, str] = {}
    for lineno, obj in _jsonl(path):
        gid = str(obj["id"])
        if gid in gold:
            raise EvalError(f"{path}:{lineno}: duplicate gold id {gid!r}")
        gold[gid] = _check_answer(obj["answer"], f"{path}:{lineno}")
    return gold


def read_predictions(path: str | Path) -> list[Prediction]:
    path = Path(path)
    preds = []
    for lineno, obj in _jsonl(path):
        sc = obj.get("score")
        if sc is not None and (isinstance(sc, bool) or not isinstance(sc, (int, float))):
            raise EvalError(f"{path}:{lineno}: score must be a number")
        preds.append(Prediction(str(obj["id"]), _check_answer(obj["answer"], f"{path}:{lineno}"),
                                None if sc is None else float(sc)))
    return preds
