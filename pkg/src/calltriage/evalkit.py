"""Text-similarity and classification metrics.

Self-contained implementations of sentence BLEU (epsilon-smoothed modified
n-gram precisions, geometric mean, brevity penalty), ROUGE-N and ROUGE-L
precision/recall/F, concept-coverage precision, and one-vs-rest confusion
metrics over the three severity levels. `run_report` scores a prediction
file against a gold file and writes machine- and spreadsheet-friendly
reports.
"""

from __future__ import annotations

import csv
import json
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence

from .textproc import contains_token_seq, tokenize

BLEU_EPSILON = 1e-9
SEVERITY_LABELS = ("Mild", "Moderate", "Severe")


class ParseError(Exception):
    def __init__(self, path, line, message):
        super().__init__(f"{path}:{line}: {message}")
        self.path = str(path)
        self.line = line


class LengthMismatch(Exception):
    pass


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu(candidate: str, references: Sequence[str], max_n: int = 4) -> float:
    """Sentence BLEU of a candidate against one or more references.

    Modified n-gram precisions are clipped against the per-reference
    maximum counts and floored at a tiny epsilon so a single missing order
    does not zero the score; orders longer than the candidate are skipped.
    Brevity penalty uses the closest reference length (ties toward the
    shorter one).
    """
    if not references:
        raise ValueError("need at least one reference")
    cand = tokenize(candidate)
    refs = [tokenize(r) for r in references]
    if not cand:
        return 0.0

    log_sum, orders = 0.0, 0
    for n in range(1, max_n + 1):
        cand_ngrams = _ngrams(cand, n)
        total = sum(cand_ngrams.values())
        if total == 0:
            continue
        max_ref: Counter = Counter()
        for ref in refs:
            for gram, count in _ngrams(ref, n).items():
                max_ref[gram] = max(max_ref[gram], count)
        clipped = sum(min(count, max_ref[gram]) for gram, count in cand_ngrams.items())
        log_sum += math.log(max(clipped, BLEU_EPSILON) / total)
        orders += 1
    if orders == 0:
        return 0.0
    geo_mean = math.exp(log_sum / orders)

    c = len(cand)
    r = min((len(ref) for ref in refs), key=lambda L: (abs(L - c), L))
    brevity = 1.0 if c >= r else math.exp(1 - r / c)
    return geo_mean * brevity


class RougeScore(NamedTuple):
    precision: float
    recall: float
    f: float


def _prf(overlap: float, cand_total: float, ref_total: float) -> RougeScore:
    p = overlap / cand_total if cand_total else 0.0
    r = overlap / ref_total if ref_total else 0.0
    f = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return RougeScore(p, r, f)


def rouge_n(candidate: str, reference: str, n: int) -> RougeScore:
    """Clipped n-gram overlap as precision against the candidate and recall
    against the reference."""
    if n < 1:
        raise ValueError("n must be at least 1")
    cand = _ngrams(tokenize(candidate), n)
    ref = _ngrams(tokenize(reference), n)
    overlap = sum(min(count, ref[gram]) for gram, count in cand.items())
    return _prf(overlap, sum(cand.values()), sum(ref.values()))


def _lcs_len(a: Sequence[str], b: Sequence[str]) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, start=1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge_l(candidate: str, reference: str) -> RougeScore:
    """Longest-common-subsequence overlap."""
    cand, ref = tokenize(candidate), tokenize(reference)
    return _prf(_lcs_len(cand, ref), len(cand), len(ref))


def conceptual_precision(prediction: str, gold_concepts: dict[str, Sequence[str]]) -> float:
    """Fraction of gold concepts with at least one surface form (the concept
    term or a listed synonym) present whole-token in the prediction."""
    if not gold_concepts:
        raise ValueError("gold concept set is empty")
    tokens = tokenize(prediction)
    covered = 0
    for concept, synonyms in gold_concepts.items():
        forms = [concept, *synonyms]
        if any(contains_token_seq(tokens, tokenize(form)) for form in forms):
            covered += 1
    return covered / len(gold_concepts)


# ---------------------------------------------------------------------------
# Severity classification metrics.


@dataclass
class ConfusionMatrix:
    labels: tuple[str, ...] = SEVERITY_LABELS
    counts: list[list[int]] = field(default_factory=lambda: [[0] * 3 for _ in range(3)])

    def add(self, true_label: str, pred_label: str):
        self.counts[self.labels.index(true_label)][self.labels.index(pred_label)] += 1

    @property
    def total(self) -> int:
        return sum(sum(row) for row in self.counts)

    def to_json(self) -> dict:
        return {"labels": list(self.labels), "counts": self.counts}


@dataclass(frozen=True)
class ClassScores:
    precision: float | None
    recall: float | None
    f1: float | None


def confusion_and_scores(
    gold: Sequence[str], pred: Sequence[str], labels: tuple[str, ...] = SEVERITY_LABELS
) -> tuple[ConfusionMatrix, dict[str, ClassScores]]:
    """3x3 confusion matrix (rows true, cols predicted) and one-vs-rest
    precision/recall/F1 per class; zero-denominator cases come back as None
    rather than 0."""
    if len(gold) != len(pred):
        raise LengthMismatch(f"{len(gold)} gold labels vs {len(pred)} predictions")
    matrix = ConfusionMatrix(labels=labels, counts=[[0] * len(labels) for _ in labels])
    for g, p in zip(gold, pred):
        matrix.add(g, p)
    scores = {}
    for i, label in enumerate(labels):
        tp = matrix.counts[i][i]
        col = sum(matrix.counts[r][i] for r in range(len(labels)))
        row = sum(matrix.counts[i])
        precision = tp / col if col else None
        recall = tp / row if row else None
        if precision is None or recall is None:
            f1 = None
        elif precision + recall > 0:
            f1 = 2 * precision * recall / (precision + recall)
        else:
            f1 = 0.0
        scores[label] = ClassScores(precision, recall, f1)
    return matrix, scores


# ---------------------------------------------------------------------------
# File-level report.


@dataclass
class CaseMetrics:
    case_id: str
    bleu: float
    rouge1: RougeScore
    rouge2: RougeScore
    rougeL: RougeScore
    conceptual_precision: float | None = None

    def to_row(self) -> dict:
        row = {"case_id": self.case_id, "bleu": self.bleu}
        for name, rs in (("rouge1", self.rouge1), ("rouge2", self.rouge2), ("rougeL", self.rougeL)):
            row[f"{name}_p"] = rs.precision
            row[f"{name}_r"] = rs.recall
            row[f"{name}_f"] = rs.f
        row["conceptual_precision"] = self.conceptual_precision
        return row


@dataclass
class MetricReport:
    rows: list[CaseMetrics]
    aggregates: dict

    def to_json(self) -> dict:
        return {"cases": [r.to_row() for r in self.rows], "aggregates": self.aggregates}


def _read_cases_csv(path: str | Path) -> dict[str, dict]:
    """case_id -> {text, level?}, preserving file order via dict insertion."""
    cases: dict[str, dict] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"case_id", "text"}.issubset(reader.fieldnames):
            raise ParseError(path, 1, "need columns case_id, text")
        for row in reader:
            if row.get("case_id") in (None, "") or row.get("text") is None:
                raise ParseError(path, reader.line_num, "missing case_id or text")
            level = row.get("level")
            if level and level not in SEVERITY_LABELS:
                raise ParseError(path, reader.line_num, f"unknown level {level!r}")
            cases[row["case_id"]] = {"text": row["text"], "level": level or None}
    return cases


def _read_concepts(path: str | Path) -> dict[str, dict[str, list[str]]]:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(path, exc.lineno, exc.msg) from exc
    if not isinstance(obj, dict):
        raise ParseError(path, 1, "concepts file must map case_id to concept dicts")
    return obj


def _mean(values: list[float]) -> float | None:
    return sum(values) / len(values) if values else None


def run_report(
    pred_file: str | Path,
    gold_file: str | Path,
    concepts_file: str | Path | None = None,
    out_json: str | Path | None = None,
    out_csv: str | Path | None = None,
) -> tuple[MetricReport, ConfusionMatrix | None]:
    """Score predictions against golds case by case.

    Both files are CSV with columns case_id, text and an optional level
    column; when both sides carry levels a confusion matrix is included.
    Outputs are deterministic in gold-file order.
    """
    preds = _read_cases_csv(pred_file)
    golds = _read_cases_csv(gold_file)
    missing = [cid for cid in golds if cid not in preds]
    if missing:
        raise ParseError(pred_file, 0, f"no prediction for case(s): {', '.join(missing)}")
    concepts = _read_concepts(concepts_file) if concepts_file else {}

    rows = []
    for case_id, gold in golds.items():
        pred = preds[case_id]
        case_concepts = concepts.get(case_id)
        rows.append(
            CaseMetrics(
                case_id=case_id,
                bleu=bleu(pred["text"], [gold["text"]]),
                rouge1=rouge_n(pred["text"], gold["text"], 1),
                rouge2=rouge_n(pred["text"], gold["text"], 2),
                rougeL=rouge_l(pred["text"], gold["text"]),
                conceptual_precision=(
                    conceptual_precision(pred["text"], case_concepts) if case_concepts else None
                ),
            )
        )

    aggregates = {
        "bleu": _mean([r.bleu for r in rows]),
        "rouge1_f": _mean([r.rouge1.f for r in rows]),
        "rouge2_f": _mean([r.rouge2.f for r in rows]),
        "rougeL_f": _mean([r.rougeL.f for r in rows]),
        "conceptual_precision": _mean(
            [r.conceptual_precision for r in rows if r.conceptual_precision is not None]
        ),
        "cases": len(rows),
    }
    report = MetricReport(rows=rows, aggregates=aggregates)

    matrix = None
    gold_levels = [g["level"] for g in golds.values()]
    pred_levels = [preds[cid]["level"] for cid in golds]
    if gold_levels and all(gold_levels) and all(pred_levels):
        matrix, per_class = confusion_and_scores(gold_levels, pred_levels)
        report.aggregates["per_class"] = {
            label: {"precision": cs.precision, "recall": cs.recall, "f1": cs.f1}
            for label, cs in per_class.items()
        }

    if out_json:
        payload = report.to_json()
        if matrix:
            payload["confusion"] = matrix.to_json()
        Path(out_json).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    if out_csv:
        with open(out_csv, "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0].to_row()) if rows else ["case_id"])
            writer.writeheader()
            for r in rows:
                writer.writerow(r.to_row())
    return report, matrix
