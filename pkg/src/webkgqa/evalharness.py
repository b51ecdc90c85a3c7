"""Three-way scoring of system responses and metric aggregation.

Each response earns +1 (correct), 0 (missing, i.e. the abstention
string), or -1 (incorrect). Accuracy, hallucination, and missing are the
respective fractions; the headline score is accuracy minus hallucination,
so wrong answers cost exactly what right ones earn.
"""

from __future__ import annotations

import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import IntEnum
from fractions import Fraction
from typing import Callable, Iterable, Sequence

from .backends import ChatModel
from .dataset import DatasetRecord
from .errors import BackendError
from .generation import ABSTAIN_TEXT

logger = logging.getLogger(__name__)


class Verdict(IntEnum):
    CORRECT = 1
    MISSING = 0
    INCORRECT = -1


def normalize(text: str) -> str:
    return text.strip().casefold()


JUDGE_SYSTEM_PROMPT = (
    "You compare a system response against a ground-truth answer and decide "
    "whether the response conveys the same answer. Reply with exactly one "
    "word: correct or incorrect."
)

_JUDGE_WORD_RE = re.compile(r"\b(incorrect|correct)\b", re.IGNORECASE)


def _model_verdict(judge_model: ChatModel, response: str, ground_truth: str) -> Verdict:
    user_prompt = f"Ground truth: {ground_truth}\nResponse: {response}\nDecision:"
    reply = judge_model.send(JUDGE_SYSTEM_PROMPT, user_prompt)
    match = _JUDGE_WORD_RE.search(reply)
    if match is None:
        raise BackendError(f"judge backend returned no verdict word: {reply!r}")
    return Verdict.INCORRECT if match.group(1).lower() == "incorrect" else Verdict.CORRECT


def judge(
    response: str,
    ground_truth: str,
    judge_model: ChatModel | None = None,
    extra_missing: frozenset[str] = frozenset(),
) -> Verdict:
    """Score one response against its ground truth.

    The abstention string is always missing; a normalized exact match is
    always correct. Everything else goes to the judge model when one is
    configured, else to the built-in containment judge (correct iff the
    normalized ground truth appears in the normalized response).
    """
    resp = normalize(response)
    if resp == normalize(ABSTAIN_TEXT) or resp in extra_missing:
        return Verdict.MISSING
    truth = normalize(ground_truth)
    if resp == truth:
        return Verdict.CORRECT
    if judge_model is not None:
        return _model_verdict(judge_model, response, ground_truth)
    if truth and truth in resp:
        return Verdict.CORRECT
    return Verdict.INCORRECT


@dataclass(frozen=True)
class Metrics:
    """Counts plus exact rational rates over the judged verdicts."""

    n_correct: int
    n_incorrect: int
    n_missing: int

    @property
    def total(self) -> int:
        return self.n_correct + self.n_incorrect + self.n_missing

    @property
    def accuracy(self) -> Fraction:
        return Fraction(self.n_correct, self.total)

    @property
    def hallucination(self) -> Fraction:
        return Fraction(self.n_incorrect, self.total)

    @property
    def missing(self) -> Fraction:
        return Fraction(self.n_missing, self.total)

    @property
    def score(self) -> Fraction:
        return self.accuracy - self.hallucination

    def as_floats(self) -> dict[str, float]:
        return {
            "accuracy": float(self.accuracy),
            "hallucination": float(self.hallucination),
            "missing": float(self.missing),
            "score": float(self.score),
        }


def aggregate(verdicts: Sequence[Verdict]) -> Metrics:
    if not verdicts:
        raise ValueError("cannot aggregate an empty verdict list")
    return Metrics(
        n_correct=sum(1 for v in verdicts if v == Verdict.CORRECT),
        n_incorrect=sum(1 for v in verdicts if v == Verdict.INCORRECT),
        n_missing=sum(1 for v in verdicts if v == Verdict.MISSING),
    )


@dataclass
class EvalItem:
    index: int
    query: str
    ground_truth: str
    response: str = ""
    domain: str = ""
    dynamism: str = ""
    question_type: str = ""
    verdict: Verdict | None = None
    exact_match: bool = False
    error: str | None = None


@dataclass
class EvalReport:
    items: list[EvalItem]

    @property
    def judged(self) -> list[EvalItem]:
        return [i for i in self.items if i.verdict is not None]

    @property
    def unjudged_count(self) -> int:
        return len(self.items) - len(self.judged)

    @property
    def metrics(self) -> Metrics:
        return aggregate([i.verdict for i in self.judged])

    @property
    def exact_accuracy(self) -> Fraction:
        judged = self.judged
        return Fraction(sum(1 for i in judged if i.exact_match), len(judged))

    def breakdown(self, key: Callable[[EvalItem], str]) -> dict[str, Metrics]:
        groups: dict[str, list[Verdict]] = {}
        for item in self.judged:
            label = key(item) or "(none)"
            groups.setdefault(label, []).append(item.verdict)
        return {label: aggregate(vs) for label, vs in sorted(groups.items())}

    def to_dict(self, include_items: bool = True) -> dict:
        body: dict = {
            "total": len(self.items),
            "unjudged": self.unjudged_count,
            "exact_accuracy": float(self.exact_accuracy) if self.judged else None,
            "metrics": self.metrics.as_floats() if self.judged else None,
            "by_domain": {k: m.as_floats() for k, m in self.breakdown(lambda i: i.domain).items()},
            "by_dynamism": {k: m.as_floats() for k, m in self.breakdown(lambda i: i.dynamism).items()},
            "by_question_type": {
                k: m.as_floats() for k, m in self.breakdown(lambda i: i.question_type).items()
            },
        }
        if include_items:
            body["items"] = [
                {
                    "index": i.index,
                    "query": i.query,
                    "response": i.response,
                    "ground_truth": i.ground_truth,
                    "verdict": None if i.verdict is None else int(i.verdict),
                    "exact_match": i.exact_match,
                    "error": i.error,
                }
                for i in self.items
            ]
        return body


def evaluate_records(
    records: Sequence[DatasetRecord],
    answer_fn: Callable[[DatasetRecord], str],
    judge_model: ChatModel | None = None,
    workers: int = 1,
    extra_missing: Iterable[str] = (),
) -> EvalReport:
    """Answer and judge every record; failures never abort the run.

    Records whose answer_fn or judge backend failed stay in the report
    with an error note but are excluded from the rates.
    """
    extra = frozenset(normalize(m) for m in extra_missing)

    def run_one(pair: tuple[int, DatasetRecord]) -> EvalItem:
        index, record = pair
        item = EvalItem(
            index=index,
            query=record.query,
            ground_truth=record.answer or "",
            domain=record.domain,
            dynamism=record.static_or_dynamic,
            question_type=record.question_type or "",
        )
        try:
            item.response = answer_fn(record)
        except Exception as exc:
            item.error = f"answer failed: {exc}"
            logger.warning("record %d: %s", index, item.error)
            return item
        item.exact_match = normalize(item.response) == normalize(item.ground_truth)
        try:
            item.verdict = judge(item.response, item.ground_truth, judge_model, extra)
        except BackendError as exc:
            item.error = f"judge failed: {exc}"
            logger.warning("record %d: %s", index, item.error)
        return item

    indexed = list(enumerate(records))
    if workers <= 1:
        items = [run_one(pair) for pair in indexed]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            items = list(pool.map(run_one, indexed))
    return EvalReport(items=items)


@dataclass
class SweepRow:
    """One evaluation run inside a parameter sweep."""

    key: str
    report: EvalReport


def render_metrics_table(rows: Sequence[SweepRow], key_header: str) -> str:
    """Fixed-width table with the standard metric columns."""
    headers = [key_header, "Exact Accuracy", "Accuracy", "Hallucination", "Missing", "Score"]
    lines = []
    body = []
    for row in rows:
        if row.report.judged:
            floats = row.report.metrics.as_floats()
            body.append(
                [
                    row.key,
                    f"{float(row.report.exact_accuracy):.4f}",
                    f"{floats['accuracy']:.4f}",
                    f"{floats['hallucination']:.4f}",
                    f"{floats['missing']:.4f}",
                    f"{floats['score']:.4f}",
                ]
            )
        else:
            body.append([row.key, "-", "-", "-", "-", "-"])
    widths = [max(len(headers[c]), *(len(r[c]) for r in body)) if body else len(headers[c]) for c in range(len(headers))]
    lines.append("  ".join(h.ljust(widths[c]) for c, h in enumerate(headers)))
    lines.append("  ".join("-" * widths[c] for c in range(len(headers))))
    for r in body:
        lines.append("  ".join(r[c].ljust(widths[c]) for c in range(len(headers))))
    return "\n".join(lines)


def sweep_to_dict(rows: Sequence[SweepRow], sweep_name: str, include_items: bool = True) -> dict:
    return {
        "sweep": sweep_name,
        "rows": [
            {"key": row.key, **row.report.to_dict(include_items=include_items)}
            for row in rows
        ],
    }
