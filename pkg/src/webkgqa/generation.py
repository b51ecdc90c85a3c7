"""Answer generation with a self-assessed confidence gate.

The chat model is instructed to return a JSON payload with the answer
and a confidence tier. Answers below the configured tier threshold are
replaced by the abstention string, which the evaluation harness scores
as missing rather than wrong.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from typing import Sequence

from .backends import ChatModel, iter_json_values
from .pipeline import Reference

ABSTAIN_TEXT = "I don't know"

ANSWER_SYSTEM_PROMPT = """You are provided with a question, current time and various references. Your task is to answer the question succinctly, using the FEWEST words possible. If you are absolutely sure, more than 97% confident, please answer directly. If you are not sure, please respond with 'I don't know'.
Please answer the question and provide the confidence tier (high, medium, low) for your answer. Use the following standards for confidence tiers:

- High Confidence (High): The answer provided is almost certainly correct. There is strong evidence or overwhelming consensus supporting this answer. The model has a high level of certainty and little to no doubt about this answer.
- Medium Confidence (Medium): The answer provided is likely to be correct. There is some evidence or reasonable support for this answer, but it is not conclusive. The model has some level of certainty but acknowledges that there is a possibility of error or alternative answers.
- Low Confidence (Low): The answer provided is uncertain or speculative. There is little to no solid evidence or support for this answer. The model has significant doubts about the accuracy of this answer and recognizes that it could easily be incorrect.

Output the result in JSON format, answer is a string, confidence is a string (value is one of high, medium, low), for example output: {"answer": "mayon volcano", "confidence": "medium"}"""


class ConfidenceTier(IntEnum):
    LOW = 0
    MEDIUM = 1
    HIGH = 2

    @classmethod
    def parse(cls, value: str) -> "ConfidenceTier":
        try:
            return cls[value.strip().upper()]
        except (KeyError, AttributeError):
            raise ValueError(f"unknown confidence tier: {value!r}") from None

    def __str__(self) -> str:
        return self.name.lower()


@dataclass(frozen=True)
class GatedAnswer:
    raw_answer: str
    confidence: ConfidenceTier
    accepted: bool
    final_text: str


def build_answer_prompt(
    query: str, query_time: str, references: Sequence[Reference]
) -> tuple[str, str]:
    """System and user prompts for the gated answer request.

    References appear in order, blank-line separated, each prefixed with
    its attribution label.
    """
    context = "\n\n".join(f"[{ref.label}] {ref.text}" for ref in references)
    user_prompt = (
        f"Context: {context}\n"
        f"Current Time: {query_time}\n"
        f"Question: {query}\n"
        "Output:"
    )
    return ANSWER_SYSTEM_PROMPT, user_prompt


def parse_answer_payload(reply: str) -> tuple[str, ConfidenceTier] | None:
    """Extract (answer, confidence) from a model reply.

    Takes the first embedded JSON object carrying string 'answer' and
    'confidence' fields (tier match is case-insensitive); returns None
    when no such object exists.
    """
    for value in iter_json_values(reply):
        if not isinstance(value, dict):
            continue
        answer = value.get("answer")
        confidence = value.get("confidence")
        if not isinstance(answer, str) or not isinstance(confidence, str):
            continue
        try:
            tier = ConfidenceTier.parse(confidence)
        except ValueError:
            continue
        return answer, tier
    return None


def self_assess_gate(
    answer: str, confidence: ConfidenceTier, threshold: ConfidenceTier
) -> GatedAnswer:
    """Accept the answer iff its confidence reaches the threshold.

    A low threshold accepts every tier, i.e. disables self-assessment.
    """
    accepted = confidence >= threshold
    return GatedAnswer(
        raw_answer=answer,
        confidence=confidence,
        accepted=accepted,
        final_text=answer if accepted else ABSTAIN_TEXT,
    )


def generate_answer(
    query: str,
    query_time: str,
    references: Sequence[Reference],
    model: ChatModel,
    threshold: ConfidenceTier = ConfidenceTier.HIGH,
) -> GatedAnswer:
    """Prompt, parse (retrying once), and gate.

    Two unparseable replies abstain; transport errors from the backend
    propagate as BackendError.
    """
    system_prompt, user_prompt = build_answer_prompt(query, query_time, references)
    reply = model.send(system_prompt, user_prompt)
    parsed = parse_answer_payload(reply)
    if parsed is None:
        reply = model.send(system_prompt, user_prompt)
        parsed = parse_answer_payload(reply)
    if parsed is None:
        return GatedAnswer(
            raw_answer=reply,
            confidence=ConfidenceTier.LOW,
            accepted=False,
            final_text=ABSTAIN_TEXT,
        )
    answer, tier = parsed
    return self_assess_gate(answer, tier, threshold)
