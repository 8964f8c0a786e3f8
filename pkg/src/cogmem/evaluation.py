"""QA evaluation harness: token F1, BLEU-1, and count-weighted aggregates.

Metric conventions: answers are lowercased, punctuation-stripped, and
whitespace-tokenized before scoring. F1 uses multiset token overlap
(extractive-QA convention); BLEU-1 is clipped unigram precision with a
brevity penalty. The overall number is the instance-count-weighted mean
over the non-adversarial categories; adversarial questions are scored
separately through the rejection statistics.

The harness replays each conversation through a fresh engine (ingest with
consolidation on the N-cadence), answers every question via retrieval plus
a pluggable answerer over the verification prompt, and aggregates per
category.
"""

from __future__ import annotations

import json
import logging
import string
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from math import exp
from typing import Callable, Sequence

from .errors import ValidationError
from .params import HyperParams
from .retrieval import build_verification_prompt, evidence_entries

logger = logging.getLogger(__name__)

REJECTION_ANSWER = "Not mentioned"


class Category(str, Enum):
    SINGLE_HOP = "C1"
    TEMPORAL = "C2"
    OPEN_DOMAIN = "C3"
    MULTI_HOP = "C4"
    ADVERSARIAL = "C5"


_CATEGORY_ALIASES = {
    "c1": Category.SINGLE_HOP, "1": Category.SINGLE_HOP,
    "single_hop": Category.SINGLE_HOP, "singlehop": Category.SINGLE_HOP,
    "single-hop": Category.SINGLE_HOP,
    "c2": Category.TEMPORAL, "2": Category.TEMPORAL,
    "temporal": Category.TEMPORAL,
    "c3": Category.OPEN_DOMAIN, "3": Category.OPEN_DOMAIN,
    "open_domain": Category.OPEN_DOMAIN, "opendomain": Category.OPEN_DOMAIN,
    "open-domain": Category.OPEN_DOMAIN,
    "c4": Category.MULTI_HOP, "4": Category.MULTI_HOP,
    "multi_hop": Category.MULTI_HOP, "multihop": Category.MULTI_HOP,
    "multi-hop": Category.MULTI_HOP,
    "c5": Category.ADVERSARIAL, "5": Category.ADVERSARIAL,
    "adversarial": Category.ADVERSARIAL,
}


def parse_category(value) -> Category:
    key = str(value).strip().lower()
    if key not in _CATEGORY_ALIASES:
        raise ValidationError(f"unknown category {value!r}")
    return _CATEGORY_ALIASES[key]


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------

_PUNCT_TABLE = str.maketrans("", "", string.punctuation)


def _normalize_tokens(text: str) -> list[str]:
    return text.lower().translate(_PUNCT_TABLE).split()


def token_f1(prediction: str, gold: str) -> float:
    """Multiset token-overlap F1; both empty -> 1, exactly one empty -> 0."""
    pred = _normalize_tokens(prediction)
    ref = _normalize_tokens(gold)
    if not pred and not ref:
        return 1.0
    if not pred or not ref:
        return 0.0
    overlap = sum((Counter(pred) & Counter(ref)).values())
    if overlap == 0:
        return 0.0
    precision = overlap / len(pred)
    recall = overlap / len(ref)
    return 2.0 * precision * recall / (precision + recall)


def bleu1(prediction: str, gold: str) -> float:
    """Clipped unigram precision times the brevity penalty."""
    pred = _normalize_tokens(prediction)
    ref = _normalize_tokens(gold)
    if not pred and not ref:
        return 1.0
    if not pred or not ref:
        return 0.0
    clipped = sum((Counter(pred) & Counter(ref)).values())
    precision = clipped / len(pred)
    brevity = 1.0 if len(pred) >= len(ref) \
        else exp(1.0 - len(ref) / len(pred))
    return precision * brevity


def weighted_average(scores: dict, counts: dict) -> float:
    """Instance-count-weighted mean over the supplied categories."""
    total = 0.0
    weight = 0.0
    for key, score in scores.items():
        count = counts[key]
        if count < 0:
            raise ValidationError(f"negative count for {key!r}")
        total += count * score
        weight += count
    if weight <= 0:
        raise ValidationError("weighted average over zero instances")
    return total / weight


# ---------------------------------------------------------------------------
# Dataset model
# ---------------------------------------------------------------------------

@dataclass
class QAInstance:
    conversation_id: str
    question: str
    gold_answer: str
    category: Category
    evidence_turn_ids: list[int] | None = None


@dataclass
class Conversation:
    conversation_id: str
    turns: list[tuple[str, str, float | None]]
    questions: list[QAInstance]


def load_dataset(path) -> tuple[list[Conversation], list[str]]:
    """Load the JSON-lines dataset (one conversation per line).

    Malformed records are skipped with a diagnostic, never aborting the
    load. Returns (conversations, diagnostics).
    """
    conversations: list[Conversation] = []
    skipped: list[str] = []
    with open(path, "r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
                conversations.append(_parse_conversation(record))
            except (json.JSONDecodeError, KeyError, TypeError,
                    ValidationError) as exc:
                skipped.append(f"line {line_no}: {type(exc).__name__}: {exc}")
    for message in skipped:
        logger.warning("skipped dataset record: %s", message)
    return conversations, skipped


def _parse_conversation(record: dict) -> Conversation:
    conversation_id = str(record["conversation_id"])
    turns = []
    for turn in record["turns"]:
        timestamp = turn.get("timestamp")
        turns.append((str(turn.get("user", "")), str(turn.get("reply", "")),
                      None if timestamp is None else float(timestamp)))
    questions = []
    for question in record["questions"]:
        questions.append(QAInstance(
            conversation_id=conversation_id,
            question=str(question["question"]),
            gold_answer=str(question["answer"]),
            category=parse_category(question["category"]),
            evidence_turn_ids=question.get("evidence")))
    return Conversation(conversation_id=conversation_id, turns=turns,
                        questions=questions)


def load_benchmark_native(path) -> tuple[list[Conversation], list[str]]:
    """Adapter for the public benchmark's nested-session JSON layout.

    Each sample holds ``conversation`` (session_1..session_k utterance
    lists) and ``qa`` records with integer categories 1..5 (mapped to
    C1..C5). Consecutive utterances pair into stored turns.
    """
    with open(path, "r", encoding="utf-8") as handle:
        data = json.load(handle)
    if isinstance(data, dict):
        data = [data]
    conversations: list[Conversation] = []
    skipped: list[str] = []
    for i, sample in enumerate(data):
        try:
            conversations.append(_parse_native_sample(sample, i))
        except (KeyError, TypeError, ValidationError) as exc:
            skipped.append(f"sample {i}: {type(exc).__name__}: {exc}")
    for message in skipped:
        logger.warning("skipped dataset record: %s", message)
    return conversations, skipped


def _parse_native_sample(sample: dict, index: int) -> Conversation:
    conversation_id = str(sample.get("sample_id", index))
    convo = sample["conversation"]
    session_keys = sorted(
        (key for key in convo
         if key.startswith("session_") and isinstance(convo[key], list)),
        key=lambda key: int(key.split("_", 1)[1]))
    turns: list[tuple[str, str, float | None]] = []
    for key in session_keys:
        utterances = []
        for item in convo[key]:
            speaker = str(item.get("speaker", ""))
            text = str(item.get("text") or item.get("clean_text") or "")
            if text:
                utterances.append(f"{speaker}: {text}" if speaker else text)
        for j in range(0, len(utterances), 2):
            pair = utterances[j:j + 2]
            turns.append((pair[0], pair[1] if len(pair) > 1 else "", None))
    questions = []
    for qa in sample.get("qa", []):
        questions.append(QAInstance(
            conversation_id=conversation_id,
            question=str(qa["question"]),
            gold_answer=str(qa.get("answer", REJECTION_ANSWER)),
            category=parse_category(qa["category"]),
            evidence_turn_ids=qa.get("evidence")))
    return Conversation(conversation_id=conversation_id, turns=turns,
                        questions=questions)


# ---------------------------------------------------------------------------
# Harness
# ---------------------------------------------------------------------------

Answerer = Callable[[str, Sequence[str]], str]


def echo_top_answerer(prompt: str, contents: Sequence[str]) -> str:
    """Deterministic extractive baseline: answer with the top candidate."""
    return contents[0] if contents else ""


@dataclass
class CategoryStats:
    f1: float
    bleu1: float
    count: int


@dataclass
class RejectionStats:
    true_rejections: int = 0
    false_refusals: int = 0
    non_adversarial_total: int = 0

    @property
    def false_refusal_rate(self) -> float:
        if self.non_adversarial_total == 0:
            return 0.0
        return self.false_refusals / self.non_adversarial_total


@dataclass
class EvalReport:
    per_category: dict[Category, CategoryStats]
    weighted_f1: float
    bleu1_weighted: float
    rejection_stats: RejectionStats
    instances: int = 0
    diagnostics: list[str] = field(default_factory=list)


def run_eval(dataset: list[Conversation],
             params: HyperParams | None = None,
             answerer: Answerer = echo_top_answerer,
             embedder=None, extractor=None,
             diagnostics: list[str] | None = None) -> EvalReport:
    """Replay conversations through fresh engines and score every question.

    Gated (Rejected) queries answer with the fixed rejection string;
    adversarial rejections count as true rejections, everything else as a
    false refusal. Deterministic given a deterministic answerer.
    """
    from .engine import MemoryEngine

    f1_totals: dict[Category, list[float]] = {}
    bleu_totals: dict[Category, list[float]] = {}
    rejections = RejectionStats()
    instances = 0

    for conversation in dataset:
        engine = MemoryEngine(params=params, embedder=embedder,
                              extractor=extractor)
        for user_text, reply_text, timestamp in conversation.turns:
            engine.append(user_text, reply_text, timestamp)
        for qa in conversation.questions:
            result = engine.query(qa.question)
            if qa.category is not Category.ADVERSARIAL:
                rejections.non_adversarial_total += 1
            if result.answerable:
                entries = evidence_entries(engine.graph, result.candidates)
                prompt = build_verification_prompt(qa.question, entries)
                prediction = answerer(prompt,
                                      [entry.text for entry in entries])
            else:
                prediction = REJECTION_ANSWER
                if qa.category is Category.ADVERSARIAL:
                    rejections.true_rejections += 1
                else:
                    rejections.false_refusals += 1
            f1_totals.setdefault(qa.category, []).append(
                token_f1(prediction, qa.gold_answer))
            bleu_totals.setdefault(qa.category, []).append(
                bleu1(prediction, qa.gold_answer))
            instances += 1

    per_category = {
        category: CategoryStats(
            f1=sum(values) / len(values),
            bleu1=sum(bleu_totals[category]) / len(values),
            count=len(values))
        for category, values in f1_totals.items()
    }
    scored = {category: stats for category, stats in per_category.items()
              if category is not Category.ADVERSARIAL}
    if scored:
        counts = {cat: stats.count for cat, stats in scored.items()}
        weighted_f1 = weighted_average(
            {cat: stats.f1 for cat, stats in scored.items()}, counts)
        weighted_bleu = weighted_average(
            {cat: stats.bleu1 for cat, stats in scored.items()}, counts)
    else:
        weighted_f1 = 0.0
        weighted_bleu = 0.0
    return EvalReport(per_category=per_category, weighted_f1=weighted_f1,
                      bleu1_weighted=weighted_bleu,
                      rejection_stats=rejections, instances=instances,
                      diagnostics=list(diagnostics or []))
