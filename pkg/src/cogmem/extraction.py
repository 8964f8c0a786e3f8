"""Concept extraction from consolidation windows.

Two implementations share one interface:

* ``RuleBasedExtractor`` — deterministic lexicon-driven rules for offline
  use and tests. Capitalized mid-sentence tokens become Person/Other
  entities, preference verbs and event markers map their objects to
  Preference/Event concepts, and date-like strings attach as time hints.
* ``build_extraction_prompt`` / ``parse_extraction_response`` — the
  prompt builder and response parser for LLM-backed extraction. The parser
  accepts the two bracketed JSON blocks the prompt asks for and rejects
  malformed records with their block/record position.

Rule lexicons live in a versioned data file (``data/lexicon.json``) so tests
can pin a lexicon version.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from importlib import resources

from .errors import ExtractionParseError, ValidationError

CATEGORIES = ("Identity", "Preference", "Event", "Technical", "Person",
              "Other")

_SENTENCE_SPLIT = re.compile(r"[.!?\n]+")
_WORD = re.compile(r"[A-Za-z][A-Za-z0-9'\-]*")
_CAPITALIZED = re.compile(r"^[A-Z][a-z][A-Za-z'\-]*$")
_DATE_PATTERNS = (
    re.compile(r"\b\d{4}-\d{2}-\d{2}\b"),
    re.compile(r"\b\d{1,2} (?:January|February|March|April|May|June|July|"
               r"August|September|October|November|December) \d{4}\b"),
    re.compile(r"\b(?:January|February|March|April|May|June|July|August|"
               r"September|October|November|December) \d{1,2},? \d{4}\b"),
)


@dataclass
class ExtractedItem:
    name: str
    category: str
    attribute: str | None = None
    confidence: float = 1.0
    time_hint: str | None = None

    def __post_init__(self):
        if not self.name.strip():
            raise ValidationError("extracted item name is empty")
        if self.category not in CATEGORIES:
            raise ValidationError(
                f"unknown category {self.category!r}; "
                f"expected one of {CATEGORIES}")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValidationError(
                f"confidence must lie in [0, 1] (got {self.confidence!r})")


@dataclass
class ExtractedEdgeHint:
    src_name: str
    relation: str
    tgt_name: str
    weight: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.weight <= 1.0:
            raise ValidationError(
                f"edge hint weight must lie in [0, 1] (got {self.weight!r})")
        if self.src_name.strip().lower() == self.tgt_name.strip().lower():
            raise ValidationError("edge hint endpoints must differ")


def load_lexicon() -> dict:
    """Load the packaged rule lexicon (versioned data file)."""
    text = resources.files("cogmem.data").joinpath("lexicon.json") \
        .read_text(encoding="utf-8")
    return json.loads(text)


class RuleBasedExtractor:
    """Deterministic rule/lexicon extractor for offline operation."""

    def __init__(self, lexicon: dict | None = None):
        self.lexicon = lexicon or load_lexicon()
        self._confidence = self.lexicon["confidence"]
        self._pref_verbs = set(self.lexicon["preference_verbs"])
        self._skip = set(self.lexicon["skip_words"])
        self._non_person = set(self.lexicon["non_person"])
        self._technical = set(self.lexicon["technical_terms"])

    def extract(self, turns: list[str]
                ) -> tuple[list[ExtractedItem], list[ExtractedEdgeHint]]:
        """Extract typed concepts and co-occurrence edge hints from a window.

        Deterministic and idempotent: the same window always yields the same
        items in the same order. Items are deduplicated by lowercase name
        across the whole batch (first occurrence wins; later attributes and
        time hints are merged in).
        """
        by_name: dict[str, ExtractedItem] = {}
        order: list[str] = []
        hints: list[ExtractedEdgeHint] = []
        seen_hints: set[tuple[str, str, str]] = set()

        def add(item: ExtractedItem) -> ExtractedItem:
            key = item.name.lower()
            existing = by_name.get(key)
            if existing is None:
                by_name[key] = item
                order.append(key)
                return item
            if existing.attribute is None and item.attribute is not None:
                existing.attribute = item.attribute
            if existing.time_hint is None and item.time_hint is not None:
                existing.time_hint = item.time_hint
            return existing

        for turn in turns:
            if not turn.strip():
                continue
            time_hint = self._find_date(turn)
            turn_items = self._extract_turn(turn, time_hint)
            stored = [add(item) for item in turn_items]
            for hint in self._co_occurrence_hints(stored):
                key = (hint.src_name.lower(), hint.relation,
                       hint.tgt_name.lower())
                if key not in seen_hints:
                    seen_hints.add(key)
                    hints.append(hint)
        return [by_name[key] for key in order], hints

    def _find_date(self, text: str) -> str | None:
        for pattern in _DATE_PATTERNS:
            match = pattern.search(text)
            if match:
                return match.group(0)
        return None

    def _extract_turn(self, turn: str, time_hint: str | None
                      ) -> list[ExtractedItem]:
        items: list[ExtractedItem] = []
        for sentence in _SENTENCE_SPLIT.split(turn):
            words = _WORD.findall(sentence)
            if not words:
                continue
            lowered = [w.lower() for w in words]
            for idx, word in enumerate(words):
                low = lowered[idx]
                if idx > 0 and _CAPITALIZED.match(word) \
                        and low not in self._non_person:
                    items.append(ExtractedItem(
                        name=word, category="Person",
                        confidence=self._confidence["Person"]))
                elif idx > 0 and _CAPITALIZED.match(word):
                    items.append(ExtractedItem(
                        name=word, category="Other",
                        confidence=self._confidence["Other"]))
                if low in self._pref_verbs:
                    obj = self._object_after(words, lowered, idx)
                    if obj:
                        items.append(ExtractedItem(
                            name=obj, category="Preference",
                            confidence=self._confidence["Preference"]))
                if low in self._technical:
                    items.append(ExtractedItem(
                        name=low, category="Technical",
                        confidence=self._confidence["Technical"]))
            sent_low = " ".join(lowered)
            for marker in self.lexicon["event_markers"]:
                items.extend(self._event_after_marker(
                    sentence, words, lowered, marker))
            for marker in self.lexicon["identity_markers"]:
                prefix = marker + " "
                pos = sent_low.find(prefix)
                if pos >= 0:
                    rest = sent_low[pos + len(prefix):].split()
                    if rest:
                        items.append(ExtractedItem(
                            name=rest[0], category="Identity",
                            confidence=self._confidence["Identity"]))
        if time_hint:
            for item in items:
                if item.category == "Event" and item.time_hint is None:
                    item.time_hint = time_hint
        return items

    def _object_after(self, words: list[str], lowered: list[str],
                      idx: int) -> str | None:
        for nxt in range(idx + 1, len(words)):
            if lowered[nxt] not in self._skip:
                return lowered[nxt] if not _CAPITALIZED.match(words[nxt]) \
                    else words[nxt]
        return None

    def _event_after_marker(self, sentence: str, words: list[str],
                            lowered: list[str], marker: str
                            ) -> list[ExtractedItem]:
        marker_words = marker.split()
        items = []
        for idx in range(len(lowered) - len(marker_words) + 1):
            if lowered[idx:idx + len(marker_words)] == marker_words:
                tail = idx + len(marker_words)
                obj = self._object_after(words, lowered, tail - 1)
                if obj:
                    items.append(ExtractedItem(
                        name=obj, category="Event",
                        confidence=self._confidence["Event"]))
        return items

    def _co_occurrence_hints(self, items: list[ExtractedItem]
                             ) -> list[ExtractedEdgeHint]:
        """Same-turn hints mirroring the extraction schema's edge task."""
        hints = []
        people = [i for i in items if i.category == "Person"]
        prefs = [i for i in items if i.category == "Preference"]
        events = [i for i in items if i.category == "Event"]
        for person in people:
            for pref in prefs:
                if person.name.lower() != pref.name.lower():
                    hints.append(ExtractedEdgeHint(
                        person.name, "HAS_INTEREST", pref.name, 0.8))
            for event in events:
                if event.name.lower() != person.name.lower():
                    hints.append(ExtractedEdgeHint(
                        event.name, "INVOLVES", person.name, 0.8))
        return hints


# ---------------------------------------------------------------------------
# LLM-backed extraction surface
# ---------------------------------------------------------------------------

_PROMPT_HEADER = (
    "System Instruction: You are an expert knowledge engineer building a "
    "semantic graph from conversation history. Your goal is to consolidate "
    "episodic details into structured knowledge nodes.\n"
)

_PROMPT_REASONING = (
    "Reasoning (Chain of Thought):\n"
    "1. Analyze: Identify new facts not present in previous context.\n"
    "2. Classify: Categorize facts into Identity, Preference, Event, or "
    "Technical.\n"
    "3. Extract: Form canonical node names (e.g., \"likes camping\" -> "
    "\"Camping Preference\").\n"
)

_PROMPT_TASKS = (
    "Task 1: Node Extraction (JSON)\n"
    "[\n"
    "  {\"name\": \"Camping\", \"type\": \"Preference\", \"confidence\": 0.95},\n"
    "  {\"name\": \"John\", \"type\": \"Person\", \"attr\": \"Has Green Jacket\"},\n"
    "  {\"name\": \"Airport Trip\", \"type\": \"Event\", \"time\": \"2023-05-12\"}\n"
    "]\n"
    "\n"
    "Task 2: Edge Formation\n"
    "Link new nodes to existing anchors. Use weights w in [0.0, 1.0].\n"
    "[\n"
    "  {\"src\": \"John\", \"rel\": \"HAS_INTEREST\", \"tgt\": \"Camping\", \"w\": 1.0},\n"
    "  {\"src\": \"Airport Trip\", \"rel\": \"INVOLVES\", \"tgt\": \"John\", \"w\": 0.8}\n"
    "]\n"
)


def build_extraction_prompt(turns: list[str]) -> str:
    """Render the structured extraction prompt for a window of turns.

    Byte-deterministic: identical turns produce identical prompts. Turns are
    substituted verbatim, numbered in order.
    """
    if not turns:
        raise ValidationError("cannot build a prompt for an empty window")
    lines = [_PROMPT_HEADER]
    lines.append(f"Input Context: {len(turns)} recent conversation turns.\n")
    for i, turn in enumerate(turns, start=1):
        lines.append(f"Turn {i}: {turn}\n")
    lines.append("\n")
    lines.append(_PROMPT_REASONING)
    lines.append("\n")
    lines.append(_PROMPT_TASKS)
    return "".join(lines)


_TYPE_ALIASES = {c.lower(): c for c in CATEGORIES}


def parse_extraction_response(text: str
                              ) -> tuple[list[ExtractedItem],
                                         list[ExtractedEdgeHint]]:
    """Parse the two bracketed record blocks of an extraction response.

    Block 1 holds node records, block 2 edge records. Malformed records are
    rejected with their block and record index.
    """
    blocks = _find_json_arrays(text)
    if len(blocks) < 1:
        raise ExtractionParseError("no bracketed record block found")
    nodes_raw = blocks[0]
    edges_raw = blocks[1] if len(blocks) > 1 else []
    items = [_parse_node_record(rec, i) for i, rec in enumerate(nodes_raw)]
    hints = [_parse_edge_record(rec, i) for i, rec in enumerate(edges_raw)]
    return items, hints


def _find_json_arrays(text: str) -> list[list]:
    arrays = []
    pos = 0
    block_index = 0
    while True:
        start = text.find("[", pos)
        if start < 0:
            break
        depth = 0
        end = None
        in_string = False
        escaped = False
        for i in range(start, len(text)):
            ch = text[i]
            if in_string:
                if escaped:
                    escaped = False
                elif ch == "\\":
                    escaped = True
                elif ch == '"':
                    in_string = False
                continue
            if ch == '"':
                in_string = True
            elif ch == "[":
                depth += 1
            elif ch == "]":
                depth -= 1
                if depth == 0:
                    end = i
                    break
        if end is None:
            raise ExtractionParseError(
                f"unterminated record block starting at offset {start}",
                block=block_index)
        raw = text[start:end + 1]
        try:
            parsed = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ExtractionParseError(
                f"block {block_index} is not valid JSON at offset "
                f"{start + exc.pos}: {exc.msg}", block=block_index) from exc
        if not isinstance(parsed, list):
            raise ExtractionParseError(
                f"block {block_index} is not a record list",
                block=block_index)
        arrays.append(parsed)
        block_index += 1
        pos = end + 1
    return arrays


def _parse_node_record(record, index: int) -> ExtractedItem:
    if not isinstance(record, dict):
        raise ExtractionParseError(
            f"node record {index} is not an object", block=0, record=index)
    name = record.get("name")
    rtype = record.get("type")
    if not isinstance(name, str) or not name.strip():
        raise ExtractionParseError(
            f"node record {index} is missing a non-empty 'name'",
            block=0, record=index)
    if not isinstance(rtype, str) or rtype.lower() not in _TYPE_ALIASES:
        raise ExtractionParseError(
            f"node record {index} has unknown type {rtype!r}",
            block=0, record=index)
    confidence = record.get("confidence", 1.0)
    if not isinstance(confidence, (int, float)) or not 0 <= confidence <= 1:
        raise ExtractionParseError(
            f"node record {index} has invalid confidence {confidence!r}",
            block=0, record=index)
    attr = record.get("attr")
    time_hint = record.get("time")
    try:
        return ExtractedItem(name=name.strip(),
                             category=_TYPE_ALIASES[rtype.lower()],
                             attribute=attr,
                             confidence=float(confidence),
                             time_hint=time_hint)
    except ValidationError as exc:
        raise ExtractionParseError(
            f"node record {index}: {exc}", block=0, record=index) from exc


def _parse_edge_record(record, index: int) -> ExtractedEdgeHint:
    if not isinstance(record, dict):
        raise ExtractionParseError(
            f"edge record {index} is not an object", block=1, record=index)
    src = record.get("src")
    tgt = record.get("tgt")
    rel = record.get("rel", "RELATED")
    weight = record.get("w", 1.0)
    if not isinstance(src, str) or not src.strip() \
            or not isinstance(tgt, str) or not tgt.strip():
        raise ExtractionParseError(
            f"edge record {index} is missing 'src'/'tgt'",
            block=1, record=index)
    if not isinstance(weight, (int, float)) or not 0 <= weight <= 1:
        raise ExtractionParseError(
            f"edge record {index} has invalid weight {weight!r}",
            block=1, record=index)
    try:
        return ExtractedEdgeHint(src_name=src.strip(), relation=str(rel),
                                 tgt_name=tgt.strip(), weight=float(weight))
    except ValidationError as exc:
        raise ExtractionParseError(
            f"edge record {index}: {exc}", block=1, record=index) from exc
