"""Transcript ingestion and LLM-assisted segmentation into snippets.

Transcripts are UTF-8 files with one ``speaker<TAB>text`` record per line;
the file name (without extension) becomes the document id. Segmentation asks
the model for conversation indices only, validates them programmatically and
falls back to fixed windows when the model cannot produce a valid partition.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

SEGMENT_RETRIES = 3
FALLBACK_WINDOW = 6


class TranscriptError(ValueError):
    """Raised for malformed transcript files; carries file and line context."""

    def __init__(self, path: str, line: Optional[int], message: str):
        self.path = path
        self.line = line
        super().__init__(f"{path}:{line if line is not None else '-'}: {message}")


@dataclass(frozen=True)
class Conversation:
    index: int
    speaker: str
    text: str


@dataclass(frozen=True)
class Document:
    id: str
    title: str
    conversations: tuple[Conversation, ...]
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.conversations:
            raise TranscriptError(self.id, None, "empty transcript")
        for i, c in enumerate(self.conversations):
            if c.index != i:
                raise TranscriptError(self.id, i, "conversation indices must be contiguous from 0")


@dataclass(frozen=True)
class Snippet:
    id: str
    document_id: str
    start: int
    end: int  # inclusive
    topic_hint: Optional[str] = None

    def __post_init__(self):
        if self.start > self.end:
            raise ValueError(f"snippet {self.id}: start {self.start} > end {self.end}")


@dataclass
class SegmentationResult:
    snippets: list[Snippet]
    fallback: bool = False
    attempts: int = 0


def parse_transcript(path: Path, redaction: Optional[dict] = None) -> Document:
    """Parse one transcript file; optionally map speaker names to pseudonyms."""
    conversations = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            if "\t" not in line:
                raise TranscriptError(str(path), lineno, "expected speaker<TAB>text")
            speaker, text = line.split("\t", 1)
            if not text.strip():
                raise TranscriptError(str(path), lineno, "empty conversation text")
            if redaction:
                speaker = redaction.get(speaker, speaker)
            conversations.append(Conversation(len(conversations), speaker.strip(), text.strip()))
    if not conversations:
        raise TranscriptError(str(path), None, "empty transcript")
    doc_id = path.stem
    return Document(id=doc_id, title=doc_id, conversations=tuple(conversations),
                    metadata={"source": str(path)})


def ingest(source: Path | str, redaction: Optional[dict] = None) -> list[Document]:
    """Parse every ``*.txt``/``*.tsv`` transcript under a directory."""
    source = Path(source)
    docs = []
    for path in sorted(source.glob("*")):
        if path.suffix.lower() not in {".txt", ".tsv"}:
            continue
        docs.append(parse_transcript(path, redaction=redaction))
    return docs


def validate_segmentation(doc: Document, boundaries: list) -> list[str]:
    """Check a list of segment start indices; returns violations, never raises."""
    violations = []
    n = len(doc.conversations)
    if not isinstance(boundaries, list) or not boundaries:
        return ["boundaries must be a non-empty list of integers"]
    for b in boundaries:
        if not isinstance(b, int) or isinstance(b, bool):
            return [f"boundary {b!r} is not an integer"]
    if boundaries[0] != 0:
        violations.append("first segment must start at 0")
    for a, b in zip(boundaries, boundaries[1:]):
        if b <= a:
            violations.append(f"non-monotone boundaries: {a} then {b}")
    for b in boundaries:
        if b < 0 or b >= n:
            violations.append(f"boundary {b} out of range for {n} conversations")
    return violations


def _snippets_from_boundaries(doc: Document, boundaries: list[int],
                              topics: Optional[list] = None) -> list[Snippet]:
    n = len(doc.conversations)
    snippets = []
    for i, start in enumerate(boundaries):
        end = (boundaries[i + 1] - 1) if i + 1 < len(boundaries) else n - 1
        hint = topics[i] if topics and i < len(topics) else None
        snippets.append(Snippet(id=f"{doc.id}:{i}", document_id=doc.id,
                                start=start, end=end, topic_hint=hint))
    return snippets


def fixed_window_segmentation(doc: Document, window: int = FALLBACK_WINDOW) -> list[Snippet]:
    """Partition into consecutive windows of at most ``window`` conversations."""
    if window < 1:
        raise ValueError("window must be >= 1")
    boundaries = list(range(0, len(doc.conversations), window))
    return _snippets_from_boundaries(doc, boundaries)


def render_conversations(doc: Document) -> str:
    return "\n".join(f"[{c.index}] {c.speaker}: {c.text}" for c in doc.conversations)


def segmentation_prompt(doc: Document, interview_questions: list[str]) -> str:
    return (
        "Segment this interview transcript into consecutive topic-coherent snippets.\n"
        "Interview questions (context only):\n"
        + "\n".join(f"- {q}" for q in interview_questions)
        + "\n\nConversations:\n" + render_conversations(doc)
        + "\n\nAnswer with a fenced json block: "
        '{"boundaries": [start indices, strictly increasing, first must be 0], '
        '"topics": [one short topic per segment]}'
    )


def segment(doc: Document, interview_questions: list[str], provider,
            retries: int = SEGMENT_RETRIES) -> SegmentationResult:
    """Ask the model for topic-segment start indices and partition the document.

    The model sees the conversations (with indices) and the semi-structured
    interview questions as context, and must answer with a strictly increasing
    list of start indices beginning at 0. Invalid answers are retried with the
    violations echoed back; after ``retries`` failures we fall back to fixed
    windows so one stubborn document never stalls the run.
    """
    n = len(doc.conversations)
    if n == 1:
        return SegmentationResult([Snippet(id=f"{doc.id}:0", document_id=doc.id,
                                           start=0, end=0)], fallback=False, attempts=0)

    from .gateway import complete_one  # late import: corpus stays provider-agnostic

    base_prompt = segmentation_prompt(doc, interview_questions)

    prompt = base_prompt
    for attempt in range(1, retries + 1):
        raw = complete_one(provider, prompt, rep=0)
        boundaries, topics = _parse_segmentation_reply(raw)
        violations = validate_segmentation(doc, boundaries) if boundaries is not None \
            else ["reply was not a valid json block"]
        if not violations:
            return SegmentationResult(_snippets_from_boundaries(doc, boundaries, topics),
                                      fallback=False, attempts=attempt)
        prompt = (base_prompt + "\n\nYour previous answer was invalid:\n"
                  + "\n".join(f"- {v}" for v in violations) + "\nPlease fix it.")
    return SegmentationResult(fixed_window_segmentation(doc), fallback=True, attempts=retries)


def _parse_segmentation_reply(raw: str):
    from .gateway import extract_json_block
    payload = extract_json_block(raw)
    if not isinstance(payload, dict):
        return None, None
    boundaries = payload.get("boundaries")
    topics = payload.get("topics")
    if not isinstance(boundaries, list):
        return None, None
    if topics is not None and not isinstance(topics, list):
        topics = None
    return boundaries, topics


def check_partition(doc: Document, snippets: list[Snippet]) -> bool:
    """True iff the snippet ranges partition the document's conversations."""
    covered = []
    for s in snippets:
        covered.extend(range(s.start, s.end + 1))
    return sorted(covered) == list(range(len(doc.conversations))) and \
        len(covered) == len(set(covered))
