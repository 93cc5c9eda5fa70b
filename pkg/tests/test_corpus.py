"""Transcript parsing, segmentation validation and the fixed-window fallback."""
import json

import pytest

from dpsir_miner import corpus
from dpsir_miner.gateway import FixtureProvider


def write_transcript(tmp_path, name, lines):
    path = tmp_path / name
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def make_doc(n=8, doc_id="doc"):
    convs = tuple(corpus.Conversation(i, "Resident" if i % 2 else "Interviewer",
                                      f"Utterance number {i} about the island.")
                  for i in range(n))
    return corpus.Document(id=doc_id, title=doc_id, conversations=convs)


def test_parse_transcript_roundtrip(tmp_path):
    path = write_transcript(tmp_path, "interview-a.txt", [
        "Interviewer\tWhat changed in the harbor?",
        "Resident\tMore boats, more anchoring damage.",
        "",
        "Interviewer\tAnd the beach?",
    ])
    doc = corpus.parse_transcript(path)
    assert doc.id == "interview-a"
    assert [c.index for c in doc.conversations] == [0, 1, 2]
    assert doc.conversations[1].speaker == "Resident"
    assert doc.conversations[1].text.startswith("More boats")


def test_parse_transcript_redaction(tmp_path):
    path = write_transcript(tmp_path, "t.txt", ["Mrs. Chen\tThe reef is paler now."])
    doc = corpus.parse_transcript(path, redaction={"Mrs. Chen": "Resident-3"})
    assert doc.conversations[0].speaker == "Resident-3"


@pytest.mark.parametrize("lines,needle", [
    (["no tab separator here"], "speaker<TAB>text"),
    (["Speaker\t"], "empty conversation"),
    ([""], "empty transcript"),
])
def test_parse_transcript_errors(tmp_path, lines, needle):
    path = write_transcript(tmp_path, "bad.txt", lines)
    with pytest.raises(corpus.TranscriptError) as exc:
        corpus.parse_transcript(path)
    assert needle in str(exc.value)


def test_ingest_sorted_and_filtered(tmp_path):
    write_transcript(tmp_path, "b.txt", ["S\thello"])
    write_transcript(tmp_path, "a.tsv", ["S\thello"])
    (tmp_path / "notes.md").write_text("skip me")
    docs = corpus.ingest(tmp_path)
    assert [d.id for d in docs] == ["a", "b"]


def test_validate_segmentation_violations():
    doc = make_doc(6)
    assert corpus.validate_segmentation(doc, [0, 3]) == []
    assert corpus.validate_segmentation(doc, []) != []
    assert corpus.validate_segmentation(doc, [1, 3])  # must start at 0
    assert corpus.validate_segmentation(doc, [0, 3, 3])  # monotone
    assert corpus.validate_segmentation(doc, [0, 9])  # out of range
    assert corpus.validate_segmentation(doc, [0, "x"])  # type
    assert corpus.validate_segmentation(doc, [0, True])  # bool is not an index


def test_fixed_window_partitions():
    doc = make_doc(13)
    snippets = corpus.fixed_window_segmentation(doc, window=5)
    assert [(s.start, s.end) for s in snippets] == [(0, 4), (5, 9), (10, 12)]
    assert corpus.check_partition(doc, snippets)
    with pytest.raises(ValueError):
        corpus.fixed_window_segmentation(doc, window=0)


def test_segment_accepts_valid_reply():
    doc = make_doc(6)
    provider = FixtureProvider()
    reply = "```json\n" + json.dumps({"boundaries": [0, 2, 4],
                                      "topics": ["a", "b", "c"]}) + "\n```"
    provider.script(corpus.segmentation_prompt(doc, ["Q1"]), reply)
    result = corpus.segment(doc, ["Q1"], provider)
    assert not result.fallback
    assert [(s.start, s.end) for s in result.snippets] == [(0, 1), (2, 3), (4, 5)]
    assert result.snippets[0].topic_hint == "a"
    assert result.snippets[0].id == "doc:0"


def test_segment_retries_then_falls_back():
    doc = make_doc(14)
    provider = FixtureProvider()  # unscripted replies never validate
    result = corpus.segment(doc, ["Q1"], provider)
    assert result.fallback
    assert result.attempts == corpus.SEGMENT_RETRIES
    assert corpus.check_partition(doc, result.snippets)
    # exactly one prompt per attempt
    assert provider.call_count == corpus.SEGMENT_RETRIES


def test_segment_repair_prompt_carries_violations():
    doc = make_doc(6)
    provider = FixtureProvider()
    base = corpus.segmentation_prompt(doc, ["Q1"])
    bad = "```json\n" + json.dumps({"boundaries": [1, 3]}) + "\n```"
    provider.script(base, bad)
    result = corpus.segment(doc, ["Q1"], provider)
    # first retry prompt must echo the violation back to the model
    retry_prompts = [p for p in provider.seen_prompts if "previous answer was invalid" in p]
    assert retry_prompts and "start at 0" in retry_prompts[0]
    assert result.fallback


def test_single_conversation_short_circuits():
    doc = make_doc(1)
    provider = FixtureProvider()
    result = corpus.segment(doc, [], provider)
    assert provider.call_count == 0
    assert [(s.start, s.end) for s in result.snippets] == [(0, 0)]


def test_document_rejects_bad_indices():
    convs = (corpus.Conversation(0, "S", "a"), corpus.Conversation(2, "S", "b"))
    with pytest.raises(corpus.TranscriptError):
        corpus.Document(id="x", title="x", conversations=convs)
