"""Workspace persistence: roundtrips, locking, integrity and archive export."""
import json
import zipfile

import pytest

from dpsir_miner import fixtures, store
from dpsir_miner.corpus import Conversation, Document, Snippet
from dpsir_miner.gateway import StructuredResponse
from dpsir_miner.pipeline import (AggregateResult, LinkResult, LinkStepResult,
                                  RunSet)
from dpsir_miner.taxonomy import (Condition, Rule, Step, VersionEdits,
                                  create_version)


@pytest.fixture
def ws(tmp_path):
    return store.Workspace(tmp_path / "ws")


def make_doc(doc_id="d1"):
    return Document(id=doc_id, title=doc_id,
                    conversations=(Conversation(0, "A", "hello"),
                                   Conversation(1, "B", "world")))


def make_runset(sid="d1:0"):
    agg = AggregateResult(labels=("Driver",), support={"Driver": 1.0},
                          evidence=("e1",), explanation="x", uncertainty=0.25)
    resp = StructuredResponse(raw_text="raw", parsed={"labels": ["Driver"]},
                              parse_attempts=1, valid=True, warnings=["w"])
    return RunSet(snippet_id=sid, step=Step.INDICATOR_ID, k=2,
                  responses=[resp], label_sets=[frozenset({"Driver"})],
                  aggregate=agg)


def test_document_snippet_roundtrip(ws):
    doc = make_doc()
    ws.save_document(doc)
    assert ws.load_document("d1") == doc
    s = Snippet(id="d1:0", document_id="d1", start=0, end=1, topic_hint="t")
    ws.save_snippet(s)
    assert ws.load_snippet("d1:0") == s
    assert [x.id for x in ws.iter_snippets()] == ["d1:0"]


def test_snippet_requires_document(ws):
    with pytest.raises(store.IntegrityError):
        ws.save_snippet(Snippet(id="x:0", document_id="x", start=0, end=0))


def test_version_roundtrip_and_parent_check(ws):
    v1 = create_version(Step.INDICATOR_ID, None, VersionEdits(), version_id="v1")
    ws.save_version(v1)
    assert ws.load_version("v1") == v1
    v2 = create_version(Step.INDICATOR_ID, v1, VersionEdits(), version_id="v2")
    ws.save_version(v2)
    orphan = create_version(Step.INDICATOR_ID, v2, VersionEdits(), version_id="v3")
    ws2 = store.Workspace(ws.root.parent / "other")
    with pytest.raises(store.IntegrityError):
        ws2.save_version(orphan)


def test_results_roundtrip_with_tuple_keys(ws):
    ws.save_document(make_doc())
    ws.save_snippet(Snippet(id="d1:0", document_id="d1", start=0, end=1))
    v = create_version(Step.INDICATOR_ID, None, VersionEdits(), version_id="v1")
    ws.save_version(v)
    link = LinkStepResult(snippet_id="d1:0", uncertainty=0.5, prompts_issued=3,
                          links=[LinkResult("d1:0", "a", "b", "rel", ("e",), "ex", 0.5, 0.6)])
    results = {"d1:0": make_runset(), ("d1:0", "Driver"): make_runset()}
    ws.save_results("v1", results)
    loaded = ws.load_results("v1")
    assert set(loaded) == {"d1:0", ("d1:0", "Driver")}
    assert loaded["d1:0"] == results["d1:0"]
    ws.save_results("v1", {"d1:0": link})
    assert ws.load_results("v1")["d1:0"] == link


def test_results_integrity_checks(ws):
    with pytest.raises(store.IntegrityError):
        ws.save_results("ghost-version", {})
    v = create_version(Step.INDICATOR_ID, None, VersionEdits(), version_id="v1")
    ws.save_version(v)
    with pytest.raises(store.IntegrityError):
        ws.save_results("v1", {"nope": make_runset("nope")})


def test_rules_roundtrip_and_delete(ws):
    r = Rule("rule-0001", "s1", Condition.MUST_HAVE, Step.INDICATOR_ID, "Driver")
    ws.save_rule(r)
    assert ws.load_rules() == [r]
    ws.delete_rule("rule-0001")
    assert ws.load_rules() == []
    with pytest.raises(store.NotFoundError):
        ws.delete_rule("rule-0001")


def test_not_found_and_unknown_collection(ws):
    with pytest.raises(store.NotFoundError):
        ws.load_document("missing")
    with pytest.raises(KeyError):
        ws._path("bogus", "x")


def test_ids_with_separators_are_safe(ws):
    ws.save_document(make_doc("a/b:c"))
    assert ws.load_document("a/b:c").id == "a/b:c"
    files = list((ws.root / "documents").glob("*.json"))
    assert len(files) == 1 and "/" not in files[0].stem


def test_lock_single_writer(ws):
    ws.acquire_lock()
    with pytest.raises(store.WorkspaceLockedError):
        store.Workspace(ws.root).acquire_lock()
    ws.release_lock()
    ws.acquire_lock()
    ws.release_lock()


def test_atomic_write_leaves_no_temp_files(ws):
    for i in range(20):
        ws.save_document(make_doc(f"d{i}"))
    leftovers = [p for p in (ws.root / "documents").iterdir()
                 if not p.name.endswith(".json")]
    assert leftovers == []


def test_files_stable_on_rewrite(ws):
    ws.save_document(make_doc())
    first = ws._path("documents", "d1").read_bytes()
    ws.save_document(make_doc())
    assert ws._path("documents", "d1").read_bytes() == first


def test_export_is_deterministic(tmp_path):
    ws = fixtures.generate_fixture_workspace(tmp_path / "ws")
    a = ws.export_workspace(tmp_path / "a.zip")
    b = ws.export_workspace(tmp_path / "b.zip")
    assert a.read_bytes() == b.read_bytes()
    with zipfile.ZipFile(a) as zf:
        assert all(i.date_time == (1980, 1, 1, 0, 0, 0) for i in zf.infolist())
        manifest = json.loads(zf.read("manifest.json"))
        assert manifest["format_version"] == store.FORMAT_VERSION


def test_export_import_roundtrip(tmp_path):
    ws = fixtures.generate_fixture_workspace(tmp_path / "ws")
    archive = ws.export_workspace(tmp_path / "w.zip")
    ws2 = store.Workspace.import_workspace(archive, tmp_path / "restored")
    assert ws2.list_ids("documents") == ws.list_ids("documents")
    assert ws2.list_ids("snippets") == ws.list_ids("snippets")
    assert ws2.load_version("v-ind-1") == ws.load_version("v-ind-1")


def test_import_rejects_bad_archives(tmp_path):
    junk = tmp_path / "junk.zip"
    junk.write_bytes(b"this is not a zip")
    with pytest.raises(store.IntegrityError, match="corrupt archive"):
        store.Workspace.import_workspace(junk, tmp_path / "out")
    # missing manifest
    no_manifest = tmp_path / "nm.zip"
    with zipfile.ZipFile(no_manifest, "w") as zf:
        zf.writestr("documents/x.json", "{}")
    with pytest.raises(store.IntegrityError, match="corrupt archive"):
        store.Workspace.import_workspace(no_manifest, tmp_path / "out2")
    # wrong format version
    wrong = tmp_path / "wrong.zip"
    with zipfile.ZipFile(wrong, "w") as zf:
        zf.writestr("manifest.json", json.dumps({"format_version": 999}))
    with pytest.raises(store.IntegrityError, match="migration"):
        store.Workspace.import_workspace(wrong, tmp_path / "out3")
