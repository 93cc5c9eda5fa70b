"""End-to-end orchestration: execute, progress, stored rules and layouts."""
import time

import pytest

from dpsir_miner import fixtures
from dpsir_miner.engine import Engine, ExecutionInProgress
from dpsir_miner.store import Workspace
from dpsir_miner.taxonomy import Condition, IndicatorKind, Step


def test_execute_all_steps(mined_workspace):
    ws, engine = mined_workspace
    ind = ws.load_results("v-ind-1")
    assert len(ind) == len(ws.list_ids("snippets"))
    var = ws.load_results("v-var-1")
    assert all(isinstance(k, tuple) for k in var)
    links = ws.load_results("v-link-1")
    assert set(links) == set(ind)
    assert engine.progress["v-link-1"].state == "done"


def test_execute_unknown_version(fixture_engine):
    with pytest.raises(Exception):
        fixture_engine.execute("ghost")
    assert fixture_engine.progress["ghost"].state == "failed"


def test_concurrent_execution_conflicts(fixture_workspace):
    slow = fixtures.build_fixture_provider(latency=0.2)
    engine = Engine(fixture_workspace, slow)
    engine.start_async("v-ind-1", k=2)
    with pytest.raises(ExecutionInProgress):
        engine.execute("v-ind-1", k=2)
    # a different version is not blocked by v-ind-1's run
    assert engine._version_lock("v-var-1").acquire(blocking=False)
    engine._version_lock("v-var-1").release()
    for _ in range(100):
        if engine.progress["v-ind-1"].state != "running":
            break
        time.sleep(0.1)
    assert engine.progress["v-ind-1"].state == "done"
    # lock released: a fresh run is accepted again
    engine.execute("v-ind-1", k=2)


def test_uncertainty_scores_shape(mined_workspace):
    ws, engine = mined_workspace
    scores = engine.uncertainty_scores("v-ind-1")
    assert set(scores) == set(ws.list_ids("snippets"))
    assert all(0.0 <= u <= 1.0 for u in scores.values())
    assert scores[fixtures.SCRIPTED_08_SNIPPET] == pytest.approx(0.8, abs=1e-12)


def test_stored_rule_applied_on_execute(fixture_engine):
    sid = fixtures.fixture_snippets()[0].id
    fixture_engine.add_rule(sid, Condition.MUST_HAVE, Step.INDICATOR_ID, "Response")
    fixture_engine.execute("v-ind-1")
    runset = fixture_engine.workspace.load_results("v-ind-1")[sid]
    assert "Response" in runset.aggregate.labels
    assert runset.aggregate.rule_overrides
    # and the override never leaks into any rendered prompt
    assert all("Response" not in p or "rule" not in p.lower()
               for p in fixture_engine.provider.seen_prompts)


def test_add_rule_validations(fixture_engine):
    with pytest.raises(KeyError):
        fixture_engine.add_rule("ghost", Condition.MUST_HAVE, Step.INDICATOR_ID, "Driver")
    sid = fixtures.fixture_snippets()[0].id
    fixture_engine.add_rule(sid, Condition.MUST_HAVE, Step.INDICATOR_ID, "Driver")
    from dpsir_miner.taxonomy import RuleConflictError
    with pytest.raises(RuleConflictError):
        fixture_engine.add_rule(sid, Condition.MUST_NOT_HAVE, Step.INDICATOR_ID, "Driver")


def test_variable_rule_scoped_to_matching_indicator(fixture_engine):
    # a must_not_have on a Pressure variable must not touch Driver runsets
    sid = fixtures.SCRIPTED_23_SNIPPET
    fixture_engine.add_rule(sid, Condition.MUST_NOT_HAVE, Step.VARIABLE_ID, "population")
    fixture_engine.execute("v-ind-1")
    fixture_engine.execute("v-var-1")
    results = fixture_engine.workspace.load_results("v-var-1")
    driver = results[(sid, "Driver")]
    assert "population" not in driver.aggregate.labels
    for key, runset in results.items():
        if key[0] == sid and runset.indicator_kind != "Driver":
            assert not runset.aggregate.rule_overrides


def test_layout_endpoints_from_engine(mined_workspace):
    _, engine = mined_workspace
    chart = engine.build_uncertainty_chart("v-ind-1")
    assert chart["nodes"] and chart["sectors"]
    cloud = engine.build_keyword_cloud("v-var-1", IndicatorKind.DRIVER)
    assert {i["word"] for i in cloud["items"]} >= {"garbage"}
    sid = fixtures.SCRIPTED_23_SNIPPET
    graph = engine.build_link_graph("v-link-1", sid)
    assert isinstance(graph["nodes"], dict)
    dpsir = engine.build_dpsir_graph("v-link-1")
    assert set(dpsir["blocks"]) == {k.value for k in IndicatorKind}
    hidden = engine.build_dpsir_graph("v-link-1", hide={IndicatorKind.STATE,
                                                        IndicatorKind.IMPACT})
    assert set(hidden["blocks"]) == {"Driver", "Pressure", "Response"}


def test_evidence_navigation(mined_workspace):
    ws, engine = mined_workspace
    results = ws.load_results("v-ind-1")
    sid = next(s for s in sorted(results) if results[s].aggregate.evidence)
    payload = engine.evidence_for("v-ind-1", sid)
    assert payload["snippet_id"] == sid
    hits = [(c, h) for c in payload["conversations"] for h in c["highlights"]]
    assert hits, "expected at least one highlighted span"
    for c, h in hits:
        span = c["text"][h["start"]:h["end"]]
        assert span in results[sid].aggregate.evidence


def test_segment_all_uses_scripted_boundaries(tmp_path):
    ws = Workspace(tmp_path / "ws")
    provider = fixtures.build_fixture_provider()
    engine = Engine(ws, provider)
    for doc in fixtures.fixture_documents():
        ws.save_document(doc)
    out = engine.segment_all(list(fixtures.INTERVIEW_QUESTIONS))
    expected = {}
    for s in fixtures.fixture_snippets():
        expected.setdefault(s.document_id, []).append(s.id)
    assert out == expected
