"""Orchestration on top of the store: execute pipeline steps for a version,
apply rules, and build layouts from persisted results.

This is the layer both the HTTP API and the CLI call into; it owns the
per-version execution locks and the progress bookkeeping.
"""
from __future__ import annotations

import dataclasses
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from . import corpus as corpus_mod
from . import embed_cluster, layout as layout_mod, pipeline as pipe
from .circular_mds import allocate_sectors, optimize_angles
from .store import Workspace
from .taxonomy import Condition, IndicatorKind, Rule, RuleConflictError, Step


class ExecutionInProgress(RuntimeError):
    pass


@dataclass
class Progress:
    completed: int = 0
    total: int = 0
    state: str = "idle"  # idle | running | done | failed
    error: Optional[str] = None


class Engine:
    def __init__(self, workspace: Workspace, provider):
        self.workspace = workspace
        self.provider = provider
        self._version_locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()
        self.progress: dict[str, Progress] = {}
        self.embedding_cache = embed_cluster.EmbeddingCache()

    # -- corpus

    def ingest(self, source: Path | str, redaction: Optional[dict] = None) -> list[str]:
        docs = corpus_mod.ingest(source, redaction=redaction)
        for doc in docs:
            self.workspace.save_document(doc)
        return [d.id for d in docs]

    def segment_all(self, interview_questions: list[str]) -> dict[str, list[str]]:
        out: dict[str, list[str]] = {}
        for doc_id in self.workspace.list_ids("documents"):
            doc = self.workspace.load_document(doc_id)
            result = corpus_mod.segment(doc, interview_questions, self.provider)
            for s in result.snippets:
                self.workspace.save_snippet(s)
            out[doc_id] = [s.id for s in result.snippets]
        return out

    # -- helpers

    def _snippets_and_texts(self):
        docs = {d: self.workspace.load_document(d)
                for d in self.workspace.list_ids("documents")}
        snippets = sorted(self.workspace.iter_snippets(), key=lambda s: s.id)
        texts = {s.id: pipe.snippet_text(docs[s.document_id], s) for s in snippets}
        return snippets, texts

    def _version_lock(self, version_id: str) -> threading.Lock:
        with self._locks_guard:
            return self._version_locks.setdefault(version_id, threading.Lock())

    # -- execution

    def execute(self, version_id: str, k: int = 5) -> dict:
        """Run one pipeline step for a version and persist the results.

        Raises ExecutionInProgress when the same version is already running.
        """
        lock = self._version_lock(version_id)
        if not lock.acquire(blocking=False):
            raise ExecutionInProgress(f"execution already running for {version_id}")
        try:
            return self._execute_locked(version_id, k)
        finally:
            lock.release()

    def start_async(self, version_id: str, k: int = 5) -> threading.Thread:
        """Kick off execute() on a worker thread; poll self.progress for state.

        Raises ExecutionInProgress immediately when the version is busy, so
        callers get a synchronous conflict instead of a queued run.
        """
        lock = self._version_lock(version_id)
        if not lock.acquire(blocking=False):
            raise ExecutionInProgress(f"execution already running for {version_id}")
        progress = self.progress.setdefault(version_id, Progress())
        progress.state = "running"

        def run():
            try:
                self._execute_locked(version_id, k)
            except Exception:
                pass  # recorded in progress
            finally:
                lock.release()

        thread = threading.Thread(target=run, daemon=True)
        thread.start()
        return thread

    def _execute_locked(self, version_id: str, k: int) -> dict:
        progress = self.progress.setdefault(version_id, Progress())
        try:
            version = self.workspace.load_version(version_id)
            snippets, texts = self._snippets_and_texts()
            progress.state = "running"
            progress.completed = 0
            progress.total = len(snippets)
            if version.step == Step.INDICATOR_ID:
                results = pipe.identify_indicators(version, snippets, texts, k, self.provider)
            elif version.step == Step.VARIABLE_ID:
                upstream = self.workspace.load_results(version.upstream_version_id)
                results = pipe.identify_variables(version, upstream, snippets, texts,
                                                  k, self.provider)
            elif version.step == Step.LINK_ID:
                upstream_var = self.workspace.load_results(version.upstream_version_id)
                results = pipe.identify_links(version, upstream_var, snippets, texts,
                                              k, self.provider)
            else:
                raise ValueError(f"version step {version.step.value} is not executable")
            results = self._apply_stored_rules(results, version.step)
            self.workspace.save_results(version_id, results)
            progress.completed = progress.total
            progress.state = "done"
            return {"version_id": version_id, "results": len(results)}
        except Exception as exc:
            progress.state = "failed"
            progress.error = str(exc)
            raise

    def _apply_stored_rules(self, results: dict, step: Step) -> dict:
        rules = self.workspace.load_rules()
        if not rules:
            return results
        if step == Step.VARIABLE_ID:
            # variable results are keyed (snippet, indicator); a rule only
            # touches the runset of the indicator its variable belongs to
            kind_of: dict[str, str] = {}
            for vid in self.workspace.list_ids("versions"):
                for v in self.workspace.load_version(vid).variables:
                    kind_of.setdefault(v.name, v.indicator_kind.value)
            out = {}
            for key, runset in results.items():
                applicable = [r for r in rules
                              if kind_of.get(r.value) == runset.indicator_kind]
                applied = pipe.apply_rules({runset.snippet_id: runset}, applicable, step,
                                           known_labels=set(kind_of))
                out[key] = applied[runset.snippet_id]
            return out
        return pipe.apply_rules(results, rules, step)

    # -- rules

    def add_rule(self, snippet_id: str, condition: Condition, step: Step, value: str) -> Rule:
        if not self.workspace.exists("snippets", snippet_id):
            raise KeyError(f"unknown snippet {snippet_id}")
        existing = self.workspace.load_rules()
        for r in existing:
            if (r.snippet_id == snippet_id and r.step == step and r.value == value
                    and r.condition != condition):
                raise RuleConflictError(
                    f"conflicting rule for {snippet_id}: {value} already has "
                    f"{r.condition.value}")
        rule = Rule(id=f"rule-{len(existing) + 1:04d}", snippet_id=snippet_id,
                    condition=condition, step=step, value=value)
        self.workspace.save_rule(rule)
        return rule

    # -- layouts

    def uncertainty_scores(self, version_id: str) -> dict[str, float]:
        results = self.workspace.load_results(version_id)
        scores: dict[str, float] = {}
        for key, value in results.items():
            if isinstance(value, pipe.LinkStepResult):
                scores[value.snippet_id] = value.uncertainty
            else:
                sid = value.snippet_id
                # variable step: a snippet's score is the max over its indicators
                scores[sid] = max(scores.get(sid, 0.0), value.aggregate.uncertainty)
        return scores

    def _per_snippet_results(self, version_id: str) -> dict:
        """Collapse results to one entry per snippet (for embedding)."""
        results = self.workspace.load_results(version_id)
        out: dict = {}
        for key, value in results.items():
            if isinstance(value, pipe.LinkStepResult):
                continue
            sid = value.snippet_id
            if sid not in out or len(value.aggregate.evidence) > len(out[sid].aggregate.evidence):
                out[sid] = value
        return out

    def build_uncertainty_chart(self, version_id: str,
                                config: Optional[layout_mod.ChartConfig] = None) -> dict:
        chart = self.uncertainty_chart_layout(version_id, config)
        if chart is None:
            return {"nodes": [], "sectors": {}, "labels": []}
        return chart_layout_to_dict(chart)

    def uncertainty_chart_layout(self, version_id: str,
                                 config: Optional[layout_mod.ChartConfig] = None):
        per_snippet = self._per_snippet_results(version_id)
        if not per_snippet:
            return None
        _, texts = self._snippets_and_texts()
        collection = embed_cluster.embed_evidence(per_snippet, self.provider,
                                                  snippet_texts=texts,
                                                  cache=self.embedding_cache)
        scores = self.uncertainty_scores(version_id)
        if len(collection.snippet_ids) == 1:
            sid = collection.snippet_ids[0]
            clusters = embed_cluster.ClusterAssignment({sid: 0}, {0: [sid]})
            angles = {sid: 0.0}
        else:
            D = embed_cluster.cosine_distance_matrix(collection.vectors,
                                                     collection.snippet_ids)
            solution = optimize_angles(D, restarts=4)
            angles = dict(zip(collection.snippet_ids, solution.thetas))
            clusters = embed_cluster.agglomerative_cluster(collection.vectors,
                                                           collection.snippet_ids)
        embed_cluster.label_topics(clusters, texts, self.provider)
        sectors = allocate_sectors(clusters.clusters, angles)
        return layout_mod.build_uncertainty_chart(scores, angles, sectors, clusters,
                                                  config=config)

    def build_keyword_cloud(self, version_id: str,
                            kind: IndicatorKind = IndicatorKind.DRIVER) -> dict:
        results = self.workspace.load_results(version_id)
        runsets = {k: v for k, v in results.items() if isinstance(k, tuple)}
        misc_evidence = pipe.collect_misc_evidence(runsets, kind)
        items, _ = layout_mod.build_keyword_cloud(misc_evidence, self.provider)
        return {"items": [dataclasses.asdict(i) for i in items]}

    def _var_kinds(self, version_id: str) -> dict:
        version = self.workspace.load_version(version_id)
        return {v.name: v.indicator_kind for v in version.variables if not v.reserved}

    def _all_links(self, version_id: str) -> list:
        results = self.workspace.load_results(version_id)
        links = []
        for value in results.values():
            if isinstance(value, pipe.LinkStepResult):
                links.extend(value.links)
        return links

    def build_link_graph(self, version_id: str, snippet_id: str) -> dict:
        results = self.workspace.load_results(version_id)
        entry = results.get(snippet_id)
        links = entry.links if entry is not None else []
        graph = layout_mod.build_link_graph(links, self._var_kinds(version_id))
        return {"nodes": {k: dataclasses.asdict(v) for k, v in graph.nodes.items()},
                "edges": [dataclasses.asdict(e) for e in graph.edges]}

    def build_dpsir_graph(self, version_id: str, hide: Optional[set] = None,
                          opened: Optional[set] = None) -> dict:
        hide = hide or set()
        visible = {k for k in IndicatorKind if k not in hide}
        graph = layout_mod.build_dpsir_graph(self._all_links(version_id),
                                             self._var_kinds(version_id),
                                             visible=visible, opened=opened)
        return dpsir_layout_to_dict(graph)

    def evidence_for(self, version_id: str, snippet_id: str) -> dict:
        """Snippet conversations with highlight spans for click-to-evidence."""
        snippet = self.workspace.load_snippet(snippet_id)
        doc = self.workspace.load_document(snippet.document_id)
        results = self.workspace.load_results(version_id)
        evidence: list[str] = []
        explanation = ""
        for key, value in results.items():
            sid = value.snippet_id
            if sid != snippet_id:
                continue
            if isinstance(value, pipe.LinkStepResult):
                for l in value.links:
                    evidence.extend(l.evidence)
                    explanation = explanation or l.explanation
            else:
                evidence.extend(value.aggregate.evidence)
                explanation = explanation or value.aggregate.explanation
        conversations = []
        for c in doc.conversations[snippet.start:snippet.end + 1]:
            spans = []
            for sent in evidence:
                pos = c.text.find(sent)
                if pos >= 0:
                    spans.append({"start": pos, "end": pos + len(sent)})
            conversations.append({"index": c.index, "speaker": c.speaker,
                                  "text": c.text, "highlights": spans})
        return {"snippet_id": snippet_id, "document_id": doc.id,
                "conversations": conversations, "explanation": explanation}


def chart_layout_to_dict(chart: layout_mod.ChartLayout) -> dict:
    return {
        "chart_radius": chart.config.chart_radius,
        "nodes": [{"snippet_id": n.snippet_id, "cluster_id": n.cluster_id,
                   "theta": n.theta, "radius": n.radius,
                   "theta_target": n.theta_target, "radius_target": n.radius_target,
                   "x": n.position[0], "y": n.position[1], "radius_px": n.radius_px}
                  for n in chart.nodes],
        "sectors": {str(cid): list(span) for cid, span in chart.sectors.items()},
        "labels": [dataclasses.asdict(l) for l in chart.labels],
    }


def dpsir_layout_to_dict(graph: layout_mod.DpsirGraphLayout) -> dict:
    return {
        "blocks": {k: dataclasses.asdict(b) for k, b in graph.blocks.items()},
        "variables": {k: dataclasses.asdict(v) for k, v in graph.variables.items()},
        "edges": [dataclasses.asdict(e) for e in graph.edges],
    }
