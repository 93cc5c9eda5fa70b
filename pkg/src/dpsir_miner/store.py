"""File-backed workspace: documents, snippets, versions, run results, rules,
layouts and the embedding cache.

One JSON file per entity (results are bundled per version and step), written
atomically via temp-file + rename. A lock file enforces the single-writer
rule; export produces a deterministic zip archive.
"""
from __future__ import annotations

import dataclasses
import json
import os
import tempfile
import zipfile
from pathlib import Path
from typing import Iterator, Optional

from .corpus import Conversation, Document, Snippet
from .gateway import StructuredResponse
from .pipeline import AggregateResult, LinkResult, LinkStepResult, RunSet
from .taxonomy import (Condition, Indicator, IndicatorKind, PromptTemplate,
                       Rule, Step, TaxonomyVersion, Variable, VariableType)

FORMAT_VERSION = 1

COLLECTIONS = ("documents", "snippets", "versions", "runsets", "rules", "layouts", "cache")


class NotFoundError(KeyError):
    pass


class IntegrityError(ValueError):
    pass


class WorkspaceLockedError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# entity (de)serialization


def document_to_dict(doc: Document) -> dict:
    return {"id": doc.id, "title": doc.title,
            "conversations": [{"index": c.index, "speaker": c.speaker, "text": c.text}
                              for c in doc.conversations],
            "metadata": dict(doc.metadata)}


def document_from_dict(d: dict) -> Document:
    return Document(id=d["id"], title=d["title"],
                    conversations=tuple(Conversation(**c) for c in d["conversations"]),
                    metadata=dict(d.get("metadata", {})))


def snippet_to_dict(s: Snippet) -> dict:
    return {"id": s.id, "document_id": s.document_id, "start": s.start,
            "end": s.end, "topic_hint": s.topic_hint}


def snippet_from_dict(d: dict) -> Snippet:
    return Snippet(**d)


def version_to_dict(v: TaxonomyVersion) -> dict:
    return {
        "id": v.id, "step": v.step.value, "parent_id": v.parent_id,
        "upstream_version_id": v.upstream_version_id,
        "created_at": v.created_at, "result_id": v.result_id,
        "indicators": [{"kind": i.kind.value, "definition": i.definition, "color": i.color}
                       for i in v.indicators],
        "variables": [{"name": x.name, "indicator_kind": x.indicator_kind.value,
                       "definition": x.definition, "variable_type": x.variable_type.value,
                       "reserved": x.reserved} for x in v.variables],
        "template": {"step": v.template.step.value, "persona": v.template.persona,
                     "context": v.template.context, "user": v.template.user},
    }


def version_from_dict(d: dict) -> TaxonomyVersion:
    return TaxonomyVersion(
        id=d["id"], step=Step(d["step"]), parent_id=d.get("parent_id"),
        upstream_version_id=d.get("upstream_version_id"),
        created_at=d.get("created_at", ""), result_id=d.get("result_id"),
        indicators=tuple(Indicator(kind=IndicatorKind(i["kind"]),
                                   definition=i["definition"], color=i.get("color", ""))
                         for i in d["indicators"]),
        variables=tuple(Variable(name=x["name"],
                                 indicator_kind=IndicatorKind(x["indicator_kind"]),
                                 definition=x.get("definition", ""),
                                 variable_type=VariableType(x.get("variable_type", "societal")),
                                 reserved=x.get("reserved", False))
                        for x in d["variables"]),
        template=PromptTemplate(step=Step(d["template"]["step"]),
                                persona=d["template"].get("persona", ""),
                                context=d["template"].get("context", ""),
                                user=d["template"].get("user", "")),
    )


def _response_to_dict(r: StructuredResponse) -> dict:
    return {"raw_text": r.raw_text, "parsed": r.parsed, "parse_attempts": r.parse_attempts,
            "valid": r.valid, "error": r.error, "warnings": list(r.warnings)}


def _response_from_dict(d: dict) -> StructuredResponse:
    return StructuredResponse(raw_text=d["raw_text"], parsed=d.get("parsed"),
                              parse_attempts=d.get("parse_attempts", 0),
                              valid=d.get("valid", False), error=d.get("error"),
                              warnings=list(d.get("warnings", [])))


def _aggregate_to_dict(a: AggregateResult) -> dict:
    return {"labels": list(a.labels), "support": dict(a.support),
            "evidence": list(a.evidence), "explanation": a.explanation,
            "uncertainty": a.uncertainty, "rule_overrides": list(a.rule_overrides)}


def _aggregate_from_dict(d: dict) -> AggregateResult:
    return AggregateResult(labels=tuple(d["labels"]), support=dict(d["support"]),
                           evidence=tuple(d["evidence"]), explanation=d["explanation"],
                           uncertainty=d["uncertainty"],
                           rule_overrides=tuple(d.get("rule_overrides", [])))


def runset_to_dict(r: RunSet) -> dict:
    return {"type": "runset", "snippet_id": r.snippet_id, "step": r.step.value,
            "k": r.k, "indicator_kind": r.indicator_kind,
            "responses": [_response_to_dict(x) for x in r.responses],
            "label_sets": [sorted(s, key=repr) for s in r.label_sets],
            "aggregate": _aggregate_to_dict(r.aggregate)}


def runset_from_dict(d: dict) -> RunSet:
    return RunSet(snippet_id=d["snippet_id"], step=Step(d["step"]), k=d["k"],
                  responses=[_response_from_dict(x) for x in d["responses"]],
                  label_sets=[frozenset(tuple(i) if isinstance(i, list) else i
                                        for i in s) for s in d["label_sets"]],
                  aggregate=_aggregate_from_dict(d["aggregate"]),
                  indicator_kind=d.get("indicator_kind"))


def linkstep_to_dict(r: LinkStepResult) -> dict:
    return {"type": "linkstep", "snippet_id": r.snippet_id,
            "uncertainty": r.uncertainty, "prompts_issued": r.prompts_issued,
            "rule_overrides": list(r.rule_overrides),
            "links": [dataclasses.asdict(l) | {"evidence": list(l.evidence)}
                      for l in r.links]}


def linkstep_from_dict(d: dict) -> LinkStepResult:
    return LinkStepResult(
        snippet_id=d["snippet_id"], uncertainty=d["uncertainty"],
        prompts_issued=d["prompts_issued"],
        rule_overrides=tuple(d.get("rule_overrides", [])),
        links=[LinkResult(snippet_id=l["snippet_id"], source=l["source"], target=l["target"],
                          relationship=l["relationship"], evidence=tuple(l["evidence"]),
                          explanation=l["explanation"], uncertainty=l["uncertainty"],
                          support=l.get("support", 1.0)) for l in d["links"]])


def rule_to_dict(r: Rule) -> dict:
    return {"id": r.id, "snippet_id": r.snippet_id, "condition": r.condition.value,
            "step": r.step.value, "value": r.value}


def rule_from_dict(d: dict) -> Rule:
    return Rule(id=d["id"], snippet_id=d["snippet_id"],
                condition=Condition(d["condition"]), step=Step(d["step"]),
                value=d["value"])


def _dump(payload: dict) -> str:
    return json.dumps(payload, ensure_ascii=False, sort_keys=True, indent=1) + "\n"


# ---------------------------------------------------------------------------


class Workspace:
    """Directory-backed store; one writer at a time, any number of readers."""

    def __init__(self, root: Path | str, create: bool = True):
        self.root = Path(root)
        if create:
            self.root.mkdir(parents=True, exist_ok=True)
            for name in COLLECTIONS:
                (self.root / name).mkdir(exist_ok=True)
        elif not self.root.is_dir():
            raise NotFoundError(f"workspace not found: {self.root}")
        self._lock_path = self.root / ".lock"

    # -- locking

    def acquire_lock(self) -> None:
        try:
            fd = os.open(self._lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise WorkspaceLockedError(f"workspace locked: {self._lock_path}")
        with os.fdopen(fd, "w") as f:
            f.write(str(os.getpid()))

    def release_lock(self) -> None:
        self._lock_path.unlink(missing_ok=True)

    # -- low-level

    def _path(self, kind: str, entity_id: str) -> Path:
        if kind not in COLLECTIONS:
            raise KeyError(f"unknown collection: {kind}")
        safe = entity_id.replace("/", "_").replace(":", "__")
        return self.root / kind / f"{safe}.json"

    def _write(self, kind: str, entity_id: str, payload: dict) -> str:
        path = self._path(kind, entity_id)
        fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as f:
                f.write(_dump(payload))
            os.replace(tmp, path)
        finally:
            if os.path.exists(tmp):
                os.unlink(tmp)
        return entity_id

    def _read(self, kind: str, entity_id: str) -> dict:
        path = self._path(kind, entity_id)
        if not path.exists():
            raise NotFoundError(f"{kind}/{entity_id} not found")
        return json.loads(path.read_text(encoding="utf-8"))

    def list_ids(self, kind: str) -> list[str]:
        ids = []
        for path in sorted((self.root / kind).glob("*.json")):
            ids.append(json.loads(path.read_text(encoding="utf-8")).get("id", path.stem))
        return ids

    def exists(self, kind: str, entity_id: str) -> bool:
        return self._path(kind, entity_id).exists()

    # -- typed helpers

    def save_document(self, doc: Document) -> str:
        return self._write("documents", doc.id, document_to_dict(doc))

    def load_document(self, doc_id: str) -> Document:
        return document_from_dict(self._read("documents", doc_id))

    def save_snippet(self, snippet: Snippet) -> str:
        if not self.exists("documents", snippet.document_id):
            raise IntegrityError(f"snippet {snippet.id} references unknown "
                                 f"document {snippet.document_id}")
        return self._write("snippets", snippet.id, snippet_to_dict(snippet))

    def load_snippet(self, snippet_id: str) -> Snippet:
        return snippet_from_dict(self._read("snippets", snippet_id))

    def iter_snippets(self) -> Iterator[Snippet]:
        for sid in self.list_ids("snippets"):
            yield self.load_snippet(sid)

    def save_version(self, version: TaxonomyVersion) -> str:
        if version.parent_id and not self.exists("versions", version.parent_id):
            raise IntegrityError(f"version {version.id} references unknown "
                                 f"parent {version.parent_id}")
        return self._write("versions", version.id, version_to_dict(version))

    def load_version(self, version_id: str) -> TaxonomyVersion:
        return version_from_dict(self._read("versions", version_id))

    def save_results(self, version_id: str, results: dict) -> str:
        """Persist one step's results (RunSets or LinkStepResults) for a version."""
        if not self.exists("versions", version_id):
            raise IntegrityError(f"results reference unknown version {version_id}")
        entries = {}
        for key, value in results.items():
            name = key if isinstance(key, str) else "|".join(map(str, key))
            snippet_id = value.snippet_id
            if not self.exists("snippets", snippet_id):
                raise IntegrityError(f"result references unknown snippet {snippet_id}")
            entries[name] = (runset_to_dict(value) if isinstance(value, RunSet)
                             else linkstep_to_dict(value))
        return self._write("runsets", version_id,
                           {"id": version_id, "entries": entries})

    def load_results(self, version_id: str) -> dict:
        payload = self._read("runsets", version_id)
        out: dict = {}
        for name, d in payload["entries"].items():
            key: object = tuple(name.split("|")) if "|" in name else name
            out[key] = (linkstep_from_dict(d) if d.get("type") == "linkstep"
                        else runset_from_dict(d))
        return out

    def save_rule(self, rule: Rule) -> str:
        return self._write("rules", rule.id, rule_to_dict(rule))

    def load_rules(self) -> list[Rule]:
        return [rule_from_dict(self._read("rules", rid)) for rid in self.list_ids("rules")]

    def delete_rule(self, rule_id: str) -> None:
        path = self._path("rules", rule_id)
        if not path.exists():
            raise NotFoundError(f"rules/{rule_id} not found")
        path.unlink()

    def save_layout(self, layout_id: str, payload: dict) -> str:
        return self._write("layouts", layout_id, {"id": layout_id, **payload})

    def load_layout(self, layout_id: str) -> dict:
        return self._read("layouts", layout_id)

    def save_cache(self, key: str, payload: dict) -> str:
        return self._write("cache", key, {"id": key, **payload})

    def load_cache(self, key: str) -> Optional[dict]:
        try:
            return self._read("cache", key)
        except NotFoundError:
            return None

    # -- export / import

    def export_workspace(self, archive_path: Path | str) -> Path:
        """Write the whole workspace into a deterministic zip archive."""
        archive_path = Path(archive_path)
        manifest = {"format_version": FORMAT_VERSION, "collections": list(COLLECTIONS)}
        with zipfile.ZipFile(archive_path, "w", zipfile.ZIP_DEFLATED) as zf:
            info = zipfile.ZipInfo("manifest.json", date_time=(1980, 1, 1, 0, 0, 0))
            zf.writestr(info, _dump(manifest))
            for kind in COLLECTIONS:
                for path in sorted((self.root / kind).glob("*.json")):
                    info = zipfile.ZipInfo(f"{kind}/{path.name}",
                                           date_time=(1980, 1, 1, 0, 0, 0))
                    info.compress_type = zipfile.ZIP_DEFLATED
                    zf.writestr(info, path.read_bytes())
        return archive_path

    @classmethod
    def import_workspace(cls, archive_path: Path | str, root: Path | str) -> "Workspace":
        archive_path = Path(archive_path)
        try:
            with zipfile.ZipFile(archive_path) as zf:
                manifest = json.loads(zf.read("manifest.json"))
                if manifest.get("format_version") != FORMAT_VERSION:
                    raise IntegrityError(
                        f"archive format {manifest.get('format_version')} needs migration "
                        f"(expected {FORMAT_VERSION})")
                ws = cls(root)
                for name in zf.namelist():
                    if name == "manifest.json" or name.endswith("/"):
                        continue
                    kind, _, filename = name.partition("/")
                    if kind not in COLLECTIONS or not filename:
                        continue
                    (ws.root / kind / filename).write_bytes(zf.read(name))
                return ws
        except (zipfile.BadZipFile, KeyError) as exc:
            raise IntegrityError(f"corrupt archive: {exc}")
