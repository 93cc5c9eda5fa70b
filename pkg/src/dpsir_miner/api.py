"""HTTP interface over the engine for the workbench UI."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from fastapi import FastAPI, HTTPException, Query
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel

from . import __version__, store
from .engine import Engine, ExecutionInProgress
from .taxonomy import (Condition, IndicatorKind, PromptTemplate, Step,
                       Variable, VersionEdits, create_version,
                       validate_template, INDICATOR_COLORS, RuleConflictError)


@dataclass
class ApiConfig:
    bind: str = "127.0.0.1:8000"
    workspace: str = "./workspace"
    k_default: int = 5
    cors_allow: list = field(default_factory=lambda: ["http://localhost:5173"])

    def __post_init__(self):
        if self.k_default < 1:
            raise ValueError("k_default must be >= 1")


class VersionCreateBody(BaseModel):
    step: str
    parent_id: Optional[str] = None
    upstream_version_id: Optional[str] = None
    add_variables: list[dict] = []
    remove_variables: list[str] = []
    redefine_indicators: dict[str, str] = {}
    append_indicator_text: dict[str, str] = {}
    template: Optional[dict] = None


class RuleBody(BaseModel):
    snippet_id: str
    condition: str
    step: str
    value: str


def create_app(engine: Engine, config: Optional[ApiConfig] = None) -> FastAPI:
    config = config or ApiConfig()
    app = FastAPI(title="dpsir-miner", version=__version__)
    app.add_middleware(CORSMiddleware, allow_origins=config.cors_allow,
                       allow_methods=["*"], allow_headers=["*"])
    ws = engine.workspace

    def _or_404(fn, *args):
        try:
            return fn(*args)
        except store.NotFoundError as exc:
            raise HTTPException(status_code=404, detail=str(exc))

    @app.get("/health")
    def health():
        return {"status": "ok", "version": __version__}

    @app.get("/palette")
    def palette():
        return {k.value: c for k, c in INDICATOR_COLORS.items()}

    @app.get("/documents")
    def list_documents():
        return {"ids": ws.list_ids("documents")}

    @app.get("/documents/{doc_id}")
    def get_document(doc_id: str):
        return store.document_to_dict(_or_404(ws.load_document, doc_id))

    @app.get("/snippets")
    def list_snippets():
        return {"ids": ws.list_ids("snippets")}

    @app.get("/snippets/{snippet_id}")
    def get_snippet(snippet_id: str):
        return store.snippet_to_dict(_or_404(ws.load_snippet, snippet_id))

    @app.get("/versions")
    def list_versions():
        return {"ids": ws.list_ids("versions")}

    @app.get("/versions/{version_id}")
    def get_version(version_id: str):
        return store.version_to_dict(_or_404(ws.load_version, version_id))

    @app.post("/versions", status_code=201)
    def post_version(body: VersionCreateBody):
        parent = ws.load_version(body.parent_id) if body.parent_id else None
        step = Step(body.step)
        template = None
        if body.template:
            template = PromptTemplate(step=step, persona=body.template.get("persona", ""),
                                      context=body.template.get("context", ""),
                                      user=body.template.get("user", ""))
            unknown = validate_template(template)
            if unknown:
                raise HTTPException(status_code=422,
                                    detail=f"unknown placeholders: {unknown}")
        edits = VersionEdits(
            add_variables=tuple(Variable(name=v["name"],
                                         indicator_kind=IndicatorKind(v["indicator_kind"]),
                                         definition=v.get("definition", ""))
                                for v in body.add_variables),
            remove_variables=tuple(body.remove_variables),
            redefine_indicators={IndicatorKind(k): v
                                 for k, v in body.redefine_indicators.items()},
            append_indicator_text={IndicatorKind(k): v
                                   for k, v in body.append_indicator_text.items()},
            template=template,
            upstream_version_id=body.upstream_version_id)
        version_id = f"v-{len(ws.list_ids('versions')) + 1:04d}"
        try:
            version = create_version(step, parent, edits, version_id=version_id)
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        ws.save_version(version)
        return store.version_to_dict(version)

    @app.post("/versions/{version_id}/execute", status_code=202)
    def execute(version_id: str, k: int = Query(default=config.k_default, ge=1)):
        _or_404(ws.load_version, version_id)
        try:
            engine.start_async(version_id, k)
        except ExecutionInProgress as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        return {"version_id": version_id, "state": "running"}

    @app.get("/versions/{version_id}/progress")
    def progress(version_id: str):
        p = engine.progress.get(version_id)
        if p is None:
            return {"state": "idle", "completed": 0, "total": 0}
        return {"state": p.state, "completed": p.completed, "total": p.total,
                "error": p.error}

    @app.get("/versions/{version_id}/results")
    def results(version_id: str):
        data = _or_404(ws.load_results, version_id)
        out = {}
        for key, value in data.items():
            name = key if isinstance(key, str) else "|".join(key)
            out[name] = (store.linkstep_to_dict(value)
                         if hasattr(value, "links") else store.runset_to_dict(value))
        return {"version_id": version_id, "entries": out}

    @app.get("/rules")
    def list_rules(snippet_id: Optional[str] = None):
        rules = ws.load_rules()
        if snippet_id:
            rules = [r for r in rules if r.snippet_id == snippet_id]
        return {"rules": [store.rule_to_dict(r) for r in rules]}

    @app.post("/rules", status_code=201)
    def post_rule(body: RuleBody):
        try:
            condition, step = Condition(body.condition), Step(body.step)
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        try:
            rule = engine.add_rule(body.snippet_id, condition, step, body.value)
        except RuleConflictError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        except KeyError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        return store.rule_to_dict(rule)

    @app.delete("/rules/{rule_id}", status_code=204)
    def delete_rule(rule_id: str):
        _or_404(ws.delete_rule, rule_id)

    @app.get("/layouts/uncertainty")
    def layout_uncertainty(version: str):
        return _or_404(engine.build_uncertainty_chart, version)

    @app.get("/layouts/keywords")
    def layout_keywords(version: str, kind: str = "Driver"):
        try:
            kind_enum = IndicatorKind(kind)
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return _or_404(engine.build_keyword_cloud, version, kind_enum)

    @app.get("/layouts/linkgraph")
    def layout_linkgraph(version: str, snippet: str):
        return _or_404(engine.build_link_graph, version, snippet)

    @app.get("/layouts/dpsir")
    def layout_dpsir(version: str, hide: str = "", open: str = ""):
        try:
            hide_set = {IndicatorKind(h) for h in hide.split(",") if h}
            open_set = {IndicatorKind(o) for o in open.split(",") if o}
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return _or_404(engine.build_dpsir_graph, version, hide_set, open_set)

    @app.get("/evidence/{snippet_id}")
    def evidence(snippet_id: str, version: str):
        return _or_404(engine.evidence_for, version, snippet_id)

    @app.get("/results/{version_id}/list")
    def result_list(version_id: str):
        """Results sorted by uncertainty, high to low, for the list view."""
        scores = _or_404(engine.uncertainty_scores, version_id)
        ordered = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
        return {"version_id": version_id,
                "entries": [{"snippet_id": sid, "uncertainty": u} for sid, u in ordered]}

    return app


def serve(engine: Engine, config: ApiConfig) -> None:
    import uvicorn
    host, _, port = config.bind.partition(":")
    app = create_app(engine, config)
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port or 8000))
