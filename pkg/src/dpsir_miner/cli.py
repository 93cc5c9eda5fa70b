"""Command line entry points.

Every command runs fully offline with the default fixture provider, so the
whole pipeline can be exercised without network access or credentials.
"""
from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import fixtures as fixtures_mod
from .api import ApiConfig, serve as serve_api
from .engine import Engine
from .gateway import FixtureProvider, RemoteProvider
from .layout import chart_svg
from .store import Workspace
from .taxonomy import IndicatorKind


def _provider(name: str, k: int = fixtures_mod.DEFAULT_K):
    if name == "fixture":
        return fixtures_mod.build_fixture_provider(k=k)
    if name == "remote":
        return RemoteProvider()
    if name == "null":
        return FixtureProvider()
    raise click.UsageError(f"unknown provider: {name}")


def _engine(workspace: str, provider: str, k: int = fixtures_mod.DEFAULT_K) -> Engine:
    return Engine(Workspace(workspace), _provider(provider, k))


workspace_opt = click.option("--workspace", default="./workspace", show_default=True,
                             help="Workspace directory.")
provider_opt = click.option("--provider", default="fixture", show_default=True,
                            type=click.Choice(["fixture", "remote", "null"]))


@click.group()
def main():
    """DPSIR text-mining workbench."""


@main.command("init-fixtures")
@click.argument("workspace", type=click.Path())
def init_fixtures(workspace):
    """Seed a workspace with the bundled interview corpus and versions."""
    ws = fixtures_mod.generate_fixture_workspace(Path(workspace))
    click.echo(f"fixture workspace at {ws.root}")


@main.group()
def corpus():
    """Ingest and segment interview transcripts."""


@corpus.command("ingest")
@click.argument("source", type=click.Path(exists=True))
@workspace_opt
def corpus_ingest(source, workspace):
    engine = _engine(workspace, "null")
    ids = engine.ingest(Path(source))
    click.echo(f"ingested {len(ids)} documents")
    for doc_id in ids:
        click.echo(f"  {doc_id}")


@corpus.command("segment")
@click.option("--questions", type=click.Path(exists=True), required=False,
              help="Text file with one interview question per line.")
@workspace_opt
@provider_opt
def corpus_segment(questions, workspace, provider):
    if questions:
        qs = [q.strip() for q in Path(questions).read_text().splitlines() if q.strip()]
    else:
        qs = list(fixtures_mod.INTERVIEW_QUESTIONS)
    engine = _engine(workspace, provider)
    out = engine.segment_all(qs)
    total = sum(len(v) for v in out.values())
    click.echo(f"segmented {len(out)} documents into {total} snippets")


@main.group()
def mine():
    """Run one prompting step for a taxonomy version."""


def _mine(workspace, provider, version, k):
    engine = _engine(workspace, provider, k)
    summary = engine.execute(version, k=k)
    click.echo(f"{version}: {summary['results']} result entries")


@mine.command("indicators")
@click.option("--version", required=True)
@click.option("--k", default=fixtures_mod.DEFAULT_K, show_default=True, type=int)
@workspace_opt
@provider_opt
def mine_indicators(version, k, workspace, provider):
    _mine(workspace, provider, version, k)


@mine.command("variables")
@click.option("--version", required=True)
@click.option("--k", default=fixtures_mod.DEFAULT_K, show_default=True, type=int)
@workspace_opt
@provider_opt
def mine_variables(version, k, workspace, provider):
    _mine(workspace, provider, version, k)


@mine.command("links")
@click.option("--version", required=True)
@click.option("--k", default=fixtures_mod.DEFAULT_K, show_default=True, type=int)
@workspace_opt
@provider_opt
def mine_links(version, k, workspace, provider):
    _mine(workspace, provider, version, k)


@main.command("export")
@click.option("--layout", "layout_name", required=True,
              type=click.Choice(["uncertainty", "keywords", "linkgraph", "dpsir"]))
@click.option("--version", required=True)
@click.option("--svg", "svg_path", type=click.Path(), default=None,
              help="Write the uncertainty chart as SVG instead of JSON.")
@click.option("--out", "out_path", type=click.Path(), default=None,
              help="Write JSON here instead of stdout.")
@click.option("--snippet", default=None, help="Snippet id for the link graph.")
@click.option("--kind", default="Driver", help="Indicator kind for keywords.")
@workspace_opt
@provider_opt
def export(layout_name, version, svg_path, out_path, snippet, kind, workspace, provider):
    """Export a computed layout as JSON or SVG."""
    engine = _engine(workspace, provider)
    if layout_name == "uncertainty":
        if svg_path:
            chart = engine.uncertainty_chart_layout(version)
            if chart is None:
                raise click.ClickException(f"no results stored for {version}")
            Path(svg_path).write_text(chart_svg(chart))
            click.echo(f"wrote {svg_path}")
            return
        payload = engine.build_uncertainty_chart(version)
    elif layout_name == "keywords":
        payload = engine.build_keyword_cloud(version, IndicatorKind(kind))
    elif layout_name == "linkgraph":
        if not snippet:
            raise click.UsageError("--snippet is required for the link graph")
        payload = engine.build_link_graph(version, snippet)
    else:
        payload = engine.build_dpsir_graph(version)
    text = json.dumps(payload, indent=1, sort_keys=True)
    if out_path:
        Path(out_path).write_text(text + "\n")
        click.echo(f"wrote {out_path}")
    else:
        click.echo(text)


@main.group()
def archive():
    """Move whole workspaces between machines."""


@archive.command("export")
@click.argument("target", type=click.Path())
@workspace_opt
def archive_export(target, workspace):
    path = Workspace(workspace).export_workspace(Path(target))
    click.echo(f"wrote {path}")


@archive.command("import")
@click.argument("source", type=click.Path(exists=True))
@workspace_opt
def archive_import(source, workspace):
    ws = Workspace.import_workspace(Path(source), Path(workspace))
    click.echo(f"imported into {ws.root}")


@main.command("serve")
@click.option("--bind", default="127.0.0.1:8000", show_default=True)
@workspace_opt
@provider_opt
def serve(bind, workspace, provider):
    """Run the HTTP API."""
    engine = _engine(workspace, provider)
    serve_api(engine, ApiConfig(bind=bind, workspace=workspace))


if __name__ == "__main__":
    sys.exit(main())
