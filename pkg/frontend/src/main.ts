// Browser shell: fetch payloads, inject rendered markup, wire events.
// All drawing logic lives in render/*; this file only does I/O and DOM.

import { ApiClient } from "./api.js";
import type { IndicatorKind, LinkGraphPayload } from "./types.js";
import { INDICATOR_KINDS } from "./types.js";
import {
    DpsirViewState, initialViewState, renderDpsirGraph, toggleHide, toggleOpen,
} from "./render/dpsir.js";
import { renderEvidence } from "./render/evidence.js";
import { renderKeywordCloud } from "./render/keywords.js";
import { moveNode, renderLinkGraph } from "./render/linkGraph.js";
import { renderResultList, renderUncertaintyChart } from "./render/uncertainty.js";

const api = new ApiClient("", (url) => fetch(url));

function panel(id: string): HTMLElement {
    const el = document.getElementById(id);
    if (!el) {
        throw new Error(`missing panel #${id}`);
    }
    return el;
}

async function showEvidence(version: string, snippetId: string): Promise<void> {
    panel("evidence").innerHTML = renderEvidence(await api.evidence(version, snippetId));
}

function wireSnippetClicks(container: HTMLElement, version: string): void {
    container.addEventListener("click", (event) => {
        const target = (event.target as Element).closest("[data-snippet-id]");
        const snippetId = target?.getAttribute("data-snippet-id");
        if (snippetId) {
            void showEvidence(version, snippetId);
        }
    });
}

function wireLinkGraphDrag(container: HTMLElement,
                           getPayload: () => LinkGraphPayload,
                           setPayload: (p: LinkGraphPayload) => void): void {
    let dragging: string | null = null;
    let last: [number, number] = [0, 0];
    container.addEventListener("pointerdown", (event) => {
        const node = (event.target as Element).closest("[data-node-name]");
        dragging = node?.getAttribute("data-node-name") ?? null;
        last = [event.clientX, event.clientY];
    });
    container.addEventListener("pointermove", (event) => {
        if (!dragging) {
            return;
        }
        const next = moveNode(getPayload(), dragging,
            event.clientX - last[0], event.clientY - last[1]);
        last = [event.clientX, event.clientY];
        setPayload(next);
        container.innerHTML = renderLinkGraph(next);
    });
    container.addEventListener("pointerup", () => { dragging = null; });
}

function wireDpsirToggles(container: HTMLElement, version: string,
                          state: { view: DpsirViewState }): void {
    const controls = panel("dpsir-controls");
    controls.innerHTML = INDICATOR_KINDS.map((kind) =>
        `<span class="kind-controls" data-kind="${kind}">${kind} ` +
        `<button data-action="hide" data-kind="${kind}">hide</button>` +
        `<button data-action="open" data-kind="${kind}">open</button></span>`).join(" ");
    controls.addEventListener("click", (event) => {
        const button = (event.target as Element).closest("button[data-action]");
        if (!button) {
            return;
        }
        const kind = button.getAttribute("data-kind") as IndicatorKind;
        const action = button.getAttribute("data-action");
        state.view = action === "hide"
            ? toggleHide(state.view, kind)
            : toggleOpen(state.view, kind);
        void api.dpsirGraph(version, state.view.hide, state.view.open)
            .then((payload) => { container.innerHTML = renderDpsirGraph(payload); });
    });
}

async function boot(): Promise<void> {
    const versions = (await api.listVersions()).ids;
    const params = new URLSearchParams(window.location.search);
    const indicatorVersion = params.get("indicators") ?? versions[0];
    const linkVersion = params.get("links") ?? versions[versions.length - 1];

    const list = await api.resultList(indicatorVersion);
    panel("result-list").innerHTML = renderResultList(list);
    panel("uncertainty").innerHTML =
        renderUncertaintyChart(await api.uncertaintyChart(indicatorVersion));
    wireSnippetClicks(panel("result-list"), indicatorVersion);
    wireSnippetClicks(panel("uncertainty"), indicatorVersion);

    panel("keywords").innerHTML =
        renderKeywordCloud(await api.keywordCloud(indicatorVersion, "Driver"));

    if (list.entries.length > 0) {
        let linkPayload = await api.linkGraph(linkVersion, list.entries[0].snippet_id);
        const linkPanel = panel("link-graph");
        linkPanel.innerHTML = renderLinkGraph(linkPayload);
        wireLinkGraphDrag(linkPanel, () => linkPayload, (p) => { linkPayload = p; });
    }

    const dpsirPanel = panel("dpsir");
    const state = { view: initialViewState() };
    dpsirPanel.innerHTML = renderDpsirGraph(
        await api.dpsirGraph(linkVersion, state.view.hide, state.view.open));
    wireDpsirToggles(dpsirPanel, linkVersion, state);
}

if (typeof document !== "undefined" && document.getElementById("result-list")) {
    void boot();
}
