import type { ResultListPayload, UncertaintyChartPayload } from "../types.js";
import { esc, fmt, svgOpen } from "./util.js";

// Categorical fills for clusters; cycled when there are more clusters.
const CLUSTER_COLORS = [
    "#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#b07aa1",
    "#76b7b2", "#edc948", "#9c755f", "#bab0ac", "#ff9da7",
];

export function clusterColor(clusterId: number): string {
    const index = ((clusterId % CLUSTER_COLORS.length) + CLUSTER_COLORS.length)
        % CLUSTER_COLORS.length;
    return CLUSTER_COLORS[index];
}

/**
 * The polar chart of per-snippet uncertainty: one dot per snippet at the
 * server-computed position, cluster sector boundaries as spokes, topic
 * labels at the rim. Every dot carries data-snippet-id for click-to-evidence.
 */
export function renderUncertaintyChart(payload: UncertaintyChartPayload): string {
    const R = payload.chart_radius;
    const side = 2 * R + 80;
    const parts: string[] = [svgOpen(side, side, "uncertainty-chart")];
    parts.push(`<circle cx="0" cy="0" r="${fmt(R)}" fill="none" stroke="#ccc"/>`);
    for (const [clusterId, [start]] of Object.entries(payload.sectors)) {
        const x = R * Math.cos(start);
        const y = R * Math.sin(start);
        parts.push(`<line x1="0" y1="0" x2="${fmt(x)}" y2="${fmt(y)}" ` +
            `stroke="#ddd" data-cluster-id="${esc(clusterId)}"/>`);
    }
    for (const node of payload.nodes) {
        parts.push(`<circle class="snippet-dot" data-snippet-id="${esc(node.snippet_id)}" ` +
            `cx="${fmt(node.x)}" cy="${fmt(node.y)}" r="${fmt(node.radius_px)}" ` +
            `fill="${clusterColor(node.cluster_id)}"/>`);
    }
    for (const label of payload.labels) {
        const x = label.radius * Math.cos(label.theta);
        const y = label.radius * Math.sin(label.theta);
        parts.push(`<text class="sector-label" x="${fmt(x)}" y="${fmt(y)}" ` +
            `text-anchor="middle">${esc(label.text)}</text>`);
    }
    parts.push("</svg>");
    return parts.join("");
}

/**
 * The triage list. The server already sorts entries by uncertainty,
 * descending; the order of payload.entries is preserved verbatim.
 */
export function renderResultList(payload: ResultListPayload): string {
    const rows = payload.entries.map((entry) =>
        `<li class="result-row" data-snippet-id="${esc(entry.snippet_id)}">` +
        `<span class="result-id">${esc(entry.snippet_id)}</span>` +
        `<span class="result-score">${entry.uncertainty.toFixed(3)}</span></li>`);
    return `<ol class="result-list" data-version-id="${esc(payload.version_id)}">` +
        `${rows.join("")}</ol>`;
}
