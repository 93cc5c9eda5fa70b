import type { DpsirGraphPayload, IndicatorKind } from "../types.js";
import { esc, fmt, svgOpen } from "./util.js";

/** Toggle state for the radial graph; hide/open round-trip via the API. */
export interface DpsirViewState {
    hide: Set<IndicatorKind>;
    open: Set<IndicatorKind>;
}

export function initialViewState(): DpsirViewState {
    return { hide: new Set(), open: new Set() };
}

function toggled(set: Set<IndicatorKind>, kind: IndicatorKind): Set<IndicatorKind> {
    const next = new Set(set);
    if (next.has(kind)) {
        next.delete(kind);
    } else {
        next.add(kind);
    }
    return next;
}

export function toggleHide(state: DpsirViewState, kind: IndicatorKind): DpsirViewState {
    const hide = toggled(state.hide, kind);
    // A hidden block cannot stay opened.
    const open = new Set(state.open);
    if (hide.has(kind)) {
        open.delete(kind);
    }
    return { hide, open };
}

export function toggleOpen(state: DpsirViewState, kind: IndicatorKind): DpsirViewState {
    if (state.hide.has(kind)) {
        return state;
    }
    return { hide: new Set(state.hide), open: toggled(state.open, kind) };
}

/** Variable fill: the block color washed out toward white by low saturation. */
export function variableFill(blockColor: string, saturation: number): string {
    const clamped = Math.max(0, Math.min(1, saturation));
    const pct = Math.round(20 + 80 * clamped);
    return `color-mix(in srgb, ${blockColor} ${pct}%, white)`;
}

export function renderDpsirGraph(payload: DpsirGraphPayload,
                                 width = 800, height = 800): string {
    const parts: string[] = [svgOpen(width, height, "dpsir-graph")];
    for (const edge of payload.edges) {
        const src = payload.variables[edge.source] ?? payload.blocks[edge.source_block];
        const dst = payload.variables[edge.target] ?? payload.blocks[edge.target_block];
        if (!src || !dst) {
            continue;
        }
        parts.push(`<line class="dpsir-edge" data-source="${esc(edge.source)}" ` +
            `data-target="${esc(edge.target)}" data-frequency="${edge.frequency}" ` +
            `x1="${fmt(src.x)}" y1="${fmt(src.y)}" x2="${fmt(dst.x)}" y2="${fmt(dst.y)}" ` +
            `stroke="${esc(edge.color)}" stroke-width="${fmt(edge.width)}" ` +
            `stroke-opacity="${fmt(edge.opacity)}"/>`);
    }
    for (const [kind, block] of Object.entries(payload.blocks)) {
        const cls = block.opened ? "dpsir-block opened" : "dpsir-block";
        parts.push(`<g class="${cls}" data-kind="${esc(kind)}">` +
            `<circle cx="${fmt(block.x)}" cy="${fmt(block.y)}" r="36" ` +
            `fill="${esc(block.color)}" fill-opacity="${block.opened ? "0.15" : "0.9"}"/>` +
            `<text x="${fmt(block.x)}" y="${fmt(block.y)}" text-anchor="middle" ` +
            `dominant-baseline="middle">${esc(kind)}</text></g>`);
    }
    for (const [name, variable] of Object.entries(payload.variables)) {
        const block = payload.blocks[variable.block];
        const color = block ? block.color : "#888";
        const cls = variable.corner ? "dpsir-variable corner" : "dpsir-variable";
        parts.push(`<g class="${cls}" data-variable="${esc(name)}" ` +
            `data-block="${esc(variable.block)}">` +
            `<circle cx="${fmt(variable.x)}" cy="${fmt(variable.y)}" r="10" ` +
            `fill="${variableFill(color, variable.saturation)}" stroke="${esc(color)}"/>` +
            `<text x="${fmt(variable.x)}" y="${fmt(variable.y + 22)}" ` +
            `text-anchor="middle" font-size="9">${esc(name)}</text></g>`);
    }
    parts.push("</svg>");
    return parts.join("");
}
