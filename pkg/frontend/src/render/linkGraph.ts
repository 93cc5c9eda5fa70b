import type { LinkGraphPayload } from "../types.js";
import { esc, fmt, svgOpen } from "./util.js";

/**
 * Move one node by (dx, dy) and return a new payload. Pure, so drag
 * interaction is just "transform state, re-render". Edges follow
 * automatically because they are drawn from node positions by name.
 */
export function moveNode(payload: LinkGraphPayload, name: string,
                         dx: number, dy: number): LinkGraphPayload {
    const node = payload.nodes[name];
    if (!node) {
        return payload;
    }
    return {
        ...payload,
        nodes: { ...payload.nodes, [name]: { ...node, x: node.x + dx, y: node.y + dy } },
    };
}

export function renderLinkGraph(payload: LinkGraphPayload,
                                width = 600, height = 600): string {
    const parts: string[] = [svgOpen(width, height, "link-graph")];
    for (const edge of payload.edges) {
        const a = payload.nodes[edge.source];
        const b = payload.nodes[edge.target];
        if (!a || !b) {
            continue;
        }
        parts.push(`<g class="link-edge" data-source="${esc(edge.source)}" ` +
            `data-target="${esc(edge.target)}">` +
            `<line x1="${fmt(a.x)}" y1="${fmt(a.y)}" x2="${fmt(b.x)}" y2="${fmt(b.y)}" ` +
            `stroke="#555" stroke-opacity="${fmt(edge.opacity)}" marker-end="url(#arrow)"/>` +
            `<title>${esc(edge.relationship)}</title></g>`);
    }
    for (const [name, node] of Object.entries(payload.nodes)) {
        parts.push(`<g class="link-node" data-node-name="${esc(name)}">` +
            `<circle cx="${fmt(node.x)}" cy="${fmt(node.y)}" r="${fmt(node.radius)}" ` +
            `fill="${esc(node.color)}"/>` +
            `<text x="${fmt(node.x)}" y="${fmt(node.y - node.radius - 4)}" ` +
            `text-anchor="middle">${esc(node.name)}</text></g>`);
    }
    parts.push(`<defs><marker id="arrow" viewBox="0 0 10 10" refX="9" refY="5" ` +
        `markerWidth="6" markerHeight="6" orient="auto-start-reverse">` +
        `<path d="M 0 0 L 10 5 L 0 10 z" fill="#555"/></marker></defs>`);
    parts.push("</svg>");
    return parts.join("");
}
