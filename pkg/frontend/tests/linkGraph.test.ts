import { describe, expect, it } from "vitest";
import { moveNode, renderLinkGraph } from "../src/render/linkGraph.js";
import type { LinkGraphPayload } from "../src/types.js";
import { loadFixture } from "./helpers.js";

const payload = loadFixture<LinkGraphPayload>("linkgraph.json");

describe("renderLinkGraph", () => {
    const svg = renderLinkGraph(payload);

    it("draws every node at its server position with its color", () => {
        for (const [name, node] of Object.entries(payload.nodes)) {
            expect(svg).toContain(`data-node-name="${name}"`);
            expect(svg).toContain(`fill="${node.color}"`);
        }
        expect(svg.match(/class="link-node"/g)?.length)
            .toBe(Object.keys(payload.nodes).length);
    });

    it("draws edges between node positions with relationship tooltips", () => {
        for (const edge of payload.edges) {
            const a = payload.nodes[edge.source];
            expect(svg).toContain(`x1="${Number(a.x.toFixed(3))}"`);
            expect(svg).toContain(`<title>${edge.relationship}</title>`);
        }
    });
});

describe("moveNode (drag helper)", () => {
    const name = Object.keys(payload.nodes)[0];

    it("shifts only the dragged node and is pure", () => {
        const before = payload.nodes[name];
        const moved = moveNode(payload, name, 10, -5);
        expect(moved.nodes[name].x).toBeCloseTo(before.x + 10);
        expect(moved.nodes[name].y).toBeCloseTo(before.y - 5);
        // Original payload untouched; other nodes untouched.
        expect(payload.nodes[name]).toBe(before);
        for (const other of Object.keys(payload.nodes)) {
            if (other !== name) {
                expect(moved.nodes[other]).toBe(payload.nodes[other]);
            }
        }
    });

    it("edges follow the dragged node on re-render", () => {
        const edge = payload.edges.find((e) => e.source === name || e.target === name);
        if (!edge) {
            return;
        }
        const moved = moveNode(payload, name, 40, 40);
        const svg = renderLinkGraph(moved);
        const attr = edge.source === name ? "x1" : "x2";
        expect(svg).toContain(
            `${attr}="${Number(moved.nodes[name].x.toFixed(3))}"`);
    });

    it("ignores unknown node names", () => {
        expect(moveNode(payload, "no-such-node", 1, 1)).toBe(payload);
    });
});
