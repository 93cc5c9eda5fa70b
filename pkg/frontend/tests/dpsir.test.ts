import { describe, expect, it } from "vitest";
import { ApiClient } from "../src/api.js";
import {
    initialViewState, renderDpsirGraph, toggleHide, toggleOpen, variableFill,
} from "../src/render/dpsir.js";
import type { DpsirGraphPayload, IndicatorKind } from "../src/types.js";
import { loadFixture } from "./helpers.js";

const full = loadFixture<DpsirGraphPayload>("dpsir.json");
const hidden = loadFixture<DpsirGraphPayload>("dpsir_hidden.json");

describe("view state toggles", () => {
    it("toggling hide twice returns to the initial state", () => {
        let state = initialViewState();
        state = toggleHide(state, "State");
        expect([...state.hide]).toEqual(["State"]);
        state = toggleHide(state, "State");
        expect(state.hide.size).toBe(0);
    });

    it("hiding a kind closes it; hidden kinds cannot be opened", () => {
        let state = toggleOpen(initialViewState(), "Driver");
        expect(state.open.has("Driver")).toBe(true);
        state = toggleHide(state, "Driver");
        expect(state.open.has("Driver")).toBe(false);
        expect(toggleOpen(state, "Driver").open.has("Driver")).toBe(false);
    });

    it("does not mutate previous states", () => {
        const before = initialViewState();
        toggleHide(before, "Impact");
        expect(before.hide.size).toBe(0);
    });
});

describe("hide/open round-trip through the layout endpoint", () => {
    it("requests the layout with the toggled state and renders the reply", async () => {
        let state = initialViewState();
        state = toggleHide(state, "State");
        state = toggleHide(state, "Impact");
        state = toggleOpen(state, "Driver");
        const calls: string[] = [];
        const client = new ApiClient("", (url) => {
            calls.push(url);
            return Promise.resolve({
                ok: true, status: 200,
                json: () => Promise.resolve(hidden as unknown),
            });
        });
        const payload = await client.dpsirGraph("v-link-1", state.hide, state.open);
        expect(calls).toEqual([
            "/layouts/dpsir?version=v-link-1&hide=Impact%2CState&open=Driver",
        ]);
        const svg = renderDpsirGraph(payload);
        // The server dropped the hidden kinds and opened Driver; the client
        // renders exactly what came back.
        expect(Object.keys(payload.blocks).sort()).toEqual(
            ["Driver", "Pressure", "Response"]);
        expect(svg).not.toContain('data-kind="State"');
        expect(svg).not.toContain('data-kind="Impact"');
        expect(svg).toContain('class="dpsir-block opened" data-kind="Driver"');
    });
});

describe("renderDpsirGraph", () => {
    const svg = renderDpsirGraph(full);

    it("draws every block at its server position", () => {
        for (const [kind, block] of Object.entries(full.blocks)) {
            expect(svg).toContain(`data-kind="${kind}"`);
            expect(svg).toContain(`cx="${Number(block.x.toFixed(3))}"`);
        }
    });

    it("draws edges with server-computed width and opacity", () => {
        for (const edge of full.edges) {
            expect(svg).toContain(`stroke-width="${Number(edge.width.toFixed(3))}"`);
            expect(svg).toContain(`stroke-opacity="${Number(edge.opacity.toFixed(3))}"`);
        }
        expect(svg.match(/class="dpsir-edge"/g)?.length).toBe(full.edges.length);
    });

    it("renders opened-block variables with corner flags from the payload", () => {
        const opened = loadFixture<DpsirGraphPayload>("dpsir_hidden.json");
        const svg2 = renderDpsirGraph(opened);
        const names = Object.keys(opened.variables);
        expect(names.length).toBeGreaterThan(0);
        for (const name of names) {
            expect(svg2).toContain(`data-variable="${name}"`);
        }
        const corners = Object.values(opened.variables).filter((v) => v.corner).length;
        expect(svg2.match(/class="dpsir-variable corner"/g)?.length ?? 0).toBe(corners);
    });

    it("darkens variable fill monotonically with saturation", () => {
        expect(variableFill("#123456", 1)).toContain("100%");
        expect(variableFill("#123456", 0)).toContain("20%");
    });
});
