import { describe, expect, it } from "vitest";
import { renderResultList, renderUncertaintyChart } from "../src/render/uncertainty.js";
import type { ResultListPayload, UncertaintyChartPayload } from "../src/types.js";
import { loadFixture } from "./helpers.js";

const chart = loadFixture<UncertaintyChartPayload>("uncertainty.json");
const list = loadFixture<ResultListPayload>("result_list.json");

describe("renderUncertaintyChart", () => {
    const svg = renderUncertaintyChart(chart);

    it("draws one clickable dot per snippet at the server position", () => {
        for (const node of chart.nodes) {
            const id = node.snippet_id.replace(/:/g, "\\:");
            const pattern = new RegExp(
                `data-snippet-id="${id}" cx="${Number(node.x.toFixed(3))}"`);
            expect(svg).toMatch(pattern);
        }
        expect(svg.match(/class="snippet-dot"/g)?.length).toBe(chart.nodes.length);
    });

    it("uses only payload geometry (no NaN, radius from payload)", () => {
        expect(svg).not.toContain("NaN");
        expect(svg).toContain(`r="${chart.chart_radius}"`);
    });

    it("labels every cluster sector", () => {
        expect(svg.match(/class="sector-label"/g)?.length).toBe(chart.labels.length);
        for (const label of chart.labels) {
            expect(svg).toContain(`>${label.text}</text>`);
        }
    });
});

describe("renderResultList", () => {
    it("server payload arrives sorted by uncertainty, descending", () => {
        for (let i = 1; i < list.entries.length; i++) {
            expect(list.entries[i - 1].uncertainty)
                .toBeGreaterThanOrEqual(list.entries[i].uncertainty);
        }
        expect(list.entries[0].snippet_id).toBe("interview-04:0");
        expect(list.entries[0].uncertainty).toBeCloseTo(0.8, 12);
    });

    it("renders rows in payload order with snippet ids for navigation", () => {
        const html = renderResultList(list);
        const ids = [...html.matchAll(/data-snippet-id="([^"]+)"/g)].map((m) => m[1]);
        expect(ids).toEqual(list.entries.map((e) => e.snippet_id));
        expect(html).toContain('data-version-id="v-ind-1"');
        expect(html.indexOf("interview-04:0")).toBeLessThan(html.indexOf("interview-01:0"));
    });
});
