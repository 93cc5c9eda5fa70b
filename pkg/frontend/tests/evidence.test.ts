import { describe, expect, it } from "vitest";
import { highlightSegments, renderEvidence } from "../src/render/evidence.js";
import type { EvidencePayload } from "../src/types.js";
import { loadFixture } from "./helpers.js";

const payload = loadFixture<EvidencePayload>("evidence.json");

describe("highlightSegments", () => {
    it("reconstructs the original text exactly", () => {
        for (const turn of payload.conversations) {
            const joined = highlightSegments(turn.text, turn.highlights)
                .map((s) => s.text).join("");
            expect(joined).toBe(turn.text);
        }
    });

    it("highlights exactly the server-cited character ranges", () => {
        const cited = payload.conversations.find((c) => c.highlights.length > 0)!;
        const segments = highlightSegments(cited.text, cited.highlights);
        const highlighted = segments.filter((s) => s.highlighted).map((s) => s.text);
        for (const span of cited.highlights) {
            const expected = cited.text.slice(span.start, span.end);
            expect(highlighted.some((t) => t.includes(expected))).toBe(true);
        }
        for (const text of highlighted) {
            expect(cited.highlights.some((span) =>
                cited.text.slice(span.start, span.end).includes(text) ||
                text.includes(cited.text.slice(span.start, span.end)))).toBe(true);
        }
    });

    it("merges overlapping and adjacent spans", () => {
        const segments = highlightSegments("abcdef",
            [{ start: 0, end: 3 }, { start: 2, end: 4 }, { start: 4, end: 5 }]);
        expect(segments).toEqual([
            { text: "abcde", highlighted: true },
            { text: "f", highlighted: false },
        ]);
    });

    it("clamps out-of-range spans", () => {
        const segments = highlightSegments("abc", [{ start: -2, end: 99 }]);
        expect(segments).toEqual([{ text: "abc", highlighted: true }]);
    });
});

describe("renderEvidence", () => {
    const html = renderEvidence(payload);

    it("marks the cited evidence inside the right conversation turn", () => {
        const cited = payload.conversations.find((c) => c.highlights.length > 0)!;
        const span = cited.highlights[0];
        const sentence = cited.text.slice(span.start, span.end);
        expect(html).toContain(`<mark>${sentence}`);
        const uncited = payload.conversations.find((c) => c.highlights.length === 0)!;
        const turnHtml = html.slice(html.indexOf(`data-turn-index="${uncited.index}"`));
        expect(turnHtml.slice(0, turnHtml.indexOf("</div>"))).not.toContain("<mark>");
    });

    it("identifies snippet and document for navigation context", () => {
        expect(html).toContain(`data-snippet-id="${payload.snippet_id}"`);
        expect(html).toContain(`data-document-id="${payload.document_id}"`);
    });
});
