import type { EvidencePayload, HighlightSpan } from "../types.js";
import { esc } from "./util.js";

export interface TextSegment {
    text: string;
    highlighted: boolean;
}

/**
 * Split a conversation's text into plain and highlighted segments.
 * Overlapping or adjacent spans are merged; out-of-range offsets are clamped.
 */
export function highlightSegments(text: string, spans: HighlightSpan[]): TextSegment[] {
    const clamped = spans
        .map((s) => ({ start: Math.max(0, s.start), end: Math.min(text.length, s.end) }))
        .filter((s) => s.end > s.start)
        .sort((a, b) => a.start - b.start);
    const merged: HighlightSpan[] = [];
    for (const span of clamped) {
        const last = merged[merged.length - 1];
        if (last && span.start <= last.end) {
            last.end = Math.max(last.end, span.end);
        } else {
            merged.push({ ...span });
        }
    }
    const segments: TextSegment[] = [];
    let cursor = 0;
    for (const span of merged) {
        if (span.start > cursor) {
            segments.push({ text: text.slice(cursor, span.start), highlighted: false });
        }
        segments.push({ text: text.slice(span.start, span.end), highlighted: true });
        cursor = span.end;
    }
    if (cursor < text.length) {
        segments.push({ text: text.slice(cursor), highlighted: false });
    }
    return segments;
}

/** The evidence panel: the snippet's conversations with model-cited sentences marked. */
export function renderEvidence(payload: EvidencePayload): string {
    const turns = payload.conversations.map((turn) => {
        const body = highlightSegments(turn.text, turn.highlights)
            .map((seg) => seg.highlighted
                ? `<mark>${esc(seg.text)}</mark>`
                : esc(seg.text))
            .join("");
        return `<div class="turn" data-turn-index="${turn.index}">` +
            `<span class="speaker">${esc(turn.speaker)}</span>` +
            `<span class="turn-text">${body}</span></div>`;
    });
    const explanation = payload.explanation
        ? `<p class="explanation">${esc(payload.explanation)}</p>`
        : "";
    return `<section class="evidence" data-snippet-id="${esc(payload.snippet_id)}" ` +
        `data-document-id="${esc(payload.document_id)}">` +
        `<h3>${esc(payload.snippet_id)}</h3>${explanation}${turns.join("")}</section>`;
}
