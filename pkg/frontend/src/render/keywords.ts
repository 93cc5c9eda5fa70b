import type { KeywordCloudPayload } from "../types.js";
import { esc, fmt, svgOpen } from "./util.js";

/** Darker text for more frequent words; color_value is 0..1 from the server. */
export function keywordColor(colorValue: number): string {
    const clamped = Math.max(0, Math.min(1, colorValue));
    const lightness = Math.round(70 - 50 * clamped);
    return `hsl(210, 60%, ${lightness}%)`;
}

export function renderKeywordCloud(payload: KeywordCloudPayload,
                                   width = 600, height = 400): string {
    const parts: string[] = [svgOpen(width, height, "keyword-cloud")];
    for (const item of payload.items) {
        parts.push(`<text class="keyword" data-word="${esc(item.word)}" ` +
            `data-frequency="${item.frequency}" ` +
            `x="${fmt(item.x)}" y="${fmt(item.y)}" ` +
            `font-size="${fmt(item.font_size)}" text-anchor="middle" ` +
            `fill="${keywordColor(item.color_value)}">${esc(item.word)}</text>`);
    }
    parts.push("</svg>");
    return parts.join("");
}
