/** Escape text for inclusion in HTML/SVG markup. */
export function esc(text: string): string {
    return text
        .replace(/&/g, "&amp;")
        .replace(/</g, "&lt;")
        .replace(/>/g, "&gt;")
        .replace(/"/g, "&quot;");
}

export function fmt(n: number): string {
    // Fixed precision keeps the markup stable and small.
    return Number(n.toFixed(3)).toString();
}

export function svgOpen(width: number, height: number, cls: string): string {
    return `<svg xmlns="http://www.w3.org/2000/svg" class="${cls}" ` +
        `viewBox="${fmt(-width / 2)} ${fmt(-height / 2)} ${fmt(width)} ${fmt(height)}" ` +
        `width="${fmt(width)}" height="${fmt(height)}">`;
}
