import { readFileSync } from "node:fs";
import { fileURLToPath } from "node:url";
import { dirname, join } from "node:path";

const here = dirname(fileURLToPath(import.meta.url));

/** Load a payload captured verbatim from the HTTP API. */
export function loadFixture<T>(name: string): T {
    return JSON.parse(readFileSync(join(here, "fixtures", name), "utf8")) as T;
}
