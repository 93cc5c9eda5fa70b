import { describe, expect, it } from "vitest";
import { ApiClient, dpsirQuery } from "../src/api.js";
import type { IndicatorKind } from "../src/types.js";

function fakeFetch(calls: string[], body: unknown = {}) {
    return (url: string) => {
        calls.push(url);
        return Promise.resolve({ ok: true, status: 200, json: () => Promise.resolve(body) });
    };
}

describe("dpsirQuery", () => {
    it("omits empty hide/open", () => {
        expect(dpsirQuery("v-link-1", new Set(), new Set()))
            .toBe("version=v-link-1");
    });

    it("round-trips toggle state through query params", () => {
        const hide = new Set<IndicatorKind>(["State", "Impact"]);
        const open = new Set<IndicatorKind>(["Driver"]);
        const query = dpsirQuery("v-link-1", hide, open);
        const parsed = new URLSearchParams(query);
        expect(parsed.get("version")).toBe("v-link-1");
        expect(new Set(parsed.get("hide")!.split(","))).toEqual(new Set(["State", "Impact"]));
        expect(new Set(parsed.get("open")!.split(","))).toEqual(new Set(["Driver"]));
    });

    it("is order-independent over set insertion order", () => {
        const a = dpsirQuery("v", new Set<IndicatorKind>(["State", "Impact"]), new Set());
        const b = dpsirQuery("v", new Set<IndicatorKind>(["Impact", "State"]), new Set());
        expect(a).toBe(b);
    });
});

describe("ApiClient", () => {
    it("builds endpoint URLs from the base URL", async () => {
        const calls: string[] = [];
        const client = new ApiClient("http://api", fakeFetch(calls, { ids: [] }));
        await client.listVersions();
        await client.resultList("v-ind-1");
        await client.uncertaintyChart("v-ind-1");
        await client.evidence("v-ind-1", "interview-04:0");
        expect(calls).toEqual([
            "http://api/versions",
            "http://api/results/v-ind-1/list",
            "http://api/layouts/uncertainty?version=v-ind-1",
            "http://api/evidence/interview-04%3A0?version=v-ind-1",
        ]);
    });

    it("sends hide/open through the dpsir layout endpoint", async () => {
        const calls: string[] = [];
        const client = new ApiClient("", fakeFetch(calls));
        await client.dpsirGraph("v-link-1",
            new Set<IndicatorKind>(["State", "Impact"]),
            new Set<IndicatorKind>(["Driver"]));
        expect(calls).toEqual([
            "/layouts/dpsir?version=v-link-1&hide=Impact%2CState&open=Driver",
        ]);
    });

    it("throws on a non-2xx response", async () => {
        const client = new ApiClient("", (url) =>
            Promise.resolve({ ok: false, status: 404, json: () => Promise.resolve({}) }));
        await expect(client.resultList("nope")).rejects.toThrow("404");
    });
});
