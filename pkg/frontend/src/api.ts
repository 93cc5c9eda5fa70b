import type {
    DpsirGraphPayload, EvidencePayload, IndicatorKind, KeywordCloudPayload,
    LinkGraphPayload, ResultListPayload, UncertaintyChartPayload,
} from "./types.js";

export type FetchLike = (url: string) => Promise<{ ok: boolean; status: number; json(): Promise<unknown> }>;

/** Query string for the DPSIR layout endpoint; hide/open round-trip here. */
export function dpsirQuery(version: string, hide: Set<IndicatorKind>, open: Set<IndicatorKind>): string {
    const params = new URLSearchParams({ version });
    if (hide.size > 0) {
        params.set("hide", [...hide].sort().join(","));
    }
    if (open.size > 0) {
        params.set("open", [...open].sort().join(","));
    }
    return params.toString();
}

export class ApiClient {
    constructor(private baseUrl: string, private fetchImpl: FetchLike) {}

    private async get<T>(path: string): Promise<T> {
        const response = await this.fetchImpl(`${this.baseUrl}${path}`);
        if (!response.ok) {
            throw new Error(`GET ${path} failed with ${response.status}`);
        }
        return (await response.json()) as T;
    }

    listVersions(): Promise<{ ids: string[] }> {
        return this.get("/versions");
    }

    resultList(version: string): Promise<ResultListPayload> {
        return this.get(`/results/${encodeURIComponent(version)}/list`);
    }

    uncertaintyChart(version: string): Promise<UncertaintyChartPayload> {
        return this.get(`/layouts/uncertainty?version=${encodeURIComponent(version)}`);
    }

    keywordCloud(version: string, kind: IndicatorKind): Promise<KeywordCloudPayload> {
        return this.get(`/layouts/keywords?version=${encodeURIComponent(version)}&kind=${kind}`);
    }

    linkGraph(version: string, snippet: string): Promise<LinkGraphPayload> {
        return this.get(`/layouts/linkgraph?version=${encodeURIComponent(version)}` +
            `&snippet=${encodeURIComponent(snippet)}`);
    }

    dpsirGraph(version: string, hide: Set<IndicatorKind>, open: Set<IndicatorKind>): Promise<DpsirGraphPayload> {
        return this.get(`/layouts/dpsir?${dpsirQuery(version, hide, open)}`);
    }

    evidence(version: string, snippet: string): Promise<EvidencePayload> {
        return this.get(`/evidence/${encodeURIComponent(snippet)}` +
            `?version=${encodeURIComponent(version)}`);
    }

    palette(): Promise<Record<string, string>> {
        return this.get("/palette");
    }
}
