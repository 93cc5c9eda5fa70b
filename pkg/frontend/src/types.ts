// Payload shapes exactly as the HTTP API emits them. The client never
// recomputes geometry; these are render inputs, not models.

export interface ChartNodePayload {
    snippet_id: string;
    cluster_id: number;
    theta: number;
    radius: number;
    theta_target: number;
    radius_target: number;
    x: number;
    y: number;
    radius_px: number;
}

export interface SectorLabelPayload {
    cluster_id: number;
    text: string;
    theta: number;
    radius: number;
}

export interface UncertaintyChartPayload {
    chart_radius: number;
    nodes: ChartNodePayload[];
    sectors: Record<string, [number, number]>;
    labels: SectorLabelPayload[];
}

export interface KeywordItemPayload {
    word: string;
    frequency: number;
    x: number;
    y: number;
    font_size: number;
    color_value: number;
}

export interface KeywordCloudPayload {
    items: KeywordItemPayload[];
}

export interface LinkGraphNodePayload {
    name: string;
    x: number;
    y: number;
    radius: number;
    color: string;
}

export interface LinkGraphEdgePayload {
    source: string;
    target: string;
    relationship: string;
    opacity: number;
}

export interface LinkGraphPayload {
    nodes: Record<string, LinkGraphNodePayload>;
    edges: LinkGraphEdgePayload[];
}

export interface DpsirBlockPayload {
    kind: string;
    sector: [number, number];
    center_angle: number;
    opened: boolean;
    x: number;
    y: number;
    color: string;
}

export interface DpsirVariablePayload {
    name: string;
    block: string;
    row: number;
    col: number;
    x: number;
    y: number;
    saturation: number;
    corner: boolean;
}

export interface DpsirEdgePayload {
    source: string;
    target: string;
    source_block: string;
    target_block: string;
    width: number;
    opacity: number;
    color: string;
    frequency: number;
}

export interface DpsirGraphPayload {
    blocks: Record<string, DpsirBlockPayload>;
    variables: Record<string, DpsirVariablePayload>;
    edges: DpsirEdgePayload[];
}

export interface ResultListEntry {
    snippet_id: string;
    uncertainty: number;
}

export interface ResultListPayload {
    version_id: string;
    entries: ResultListEntry[];
}

export interface HighlightSpan {
    start: number;
    end: number;
}

export interface EvidenceConversation {
    index: number;
    speaker: string;
    text: string;
    highlights: HighlightSpan[];
}

export interface EvidencePayload {
    snippet_id: string;
    document_id: string;
    conversations: EvidenceConversation[];
    explanation: string;
}

export type IndicatorKind = "Driver" | "Pressure" | "State" | "Impact" | "Response";

export const INDICATOR_KINDS: IndicatorKind[] =
    ["Driver", "Pressure", "State", "Impact", "Response"];
