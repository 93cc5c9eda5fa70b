"""Pure-geometry builders for the four visual layouts: uncertainty chart,
keyword cloud, link graph and the radial DPSIR graph.

Every builder is a deterministic function of (inputs, config, seed); a
renderer only scales coordinates, it never recomputes geometry.
"""
from __future__ import annotations

import math
import warnings
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .circular_mds import TWO_PI, SectorAllocation
from .taxonomy import INDICATOR_COLORS, IndicatorKind, Step, default_template


@dataclass
class ChartConfig:
    chart_radius: float = 400.0        # px
    node_radius: float = 6.0           # px
    r_min_frac: float = 0.15           # radius for uncertainty 0
    r_max_frac: float = 0.95           # radius for uncertainty 1
    iterations: int = 500
    radial_strength: float = 0.25      # pull toward the target radius each step
    radial_slip: float = 0.15          # fraction of collision push allowed radially
    seed: int = 0


@dataclass
class ChartNode:
    snippet_id: str
    cluster_id: int
    theta_target: float
    radius_target: float
    theta: float
    radius: float
    radius_px: float

    @property
    def position(self) -> tuple[float, float]:
        return (self.radius * math.cos(self.theta), self.radius * math.sin(self.theta))


@dataclass
class SectorLabel:
    cluster_id: int
    text: str
    theta: float
    radius: float


@dataclass
class ChartLayout:
    nodes: list[ChartNode]
    sectors: dict          # cluster id -> (start, end)
    labels: list[SectorLabel]
    config: ChartConfig


def _wrap_relative(angle: float, center: float) -> float:
    """Signed offset of ``angle`` from ``center`` in (-pi, pi]."""
    d = (angle - center) % TWO_PI
    if d > math.pi:
        d -= TWO_PI
    return d


def _remap_into_sector(members: Sequence[str], thetas: dict,
                       sector: tuple[float, float]) -> dict:
    """Affinely map the members' global angles into their cluster sector."""
    start, end = sector
    span = end - start
    if len(members) == 1:
        return {members[0]: (start + end) / 2.0 % TWO_PI}
    from .circular_mds import circular_mean
    mean = circular_mean(np.array([thetas[m] for m in members]))
    rel = {m: _wrap_relative(thetas[m], mean) for m in members}
    lo, hi = min(rel.values()), max(rel.values())
    if hi - lo < 1e-12:
        return {m: (start + end) / 2.0 % TWO_PI for m in members}
    margin = 0.05 * span
    scale = (span - 2 * margin) / (hi - lo)
    return {m: (start + margin + (rel[m] - lo) * scale) % TWO_PI for m in members}


def radius_for_uncertainty(u: float, config: ChartConfig) -> float:
    r_min = config.r_min_frac * config.chart_radius
    r_max = config.r_max_frac * config.chart_radius
    return r_min + float(u) * (r_max - r_min)


def _sector_contains(theta: float, start: float, end: float) -> bool:
    return 0.0 <= (theta - start) % TWO_PI <= (end - start) % TWO_PI or \
        abs((end - start) - TWO_PI) < 1e-9


def _clamp_theta(theta: float, start: float, end: float) -> float:
    span = (end - start) % TWO_PI
    if span == 0.0:
        span = TWO_PI
    rel = (theta - start) % TWO_PI
    if rel <= span:
        return theta % TWO_PI
    # outside: snap to the nearer boundary
    dist_to_end = rel - span
    dist_to_start = TWO_PI - rel
    return (end if dist_to_end < dist_to_start else start) % TWO_PI


def force_relax(nodes: list[ChartNode], sectors: dict, config: ChartConfig) -> None:
    """Fixed-iteration collision relaxation, in place.

    Collision pushes are applied mostly tangentially: the radius carries the
    uncertainty encoding, so nodes slide around the ring before they are
    allowed to drift radially. Nodes are clipped to their cluster sector and
    the chart disc every step.
    """
    n = len(nodes)
    if n == 0:
        return
    theta = np.array([nd.theta for nd in nodes])
    r = np.array([nd.radius for nd in nodes])
    r_target = np.array([nd.radius_target for nd in nodes])
    radii = np.array([nd.radius_px for nd in nodes])
    sum_radii = radii[:, None] + radii[None, :]

    starts = np.array([sectors[nd.cluster_id][0] for nd in nodes])
    ends = np.array([sectors[nd.cluster_id][1] for nd in nodes])

    for it in range(config.iterations):
        r += config.radial_strength * (r_target - r)
        x = r * np.cos(theta)
        y = r * np.sin(theta)
        dx = x[:, None] - x[None, :]
        dy = y[:, None] - y[None, :]
        dist = np.hypot(dx, dy)
        overlap = sum_radii - dist
        np.fill_diagonal(overlap, -1.0)
        ii, jj = np.where(np.triu(overlap > 0, k=1))
        if ii.size:
            push_x = np.zeros(n)
            push_y = np.zeros(n)
            for a, b in zip(ii, jj):
                d = dist[a, b]
                if d < 1e-9:
                    # coincident centers: deterministic tangential split
                    ang = theta[a] + math.pi / 2.0
                    ux, uy = math.cos(ang), math.sin(ang)
                else:
                    ux, uy = dx[a, b] / d, dy[a, b] / d
                amount = 0.5 * (overlap[a, b] + 0.1)
                push_x[a] += ux * amount
                push_x[b] -= ux * amount
                push_y[a] += uy * amount
                push_y[b] -= uy * amount
            # project the push onto tangential/radial directions and damp
            # the radial part so the uncertainty encoding survives
            cos_t, sin_t = np.cos(theta), np.sin(theta)
            radial = push_x * cos_t + push_y * sin_t
            tang = -push_x * sin_t + push_y * cos_t
            slip = min(1.0, config.radial_slip * (1.0 + 3.0 * it / config.iterations))
            x += tang * -sin_t + radial * slip * cos_t
            y += tang * cos_t + radial * slip * sin_t
            r = np.hypot(x, y)
            theta = np.mod(np.arctan2(y, x), TWO_PI)
        # clipping
        r = np.clip(r, 0.0, config.chart_radius - radii)
        theta = np.array([_clamp_theta(t, s, e) for t, s, e in zip(theta, starts, ends)])

    for nd, t, rr in zip(nodes, theta, r):
        nd.theta = float(t % TWO_PI)
        nd.radius = float(rr)


def build_uncertainty_chart(scores: dict, angles: dict, sectors: SectorAllocation,
                            clusters, config: Optional[ChartConfig] = None) -> ChartLayout:
    """Assemble chart nodes from uncertainty scores, optimized angles and
    cluster sectors, then run the collision relaxation."""
    config = config or ChartConfig()
    nodes: list[ChartNode] = []
    for cid in sectors.order:
        members = clusters.clusters[cid]
        remapped = _remap_into_sector(members, angles, sectors.sectors[cid])
        for sid in members:
            target_theta = remapped[sid]
            target_r = radius_for_uncertainty(scores.get(sid, 0.0), config)
            nodes.append(ChartNode(snippet_id=sid, cluster_id=cid,
                                   theta_target=target_theta, radius_target=target_r,
                                   theta=target_theta, radius=target_r,
                                   radius_px=config.node_radius))
    force_relax(nodes, sectors.sectors, config)
    labels = []
    for cid in sectors.order:
        start, end = sectors.sectors[cid]
        labels.append(SectorLabel(
            cluster_id=cid,
            text=clusters.topic_labels.get(cid, f"cluster-{cid}"),
            theta=((start + end) / 2.0) % TWO_PI,
            radius=config.chart_radius * 1.02))
    return ChartLayout(nodes=nodes, sectors=dict(sectors.sectors),
                       labels=labels, config=config)


# ---------------------------------------------------------------------------
# keyword cloud


@dataclass
class KeywordItem:
    word: str
    frequency: int
    x: float
    y: float
    font_size: float
    color_value: float  # 0..1, monotone in frequency


@dataclass
class KeywordProjection:
    """Fitted parametric projection so the semantic landscape stays put
    across refinement iterations."""

    kpca: object
    gamma: float


def extract_keywords(misc_evidence: dict, provider) -> Counter:
    """LLM keyword extraction over per-snippet miscellaneous evidence.

    Returns case-insensitive keyword frequencies counted across snippets.
    """
    from .gateway import execute_batch, render
    template = default_template(Step.KEYWORD_EXTRACT)
    sids = sorted(misc_evidence.keys())
    prompts = [render(template, {"evidence": "\n".join(misc_evidence[sid])}) for sid in sids]
    grouped = execute_batch(prompts, 1, provider, step=Step.KEYWORD_EXTRACT)
    counts: Counter = Counter()
    for responses in grouped:
        r = responses[0]
        if r.valid and r.parsed:
            for kw in set(r.parsed.get("keywords", [])):
                counts[kw] += 1
    return counts


def _rect_relax(items: list[KeywordItem], iterations: int = 200) -> None:
    """Push overlapping keyword rectangles apart along the cheaper axis."""
    def rect(it: KeywordItem) -> tuple[float, float]:
        return (0.62 * it.font_size * max(len(it.word), 1), 1.2 * it.font_size)

    for _ in range(iterations):
        moved = False
        for i in range(len(items)):
            for j in range(i + 1, len(items)):
                a, b = items[i], items[j]
                wa, ha = rect(a)
                wb, hb = rect(b)
                ox = (wa + wb) / 2.0 - abs(a.x - b.x)
                oy = (ha + hb) / 2.0 - abs(a.y - b.y)
                if ox > 0 and oy > 0:
                    moved = True
                    if ox < oy:
                        shift = (ox / 2.0 + 0.5) * (1 if a.x >= b.x else -1)
                        a.x += shift
                        b.x -= shift
                    else:
                        shift = (oy / 2.0 + 0.5) * (1 if a.y >= b.y else -1)
                        a.y += shift
                        b.y -= shift
        if not moved:
            break


def build_keyword_cloud(misc_evidence: dict, provider,
                        prior_projection: Optional[KeywordProjection] = None,
                        font_min: float = 10.0, font_max: float = 36.0,
                        scale: float = 250.0):
    """Semantic keyword cloud for the miscellaneous evidence.

    Keywords are embedded, projected to 2D with Kernel PCA (reusing a prior
    fitted projection for out-of-sample placement when given) and relaxed
    with rectangle collision. Returns (items, projection).
    """
    from sklearn.decomposition import KernelPCA

    from .gateway import embed_texts

    try:
        counts = extract_keywords(misc_evidence, provider)
    except Exception as exc:
        warnings.warn(f"keyword extraction failed: {exc}")
        counts = Counter()
    if not counts and misc_evidence:
        # extraction produced nothing (e.g. provider down): naive token counts
        warnings.warn("keyword extraction yielded no keywords, using raw token counts")
        for sid in sorted(misc_evidence):
            for token in " ".join(misc_evidence[sid]).lower().split():
                token = token.strip(".,!?")
                if token:
                    counts[token] += 1
    if not counts:
        return [], prior_projection
    words = sorted(counts.keys())
    max_freq = max(counts.values())

    def style(word: str) -> tuple[float, float]:
        f = counts[word] / max_freq
        return (font_min + f * (font_max - font_min), f)

    if len(words) == 1:
        fs, cv = style(words[0])
        return [KeywordItem(words[0], counts[words[0]], 0.0, 0.0, fs, cv)], prior_projection

    try:
        vectors = np.array(embed_texts(provider, words), dtype=float)
    except Exception as exc:
        warnings.warn(f"keyword embedding failed, spiral fallback: {exc}")
        items = []
        golden = math.pi * (3.0 - math.sqrt(5.0))
        for rank, (word, freq) in enumerate(counts.most_common()):
            rad = 12.0 * math.sqrt(rank)
            fs, cv = style(word)
            items.append(KeywordItem(word, freq, rad * math.cos(rank * golden),
                                     rad * math.sin(rank * golden), fs, cv))
        return items, prior_projection

    unit = vectors / np.linalg.norm(vectors, axis=1, keepdims=True)
    if prior_projection is None:
        from scipy.spatial.distance import pdist
        dists = pdist(unit)
        bandwidth = float(np.median(dists)) or 1.0
        gamma = 1.0 / (2.0 * bandwidth ** 2)
        kpca = KernelPCA(n_components=2, kernel="rbf", gamma=gamma)
        kpca.fit(unit)
        projection = KeywordProjection(kpca=kpca, gamma=gamma)
    else:
        projection = prior_projection
    coords = projection.kpca.transform(unit) * scale

    items = []
    for word, (px, py) in zip(words, coords):
        fs, cv = style(word)
        items.append(KeywordItem(word, counts[word], float(px), float(py), fs, cv))
    _rect_relax(items)
    return items, projection


# ---------------------------------------------------------------------------
# per-snippet link graph


@dataclass
class LinkGraphNode:
    name: str
    x: float
    y: float
    radius: float
    color: str


@dataclass
class LinkGraphEdge:
    source: str
    target: str
    relationship: str
    opacity: float


@dataclass
class LinkGraphLayout:
    nodes: dict
    edges: list[LinkGraphEdge]


def build_link_graph(links: Sequence, var_kinds: dict,
                     iterations: int = 300, spread: float = 120.0) -> LinkGraphLayout:
    """Small deterministic force-directed diagram of one snippet's links.

    Node radius grows with degree (link count with multiplicity); edge
    opacity is 1 - uncertainty.
    """
    degree: Counter = Counter()
    for l in links:
        degree[l.source] += 1
        degree[l.target] += 1
    names = sorted(degree.keys())
    n = len(names)
    if n == 0:
        return LinkGraphLayout({}, [])
    pos = {name: np.array([spread * math.cos(TWO_PI * i / n),
                           spread * math.sin(TWO_PI * i / n)])
           for i, name in enumerate(names)}
    edge_pairs = [(l.source, l.target) for l in links]
    rest = spread * 1.2
    for _ in range(iterations):
        disp = {name: np.zeros(2) for name in names}
        for i, a in enumerate(names):
            for b in names[i + 1:]:
                delta = pos[a] - pos[b]
                d = float(np.linalg.norm(delta)) or 1e-6
                repel = (spread ** 2 / d) * 0.02
                disp[a] += delta / d * repel
                disp[b] -= delta / d * repel
        for a, b in edge_pairs:
            delta = pos[a] - pos[b]
            d = float(np.linalg.norm(delta)) or 1e-6
            pull = 0.05 * (d - rest)
            disp[a] -= delta / d * pull
            disp[b] += delta / d * pull
        for name in names:
            step = disp[name]
            length = float(np.linalg.norm(step))
            if length > 10.0:
                step = step / length * 10.0
            pos[name] = pos[name] + step

    nodes = {}
    for name in names:
        kind = var_kinds.get(name)
        color = INDICATOR_COLORS.get(kind, "#888888") if kind else "#888888"
        nodes[name] = LinkGraphNode(name=name, x=float(pos[name][0]), y=float(pos[name][1]),
                                    radius=8.0 + 3.0 * degree[name], color=color)
    edges = [LinkGraphEdge(source=l.source, target=l.target,
                           relationship=l.relationship,
                           opacity=max(0.0, min(1.0, 1.0 - l.uncertainty)))
             for l in links]
    return LinkGraphLayout(nodes=nodes, edges=edges)


# ---------------------------------------------------------------------------
# radial DPSIR graph


@dataclass
class DpsirBlock:
    kind: str
    sector: tuple[float, float]
    center_angle: float
    opened: bool
    x: float
    y: float
    color: str


@dataclass
class DpsirVariableCell:
    name: str
    block: str
    row: int
    col: int
    x: float
    y: float
    saturation: float  # 0..1, monotone in degree
    corner: bool


@dataclass
class DpsirEdge:
    source: str
    target: str
    source_block: str
    target_block: str
    width: float
    opacity: float
    color: str
    frequency: int


@dataclass
class DpsirGraphLayout:
    blocks: dict
    variables: dict  # name -> DpsirVariableCell (opened blocks only)
    edges: list[DpsirEdge]


KIND_ORDER = [IndicatorKind.DRIVER, IndicatorKind.PRESSURE, IndicatorKind.STATE,
              IndicatorKind.IMPACT, IndicatorKind.RESPONSE]


def variable_degrees(all_links: Sequence) -> Counter:
    """Degree = incident mined links counted with multiplicity across snippets."""
    degree: Counter = Counter()
    for l in all_links:
        degree[l.source] += 1
        degree[l.target] += 1
    return degree


def _grid_order(m: int) -> list[tuple[int, int]]:
    """Cell fill order for an opened block: the four corners first, then
    remaining cells row-major."""
    g = max(2, math.ceil(math.sqrt(m)))
    corners = [(0, 0), (0, g - 1), (g - 1, 0), (g - 1, g - 1)]
    rest = [(r, c) for r in range(g) for c in range(g) if (r, c) not in corners]
    return corners + rest


def build_dpsir_graph(all_links: Sequence, var_kinds: dict,
                      visible: Optional[set] = None, opened: Optional[set] = None,
                      ring_radius: float = 300.0, block_size: float = 120.0) -> DpsirGraphLayout:
    """Radial DPSIR graph with degree-proportional sectors and progressive
    disclosure.

    With all five indicators visible the sector spans are proportional to
    each indicator's total variable degree; hiding any indicator switches to
    even spacing of the remaining blocks. Opened blocks expose a square grid
    of variables with the four highest-degree ones at the corners.
    """
    visible = set(visible) if visible is not None else set(KIND_ORDER)
    opened = set(opened) if opened is not None else set()
    if not visible:
        raise ValueError("at least one indicator must be visible")

    degree = variable_degrees(all_links)
    kind_degree = {k: 0 for k in KIND_ORDER}
    for name, d in degree.items():
        kind = var_kinds.get(name)
        if kind is not None:
            kind_degree[kind] += d

    shown = [k for k in KIND_ORDER if k in visible]
    total = sum(kind_degree[k] for k in shown)
    if len(shown) == len(KIND_ORDER) and total > 0:
        spans = {k: TWO_PI * kind_degree[k] / total for k in shown}
    else:
        spans = {k: TWO_PI / len(shown) for k in shown}

    blocks: dict = {}
    cursor = -math.pi / 2.0  # first sector starts at the top
    for k in shown:
        start, end = cursor, cursor + spans[k]
        center = (start + end) / 2.0
        blocks[k.value] = DpsirBlock(
            kind=k.value, sector=(start % TWO_PI, (start % TWO_PI) + spans[k]),
            center_angle=center % TWO_PI, opened=k in opened,
            x=ring_radius * math.cos(center), y=ring_radius * math.sin(center),
            color=INDICATOR_COLORS[k])
        cursor = end

    variables: dict = {}
    max_deg = max(degree.values(), default=1) or 1
    for k in shown:
        if k not in opened:
            continue
        names = sorted((n for n, kk in var_kinds.items() if kk == k),
                       key=lambda n: (-degree[n], n))
        if not names:
            continue
        block = blocks[k.value]
        g = max(2, math.ceil(math.sqrt(len(names))))
        cell = block_size / g
        order = _grid_order(len(names))
        for name, (row, col) in zip(names, order):
            lx = (col + 0.5) * cell - block_size / 2.0
            ly = (row + 0.5) * cell - block_size / 2.0
            variables[name] = DpsirVariableCell(
                name=name, block=k.value, row=row, col=col,
                x=block.x + lx, y=block.y + ly,
                saturation=degree[name] / max_deg,
                corner=(row, col) in {(0, 0), (0, g - 1), (g - 1, 0), (g - 1, g - 1)})

    freq: Counter = Counter((l.source, l.target) for l in all_links)
    max_freq = max(freq.values(), default=1)
    edges: list[DpsirEdge] = []
    for (src, dst), count in sorted(freq.items()):
        src_kind = var_kinds.get(src)
        dst_kind = var_kinds.get(dst)
        if src_kind not in visible or dst_kind not in visible:
            continue
        rel = count / max_freq
        edges.append(DpsirEdge(
            source=src, target=dst,
            source_block=src_kind.value, target_block=dst_kind.value,
            width=1.0 + 5.0 * rel, opacity=0.25 + 0.75 * rel,
            color=INDICATOR_COLORS[src_kind], frequency=count))
    return DpsirGraphLayout(blocks=blocks, variables=variables, edges=edges)


# ---------------------------------------------------------------------------
# static export


def chart_svg(layout: ChartLayout) -> str:
    """Minimal static SVG export of an uncertainty chart."""
    R = layout.config.chart_radius
    size = 2.2 * R
    cx = cy = size / 2.0
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size:.0f}" '
             f'height="{size:.0f}" viewBox="0 0 {size:.0f} {size:.0f}">',
             f'<circle cx="{cx}" cy="{cy}" r="{R}" fill="none" stroke="#ddd"/>']
    for label in layout.labels:
        lx = cx + label.radius * math.cos(label.theta)
        ly = cy + label.radius * math.sin(label.theta)
        parts.append(f'<text x="{lx:.1f}" y="{ly:.1f}" font-size="14" '
                     f'text-anchor="middle">{label.text}</text>')
    for nd in layout.nodes:
        x, y = nd.position
        parts.append(f'<circle cx="{cx + x:.2f}" cy="{cy + y:.2f}" '
                     f'r="{nd.radius_px:.1f}" fill="#4c78a8" fill-opacity="0.8"/>')
    parts.append("</svg>")
    return "\n".join(parts)
