"""Evidence embedding, cosine distance matrices, agglomerative clustering
and LLM topic labels for the clusters."""
from __future__ import annotations

import hashlib
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.cluster.hierarchy import fcluster, linkage
from scipy.spatial.distance import squareform

from .gateway import embed_texts, execute_batch, render
from .taxonomy import Step, default_template

COSINE_SIM_THRESHOLD = 0.5


@dataclass
class EmbeddingCollection:
    snippet_ids: list[str]
    vectors: np.ndarray  # (n, dim)
    fallback_ids: list[str] = field(default_factory=list)


@dataclass
class ClusterAssignment:
    assignment: dict  # snippet id -> cluster id
    clusters: dict    # cluster id -> member snippet ids (sorted)
    topic_labels: dict = field(default_factory=dict)


def evidence_text(aggregate, snippet_fallback: str = "") -> tuple[str, bool]:
    """Text to embed for one snippet: deduplicated evidence then explanation.

    Falls back to the snippet's own text when the model produced neither,
    returning a flag so the chart can mark the node.
    """
    parts = list(aggregate.evidence)
    if aggregate.explanation:
        parts.append(aggregate.explanation)
    if parts:
        return "\n".join(parts), False
    return snippet_fallback, True


class EmbeddingCache:
    """Content-hash keyed cache so repeated iterations don't re-bill."""

    def __init__(self):
        self._cache: dict[str, list[float]] = {}

    @staticmethod
    def key(text: str) -> str:
        return hashlib.sha256(text.encode("utf-8")).hexdigest()

    def get(self, text: str) -> Optional[list[float]]:
        return self._cache.get(self.key(text))

    def put(self, text: str, vector: Sequence[float]) -> None:
        self._cache[self.key(text)] = list(vector)


def embed_evidence(results: dict, provider, snippet_texts: Optional[dict] = None,
                   cache: Optional[EmbeddingCache] = None) -> EmbeddingCollection:
    """One embedding vector per snippet, from its aggregate evidence text.

    ``results`` maps snippet id -> RunSet (or anything with ``.aggregate``).
    """
    snippet_texts = snippet_texts or {}
    ids = sorted(results.keys())
    texts: list[str] = []
    fallback_ids: list[str] = []
    for sid in ids:
        text, fell_back = evidence_text(results[sid].aggregate,
                                        snippet_texts.get(sid, sid))
        if fell_back:
            fallback_ids.append(sid)
        texts.append(text)

    vectors: list[Optional[list[float]]] = [None] * len(texts)
    missing_idx = []
    for i, t in enumerate(texts):
        cached = cache.get(t) if cache else None
        if cached is not None:
            vectors[i] = cached
        else:
            missing_idx.append(i)
    if missing_idx:
        try:
            fresh = embed_texts(provider, [texts[i] for i in missing_idx])
        except Exception as exc:
            warnings.warn(f"embedding provider failed, {len(missing_idx)} snippets "
                          f"excluded: {exc}")
            keep = [i for i in range(len(texts)) if vectors[i] is not None]
            return EmbeddingCollection([ids[i] for i in keep],
                                       np.array([vectors[i] for i in keep], dtype=float),
                                       fallback_ids)
        for i, vec in zip(missing_idx, fresh):
            vectors[i] = vec
            if cache:
                cache.put(texts[i], vec)
    return EmbeddingCollection(ids, np.array(vectors, dtype=float), fallback_ids)


def cosine_distance_matrix(vectors: np.ndarray, ids: Optional[Sequence[str]] = None) -> np.ndarray:
    """Symmetric matrix of 1 - cosine similarity; zero diagonal, entries in [0,2]."""
    vectors = np.asarray(vectors, dtype=float)
    norms = np.linalg.norm(vectors, axis=1)
    zero = np.where(norms == 0)[0]
    if zero.size:
        name = ids[zero[0]] if ids is not None else f"index {zero[0]}"
        raise ValueError(f"zero embedding vector for {name}")
    unit = vectors / norms[:, None]
    D = 1.0 - unit @ unit.T
    np.fill_diagonal(D, 0.0)
    return np.clip((D + D.T) / 2.0, 0.0, 2.0)


def agglomerative_cluster(vectors: np.ndarray, ids: Sequence[str],
                          threshold: float = COSINE_SIM_THRESHOLD) -> ClusterAssignment:
    """Average-linkage agglomeration on cosine distance.

    Merging stops once no cluster pair has average cosine similarity of at
    least ``threshold``; sim >= t is equivalent to distance <= 1 - t.
    Tie-breaking is made deterministic by relabelling clusters in order of
    their lowest member snippet id.
    """
    n = len(ids)
    if n == 0:
        return ClusterAssignment({}, {})
    if n == 1:
        return ClusterAssignment({ids[0]: 0}, {0: [ids[0]]})
    D = cosine_distance_matrix(vectors, ids)
    Z = linkage(squareform(D, checks=False), method="average")
    raw = fcluster(Z, t=1.0 - threshold, criterion="distance")
    # relabel deterministically: cluster ids ordered by their lowest member id
    members: dict[int, list[str]] = {}
    for sid, c in zip(ids, raw):
        members.setdefault(int(c), []).append(sid)
    ordered = sorted(members.values(), key=lambda ms: min(ms))
    assignment: dict = {}
    clusters: dict = {}
    for new_id, ms in enumerate(ordered):
        clusters[new_id] = sorted(ms)
        for sid in ms:
            assignment[sid] = new_id
    return ClusterAssignment(assignment, clusters)


def label_topics(clusters: ClusterAssignment, snippet_texts: dict, provider,
                 max_snippets_per_cluster: int = 5) -> dict:
    """One short topic label per cluster via an LLM prompt; fallback 'cluster-<id>'."""
    template = default_template(Step.TOPIC_LABEL)
    cluster_ids = sorted(clusters.clusters.keys())
    prompts = []
    for cid in cluster_ids:
        sample = clusters.clusters[cid][:max_snippets_per_cluster]
        joined = "\n---\n".join(snippet_texts.get(sid, sid) for sid in sample)
        prompts.append(render(template, {"snippets": joined}))
    labels: dict = {}
    try:
        grouped = execute_batch(prompts, 1, provider, step=Step.TOPIC_LABEL)
    except Exception:
        grouped = [[None]] * len(prompts)
    for cid, responses in zip(cluster_ids, grouped):
        r = responses[0]
        if r is not None and r.valid and r.parsed and r.parsed.get("label"):
            labels[cid] = r.parsed["label"]
        else:
            labels[cid] = f"cluster-{cid}"
    clusters.topic_labels = labels
    return labels
