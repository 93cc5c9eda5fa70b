"""Embedding plumbing, cosine distances and threshold clustering."""
import json
import math

import numpy as np
import pytest

from dpsir_miner import embed_cluster as ec
from dpsir_miner.gateway import FixtureProvider, TimeoutProvider, render
from dpsir_miner.pipeline import AggregateResult, RunSet, aggregate_runs
from dpsir_miner.taxonomy import Step, default_template


def make_runset(sid, evidence=(), explanation=""):
    agg = AggregateResult(labels=("Driver",), support={"Driver": 1.0},
                          evidence=tuple(evidence), explanation=explanation,
                          uncertainty=0.0)
    return RunSet(snippet_id=sid, step=Step.INDICATOR_ID, k=1, responses=[],
                  label_sets=[frozenset({"Driver"})], aggregate=agg)


def test_evidence_text_priority_and_fallback():
    rich = make_runset("s1", ["e1", "e2"], "because")
    text, fell_back = ec.evidence_text(rich.aggregate, "raw snippet")
    assert text == "e1\ne2\nbecause" and not fell_back
    empty = make_runset("s2")
    text, fell_back = ec.evidence_text(empty.aggregate, "raw snippet")
    assert text == "raw snippet" and fell_back


def test_embed_evidence_uses_cache():
    provider = FixtureProvider(embedding_dim=16)
    cache = ec.EmbeddingCache()
    results = {"s1": make_runset("s1", ["e"]), "s2": make_runset("s2", ["f"])}
    first = ec.embed_evidence(results, provider, cache=cache)
    calls = provider.call_count
    second = ec.embed_evidence(results, provider, cache=cache)
    assert provider.call_count == calls  # all hits, no new provider calls
    assert np.array_equal(first.vectors, second.vectors)
    assert first.snippet_ids == ["s1", "s2"]


def test_embed_evidence_degrades_on_provider_failure():
    results = {"s1": make_runset("s1", ["e"])}
    with pytest.warns(UserWarning, match="excluded"):
        collection = ec.embed_evidence(results, TimeoutProvider())
    assert collection.snippet_ids == []


def cosine_oracle(a, b):
    return 1.0 - float(np.dot(a, b) / (np.linalg.norm(a) * np.linalg.norm(b)))


def test_cosine_distance_matches_oracle():
    rng = np.random.default_rng(0)
    V = rng.standard_normal((6, 5))
    D = ec.cosine_distance_matrix(V)
    for i in range(6):
        for j in range(6):
            expected = 0.0 if i == j else cosine_oracle(V[i], V[j])
            assert D[i, j] == pytest.approx(expected, abs=1e-12)
    assert np.allclose(D, D.T)


def test_cosine_distance_rejects_zero_vector():
    V = np.array([[1.0, 0.0], [0.0, 0.0]])
    with pytest.raises(ValueError, match="s-bad"):
        ec.cosine_distance_matrix(V, ids=["s-ok", "s-bad"])


def planted_vectors(rng, sizes, dim=24, within=0.9):
    """Bundles of vectors tightly packed around random orthogonal-ish centers."""
    vectors, ids = [], []
    for b, size in enumerate(sizes):
        center = rng.standard_normal(dim)
        center /= np.linalg.norm(center)
        for i in range(size):
            noise = rng.standard_normal(dim) * 0.05
            v = within * center + noise
            vectors.append(v / np.linalg.norm(v))
            ids.append(f"b{b}-{i}")
    return np.array(vectors), ids


def test_planted_partition_recovered():
    rng = np.random.default_rng(42)
    V, ids = planted_vectors(rng, [4, 3, 5])
    got = ec.agglomerative_cluster(V, ids, threshold=0.5)
    by_bundle = {}
    for sid, cid in got.assignment.items():
        by_bundle.setdefault(sid.split("-")[0], set()).add(cid)
    # each bundle maps to exactly one cluster and clusters don't merge bundles
    assert all(len(cids) == 1 for cids in by_bundle.values())
    assert len({next(iter(c)) for c in by_bundle.values()}) == 3


def test_cluster_ids_deterministic_by_lowest_member():
    rng = np.random.default_rng(1)
    V, ids = planted_vectors(rng, [2, 2])
    got = ec.agglomerative_cluster(V, ids)
    # cluster 0 must contain the lexicographically smallest snippet id
    assert got.assignment[min(ids)] == 0
    assert got.clusters[0] == sorted(got.clusters[0])


def test_cluster_edge_sizes():
    assert ec.agglomerative_cluster(np.zeros((0, 3)), []).clusters == {}
    one = ec.agglomerative_cluster(np.ones((1, 3)), ["only"])
    assert one.clusters == {0: ["only"]}


def test_label_topics_scripted_and_fallback():
    clusters = ec.ClusterAssignment({"s1": 0, "s2": 1}, {0: ["s1"], 1: ["s2"]})
    provider = FixtureProvider()
    template = default_template(Step.TOPIC_LABEL)
    prompt = render(template, {"snippets": "text one"})
    provider.script(prompt, '```json\n{"label": "Little Vendor Dream"}\n```')
    labels = ec.label_topics(clusters, {"s1": "text one", "s2": "text two"}, provider)
    assert labels[0] == "Little Vendor Dream"
    assert labels[1] == "cluster-1"  # unscripted reply has no label field
    assert clusters.topic_labels == labels
