"""The three mining steps: indicator, variable and link identification.

Every prompt is repeated k times through the gateway; the k label sets are
aggregated by union (recall over precision) with per-label support fractions
preserving the consistency signal, and user rules are applied on top of the
aggregates afterwards.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from itertools import combinations
from typing import Optional, Sequence

from .corpus import Document, Snippet
from .gateway import StructuredResponse, execute_batch, render
from .taxonomy import (MISCELLANEOUS, Condition, IndicatorKind, Rule, Step,
                       TaxonomyVersion)
from .uncertainty import LabelSetFamily, UniverseKind, link_key, uncertainty_score


@dataclass
class AggregateResult:
    labels: tuple[str, ...]
    support: dict
    evidence: tuple[str, ...]
    explanation: str
    uncertainty: float
    rule_overrides: tuple[str, ...] = ()


@dataclass
class RunSet:
    snippet_id: str
    step: Step
    k: int
    responses: list[StructuredResponse]
    label_sets: list[frozenset]
    aggregate: AggregateResult
    indicator_kind: Optional[str] = None


@dataclass
class LinkResult:
    snippet_id: str
    source: str
    target: str
    relationship: str
    evidence: tuple[str, ...]
    explanation: str
    uncertainty: float
    support: float = 1.0


@dataclass
class LinkStepResult:
    """All links for one snippet plus the snippet-level consistency score."""

    snippet_id: str
    links: list[LinkResult]
    uncertainty: float
    prompts_issued: int
    rule_overrides: tuple[str, ...] = ()


def snippet_text(doc: Document, snippet: Snippet) -> str:
    convs = doc.conversations[snippet.start:snippet.end + 1]
    return "\n".join(f"{c.speaker}: {c.text}" for c in convs)


def aggregate_runs(label_sets: Sequence[frozenset],
                   responses: Optional[Sequence[StructuredResponse]] = None) -> AggregateResult:
    """Union the k runs; support = per-label frequency / k.

    Evidence is the deduplicated concatenation across runs; the explanation
    comes from the run with the most labels (ties: first).
    """
    k = len(label_sets)
    if k < 1:
        raise ValueError("need at least one run")
    labels = sorted(set().union(*label_sets)) if label_sets else []
    support = {lbl: sum(1 for s in label_sets if lbl in s) / k for lbl in labels}

    evidence: list[str] = []
    explanation = ""
    if responses:
        seen = set()
        for r in responses:
            if r.valid and r.parsed:
                for sent in r.parsed.get("evidence", []):
                    if sent not in seen:
                        seen.add(sent)
                        evidence.append(sent)
        best = max((r for r in responses if r.valid and r.parsed),
                   key=lambda r: len(r.parsed.get("labels", [])), default=None)
        if best is not None:
            explanation = best.parsed.get("explanation", "")

    uncertainty = 0.0
    if k >= 2:
        uncertainty = uncertainty_score(LabelSetFamily.from_iterables(label_sets))
    return AggregateResult(labels=tuple(labels), support=support,
                           evidence=tuple(evidence), explanation=explanation,
                           uncertainty=uncertainty)


def indicator_bindings(version: TaxonomyVersion, text: str) -> dict:
    defs = "\n".join(f"{i.kind.letter} ({i.kind.value}): {i.definition}"
                     for i in version.indicators)
    return {"concept_definitions": defs, "snippet": text}


def identify_indicators(version: TaxonomyVersion, snippets: Sequence[Snippet],
                        snippet_texts: dict, k: int, provider) -> dict[str, RunSet]:
    """Run indicator identification for every snippet; returns RunSets by snippet id."""
    if version.step != Step.INDICATOR_ID:
        raise ValueError("version is not an IndicatorId version")
    prompts = [render(version.template, indicator_bindings(version, snippet_texts[s.id]))
               for s in snippets]
    grouped = execute_batch(prompts, k, provider, step=Step.INDICATOR_ID)
    out = {}
    for s, responses in zip(snippets, grouped):
        label_sets = [r.label_set() for r in responses]
        out[s.id] = RunSet(snippet_id=s.id, step=Step.INDICATOR_ID, k=k,
                           responses=list(responses), label_sets=label_sets,
                           aggregate=aggregate_runs(label_sets, responses))
    return out


def variable_bindings(version: TaxonomyVersion, kind: IndicatorKind,
                      text: str, explanation: str) -> dict:
    tags = "\n".join(f"{v.name}: {v.definition}" for v in version.variables_for(kind))
    return {"indicator": kind.value, "tag_list": tags,
            "snippet": text, "explanation": explanation}


def identify_variables(version: TaxonomyVersion, indicator_runsets: dict[str, RunSet],
                       snippets: Sequence[Snippet], snippet_texts: dict,
                       k: int, provider) -> dict[tuple, RunSet]:
    """Run variable identification per (snippet, identified indicator).

    No prompt is issued for an indicator absent from the snippet's upstream
    aggregate. Keys of the result are (snippet_id, indicator kind value).
    """
    if version.step != Step.VARIABLE_ID:
        raise ValueError("version is not a VariableId version")
    jobs: list[tuple[Snippet, IndicatorKind]] = []
    prompts: list[str] = []
    universes: dict[IndicatorKind, list[str]] = {}
    for s in snippets:
        upstream = indicator_runsets.get(s.id)
        if upstream is None:
            continue
        for label in upstream.aggregate.labels:
            kind = IndicatorKind(label)
            universes.setdefault(kind, [v.name for v in version.variables_for(kind)])
            jobs.append((s, kind))
            prompts.append(render(version.template, variable_bindings(
                version, kind, snippet_texts[s.id], upstream.aggregate.explanation)))

    out: dict[tuple, RunSet] = {}
    # batch per indicator kind so each parse gets the right label universe
    by_kind: dict[IndicatorKind, list[int]] = {}
    for idx, (_, kind) in enumerate(jobs):
        by_kind.setdefault(kind, []).append(idx)
    results: list = [None] * len(jobs)
    for kind, indices in by_kind.items():
        grouped = execute_batch([prompts[i] for i in indices], k, provider,
                                step=Step.VARIABLE_ID, universe=universes[kind])
        for i, responses in zip(indices, grouped):
            results[i] = responses
    for (s, kind), responses in zip(jobs, results):
        label_sets = [r.label_set() for r in responses]
        out[(s.id, kind.value)] = RunSet(
            snippet_id=s.id, step=Step.VARIABLE_ID, k=k,
            responses=list(responses), label_sets=label_sets,
            aggregate=aggregate_runs(label_sets, responses),
            indicator_kind=kind.value)
    return out


def identified_variables(variable_runsets: dict[tuple, RunSet],
                         snippet_id: str) -> list[str]:
    """Distinct non-miscellaneous variables identified in a snippet."""
    names: list[str] = []
    for (sid, _), runset in sorted(variable_runsets.items()):
        if sid != snippet_id:
            continue
        for lbl in runset.aggregate.labels:
            if lbl.lower() != MISCELLANEOUS and lbl not in names:
                names.append(lbl)
    return sorted(names)


def link_bindings(version: TaxonomyVersion, a: str, b: str, text: str) -> dict:
    defs = {v.name: v.definition for v in version.variables}
    pair = f"{a}: {defs.get(a, '')}\n{b}: {defs.get(b, '')}"
    return {"var_pair_definitions": pair, "snippet": text}


def identify_links(version: TaxonomyVersion, variable_runsets: dict[tuple, RunSet],
                   snippets: Sequence[Snippet], snippet_texts: dict,
                   k: int, provider) -> dict[str, LinkStepResult]:
    """Run link identification: one prompt per unordered pair of co-identified
    variables; the model chooses the direction or answers the none-marker."""
    if version.step != Step.LINK_ID:
        raise ValueError("version is not a LinkId version")
    jobs: list[tuple[Snippet, tuple[str, str]]] = []
    prompts: list[str] = []
    for s in snippets:
        names = identified_variables(variable_runsets, s.id)
        for a, b in combinations(names, 2):
            jobs.append((s, (a, b)))
            prompts.append(render(version.template,
                                  link_bindings(version, a, b, snippet_texts[s.id])))

    grouped = execute_batch(prompts, k, provider, step=Step.LINK_ID)
    # a link naming a variable outside its pair is treated as the none-marker
    for (_, pair), responses in zip(jobs, grouped):
        for r in responses:
            if r.valid and r.parsed and "source" in r.parsed:
                if r.parsed["source"] not in pair or r.parsed["target"] not in pair:
                    r.warnings.append(
                        f"link outside prompted pair dropped: "
                        f"{r.parsed['source']}->{r.parsed['target']}")
                    r.parsed = {"none": True}

    by_snippet: dict[str, list[tuple[tuple, list]]] = {s.id: [] for s in snippets}
    for (s, pair), responses in zip(jobs, grouped):
        by_snippet[s.id].append((pair, responses))

    out: dict[str, LinkStepResult] = {}
    for s in snippets:
        pair_results = by_snippet[s.id]
        links: list[LinkResult] = []
        # A_ij for the snippet: link keys found in repetition j across all pairs
        per_rep_keys: list[set] = [set() for _ in range(k)]
        for pair, responses in pair_results:
            asserted: list[tuple] = []
            for j, r in enumerate(responses):
                if r.valid and r.parsed and "source" in r.parsed:
                    key = link_key(r.parsed["source"], r.parsed["target"])
                    asserted.append(key)
                    per_rep_keys[j].add(key)
            if not asserted:
                continue
            # majority direction, ties broken by first occurrence
            best_key = max(asserted, key=lambda kk: (asserted.count(kk), -asserted.index(kk)))
            first = next(r for r in responses
                         if r.valid and r.parsed and "source" in r.parsed
                         and link_key(r.parsed["source"], r.parsed["target"]) == best_key)
            evidence: list[str] = []
            seen: set = set()
            for r in responses:
                if r.valid and r.parsed and "source" in r.parsed:
                    for sent in r.parsed.get("evidence", []):
                        if sent not in seen:
                            seen.add(sent)
                            evidence.append(sent)
            pair_sets = [frozenset({kk}) if kk is not None else frozenset()
                         for kk in (link_key(r.parsed["source"], r.parsed["target"])
                                    if r.valid and r.parsed and "source" in r.parsed else None
                                    for r in responses)]
            pair_unc = (uncertainty_score(LabelSetFamily.from_iterables(
                pair_sets, UniverseKind.LINK)) if k >= 2 else 0.0)
            links.append(LinkResult(
                snippet_id=s.id, source=best_key[0], target=best_key[1],
                relationship=first.parsed.get("relationship", ""),
                evidence=tuple(evidence),
                explanation=first.parsed.get("explanation", ""),
                uncertainty=pair_unc,
                support=len(asserted) / k))
        snippet_unc = (uncertainty_score(LabelSetFamily.from_iterables(
            per_rep_keys, UniverseKind.LINK)) if k >= 2 and pair_results else 0.0)
        out[s.id] = LinkStepResult(snippet_id=s.id, links=links,
                                   uncertainty=snippet_unc,
                                   prompts_issued=len(pair_results))
    return out


def collect_misc_evidence(variable_runsets: dict[tuple, RunSet],
                          kind: Optional[IndicatorKind] = None) -> dict[str, list[str]]:
    """Evidence sentences of variable results containing 'miscellaneous',
    grouped per snippet; feeds the keyword cloud."""
    out: dict[str, list[str]] = {}
    for (sid, k), runset in sorted(variable_runsets.items()):
        if kind is not None and k != kind.value:
            continue
        if any(l.lower() == MISCELLANEOUS for l in runset.aggregate.labels):
            out.setdefault(sid, []).extend(runset.aggregate.evidence)
    return out


def apply_rules(results: dict, rules: Sequence[Rule], step: Step,
                known_labels: Optional[set] = None) -> dict:
    """Apply must-have / must-not-have overrides to aggregates or link results.

    Original support values are preserved for audit; rule-injected labels show
    up with support 0. A rule naming a label no longer in the taxonomy is
    skipped with a warning rather than failing. Idempotent by construction.
    """
    out = dict(results)
    for rule in rules:
        if rule.step != step or rule.snippet_id not in out:
            continue
        if known_labels is not None and rule.value not in known_labels and "->" not in rule.value:
            import warnings
            warnings.warn(f"rule {rule.id} references unknown label {rule.value!r}; skipped")
            continue
        target = out[rule.snippet_id]
        if isinstance(target, LinkStepResult):
            src, _, dst = rule.value.partition("->")
            if rule.condition == Condition.MUST_NOT_HAVE:
                kept = [l for l in target.links if (l.source, l.target) != (src, dst)]
                if len(kept) != len(target.links) and rule.id not in target.rule_overrides:
                    out[rule.snippet_id] = replace(target, links=kept,
                                                   rule_overrides=target.rule_overrides + (rule.id,))
            else:
                if not any((l.source, l.target) == (src, dst) for l in target.links):
                    injected = LinkResult(snippet_id=rule.snippet_id, source=src, target=dst,
                                          relationship="(rule)", evidence=(), explanation="",
                                          uncertainty=0.0, support=0.0)
                    out[rule.snippet_id] = replace(
                        target, links=target.links + [injected],
                        rule_overrides=target.rule_overrides + (rule.id,))
        elif isinstance(target, RunSet):
            agg = target.aggregate
            if rule.condition == Condition.MUST_HAVE and rule.value not in agg.labels:
                new_agg = replace(agg, labels=tuple(sorted(agg.labels + (rule.value,))),
                                  rule_overrides=agg.rule_overrides + (rule.id,))
                out[rule.snippet_id] = replace(target, aggregate=new_agg)
            elif rule.condition == Condition.MUST_NOT_HAVE and rule.value in agg.labels:
                new_agg = replace(agg, labels=tuple(l for l in agg.labels if l != rule.value),
                                  rule_overrides=agg.rule_overrides + (rule.id,))
                out[rule.snippet_id] = replace(target, aggregate=new_agg)
    return out
