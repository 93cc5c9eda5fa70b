"""The evolving DPSIR taxonomy: indicator definitions, variable lists,
prompt templates, version lineage and user rules.

Versions are immutable snapshots; "editing" always forks a child so older
results stay comparable. Rules are stored globally (outside versions) and are
applied to results after execution, never interpolated into prompts.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional

PLACEHOLDER_RE = re.compile(r"\$\{([A-Za-z_][A-Za-z0-9_]*)\}")

MISCELLANEOUS = "miscellaneous"


class IndicatorKind(str, Enum):
    DRIVER = "Driver"
    PRESSURE = "Pressure"
    STATE = "State"
    IMPACT = "Impact"
    RESPONSE = "Response"

    @classmethod
    def from_letter(cls, letter: str) -> "IndicatorKind":
        return _LETTER_MAP[letter.upper()]

    @property
    def letter(self) -> str:
        return self.value[0]


_LETTER_MAP = {k.value[0]: k for k in IndicatorKind}

# one display color token per indicator, shared with SVG export and the UI
INDICATOR_COLORS = {
    IndicatorKind.DRIVER: "#4c78a8",
    IndicatorKind.PRESSURE: "#f58518",
    IndicatorKind.STATE: "#54a24b",
    IndicatorKind.IMPACT: "#e45756",
    IndicatorKind.RESPONSE: "#72b7b2",
}


class Step(str, Enum):
    INDICATOR_ID = "IndicatorId"
    VARIABLE_ID = "VariableId"
    LINK_ID = "LinkId"
    SEGMENTATION = "Segmentation"
    TOPIC_LABEL = "TopicLabel"
    KEYWORD_EXTRACT = "KeywordExtract"


# Placeholders each step's template may use. The three mining steps follow
# the fixed input lists of the pipeline; the utility steps are ours.
STEP_BINDINGS: dict[Step, frozenset] = {
    Step.INDICATOR_ID: frozenset({"concept_definitions", "snippet"}),
    Step.VARIABLE_ID: frozenset({"indicator", "tag_list", "snippet", "explanation"}),
    Step.LINK_ID: frozenset({"var_pair_definitions", "snippet"}),
    Step.SEGMENTATION: frozenset({"interview_questions", "conversations"}),
    Step.TOPIC_LABEL: frozenset({"snippets"}),
    Step.KEYWORD_EXTRACT: frozenset({"evidence"}),
}


@dataclass(frozen=True)
class Indicator:
    kind: IndicatorKind
    definition: str
    color: str = ""

    def __post_init__(self):
        if not self.definition.strip():
            raise ValueError(f"indicator {self.kind.value} needs a non-empty definition")
        if not self.color:
            object.__setattr__(self, "color", INDICATOR_COLORS[self.kind])


class VariableType(str, Enum):
    SOCIETAL = "societal"
    ENVIRONMENTAL = "environmental"


@dataclass(frozen=True)
class Variable:
    name: str
    indicator_kind: IndicatorKind
    definition: str = ""
    variable_type: VariableType = VariableType.SOCIETAL
    reserved: bool = False  # True only for the per-indicator miscellaneous slot


@dataclass(frozen=True)
class PromptTemplate:
    step: Step
    persona: str = ""
    context: str = ""
    user: str = ""

    @property
    def sections(self) -> tuple[str, str, str]:
        return (self.persona, self.context, self.user)

    def placeholders(self) -> set[str]:
        found = set()
        for section in self.sections:
            found.update(PLACEHOLDER_RE.findall(section))
        return found


def validate_template(template: PromptTemplate) -> list[str]:
    """Names of placeholders not in the step's allowed binding set (empty = ok)."""
    allowed = STEP_BINDINGS[template.step]
    return sorted(template.placeholders() - allowed)


@dataclass(frozen=True)
class TaxonomyVersion:
    id: str
    step: Step
    indicators: tuple[Indicator, ...]
    variables: tuple[Variable, ...]
    template: PromptTemplate
    parent_id: Optional[str] = None
    upstream_version_id: Optional[str] = None
    created_at: str = ""
    result_id: Optional[str] = None

    def __post_init__(self):
        if self.step in (Step.VARIABLE_ID, Step.LINK_ID) and not self.upstream_version_id:
            raise ValueError(f"{self.step.value} versions must name an upstream version")
        _check_variables(self.variables)

    def indicator(self, kind: IndicatorKind) -> Indicator:
        for ind in self.indicators:
            if ind.kind == kind:
                return ind
        raise KeyError(kind)

    def variables_for(self, kind: IndicatorKind, include_reserved: bool = True) -> list[Variable]:
        return [v for v in self.variables
                if v.indicator_kind == kind and (include_reserved or not v.reserved)]


def _check_variables(variables: tuple[Variable, ...]) -> None:
    by_kind: dict[IndicatorKind, list[Variable]] = {}
    for v in variables:
        by_kind.setdefault(v.indicator_kind, []).append(v)
    for kind in IndicatorKind:
        vs = by_kind.get(kind, [])
        names = [v.name.lower() for v in vs]
        if len(names) != len(set(names)):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise ValueError(f"duplicate variable name under {kind.value}: {', '.join(dupes)}")
        reserved = [v for v in vs if v.reserved]
        if len(reserved) != 1 or reserved[0].name.lower() != MISCELLANEOUS:
            raise ValueError(f"{kind.value} must have exactly one reserved '{MISCELLANEOUS}' variable")


def default_indicators() -> tuple[Indicator, ...]:
    defs = {
        IndicatorKind.DRIVER: "Key societal demands and activities that motivate change.",
        IndicatorKind.PRESSURE: "Stresses that human activities place on the environment.",
        IndicatorKind.STATE: "The condition of the environment resulting from pressures.",
        IndicatorKind.IMPACT: "Effects of environmental change on society or ecosystems.",
        IndicatorKind.RESPONSE: "Actions taken by society to address environmental issues.",
    }
    return tuple(Indicator(kind=k, definition=d) for k, d in defs.items())


def miscellaneous_variables() -> tuple[Variable, ...]:
    return tuple(Variable(name=MISCELLANEOUS, indicator_kind=k,
                          definition="anything relevant not covered by the listed tags",
                          reserved=True)
                 for k in IndicatorKind)


def default_template(step: Step) -> PromptTemplate:
    # prompt wording uses "concept" for indicator and "tag" for variable;
    # the data model keeps the domain words
    if step == Step.INDICATOR_ID:
        return PromptTemplate(
            step=step,
            persona="You are an analyst annotating interview snippets with environmental concepts.",
            context="Concept definitions:\n${concept_definitions}",
            user=("Identify every concept that occurs in the snippet below. Answer with a fenced "
                  "json block: {\"labels\": [concept letters], \"evidence\": [verbatim sentences], "
                  "\"explanation\": \"...\"}\n\nSnippet:\n${snippet}"),
        )
    if step == Step.VARIABLE_ID:
        return PromptTemplate(
            step=step,
            persona="You are an analyst assigning fine-grained tags to interview snippets.",
            context=("Concept: ${indicator}\nAvailable tags:\n${tag_list}\n"
                     "Upstream explanation: ${explanation}"),
            user=("List every tag that applies to the snippet below. Answer with a fenced json "
                  "block: {\"labels\": [tag names], \"evidence\": [verbatim sentences], "
                  "\"explanation\": \"...\"}\n\nSnippet:\n${snippet}"),
        )
    if step == Step.LINK_ID:
        return PromptTemplate(
            step=step,
            persona="You are an analyst deciding whether two tags are related in a snippet.",
            context="Tag pair:\n${var_pair_definitions}",
            user=("Does the snippet assert a relationship between the two tags? If yes, answer "
                  "with a fenced json block: {\"source\": tag, \"target\": tag, "
                  "\"relationship\": \"...\", \"evidence\": [...], \"explanation\": \"...\"}. "
                  "If not, answer {\"none\": true}.\n\nSnippet:\n${snippet}"),
        )
    if step == Step.SEGMENTATION:
        return PromptTemplate(step=step, user="${conversations}")
    if step == Step.TOPIC_LABEL:
        return PromptTemplate(
            step=step,
            user=("Give one short topic label (at most 6 words) for these snippets. Answer with "
                  "a fenced json block: {\"label\": \"...\"}\n\n${snippets}"),
        )
    return PromptTemplate(
        step=step,
        user=("Extract up to 5 short noun-phrase keywords from this evidence. Answer with a "
              "fenced json block: {\"keywords\": [...]}\n\nEvidence:\n${evidence}"),
    )


@dataclass(frozen=True)
class VersionEdits:
    """A forward-only edit bundle applied when forking a version."""

    add_variables: tuple[Variable, ...] = ()
    remove_variables: tuple[str, ...] = ()  # (kind is inferred by name match)
    redefine_indicators: dict = field(default_factory=dict)  # kind -> new definition
    append_indicator_text: dict = field(default_factory=dict)  # kind -> text to append
    template: Optional[PromptTemplate] = None
    upstream_version_id: Optional[str] = None


def create_version(step: Step, parent: Optional[TaxonomyVersion], edits: VersionEdits,
                   version_id: str, created_at: str = "") -> TaxonomyVersion:
    """Fork a new immutable version from ``parent`` (or from defaults)."""
    if parent is not None:
        indicators = list(parent.indicators)
        variables = list(parent.variables)
        template = parent.template
        upstream = edits.upstream_version_id or parent.upstream_version_id
    else:
        indicators = list(default_indicators())
        variables = list(miscellaneous_variables())
        template = default_template(step)
        upstream = edits.upstream_version_id

    for kind, definition in edits.redefine_indicators.items():
        indicators = [replace(i, definition=definition) if i.kind == kind else i
                      for i in indicators]
    for kind, extra in edits.append_indicator_text.items():
        indicators = [replace(i, definition=i.definition.rstrip() + " " + extra)
                      if i.kind == kind else i for i in indicators]

    for name in edits.remove_variables:
        matches = [v for v in variables if v.name.lower() == name.lower()]
        for v in matches:
            if v.reserved:
                raise ValueError(f"cannot remove the reserved '{MISCELLANEOUS}' variable")
        variables = [v for v in variables if v.name.lower() != name.lower()]
    for new in edits.add_variables:
        clash = [v for v in variables
                 if v.indicator_kind == new.indicator_kind and v.name.lower() == new.name.lower()]
        if clash:
            raise ValueError(f"duplicate variable name: {new.name}")
        variables.append(new)

    if edits.template is not None:
        template = edits.template

    return TaxonomyVersion(
        id=version_id, step=step,
        indicators=tuple(indicators), variables=tuple(variables),
        template=template, parent_id=parent.id if parent else None,
        upstream_version_id=upstream, created_at=created_at,
    )


class Condition(str, Enum):
    MUST_HAVE = "must_have"
    MUST_NOT_HAVE = "must_not_have"


@dataclass(frozen=True)
class Rule:
    id: str
    snippet_id: str
    condition: Condition
    step: Step
    # indicator letter/name for IndicatorId, variable name for VariableId,
    # "src->dst" pair for LinkId
    value: str


class RuleConflictError(ValueError):
    pass


class RuleStore:
    """Global rule set; rules apply across every version's results."""

    def __init__(self):
        self._rules: dict[str, Rule] = {}
        self._counter = 0

    def add_rule(self, snippet_id: str, condition: Condition, step: Step, value: str) -> Rule:
        for r in self._rules.values():
            if (r.snippet_id == snippet_id and r.step == step and r.value == value
                    and r.condition != condition):
                raise RuleConflictError(
                    f"conflicting rule for snippet {snippet_id}: {value} already "
                    f"has condition {r.condition.value}")
        self._counter += 1
        rule = Rule(id=f"rule-{self._counter}", snippet_id=snippet_id,
                    condition=condition, step=step, value=value)
        self._rules[rule.id] = rule
        return rule

    def remove_rule(self, rule_id: str) -> None:
        self._rules.pop(rule_id, None)

    def list_rules(self, snippet_id: Optional[str] = None) -> list[Rule]:
        rules = sorted(self._rules.values(), key=lambda r: r.id)
        if snippet_id is None:
            return rules
        return [r for r in rules if r.snippet_id == snippet_id]
