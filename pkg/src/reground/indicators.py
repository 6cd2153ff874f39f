"""Structured indicator workflow: validated categorical operation inputs,
deterministic per-indicator retrieval queries, strict single-JSON-object
generation, repeated runs with majority vote, and cross-indicator coherence
warnings.

The controlled vocabularies, discriminator term maps, and coherence rules are
plain data, editable in config and explicitly non-normative.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

from .context import DEFAULT_BUDGET, ContextBundle, SourceRef, assemble_context
from .errors import (
    InvalidValueError,
    MalformedBackendJsonError,
    MalformedIndicatorJsonError,
    MissingFieldError,
)
from .gateway import (
    GenerationBackend,
    GenerationParams,
    Message,
    load_prompt,
    parse_strict_json,
)
from .pipeline import Retriever

OPERATION_FIELDS = (
    "mass_category",
    "flight_mode",
    "ground_environment",
    "airspace_type",
    "altitude_category",
)

# Non-normative defaults; the vocabularies carry no regulatory authority.
DEFAULT_VOCABULARIES: dict[str, tuple[str, ...]] = {
    "mass_category": ("sub_250g", "sub_25kg", "over_25kg"),
    "flight_mode": ("VLOS", "BVLOS"),
    "ground_environment": (
        "controlled_ground",
        "sparsely_populated",
        "populated",
        "assembly_of_people",
    ),
    "airspace_type": ("uncontrolled", "controlled"),
    "altitude_category": ("below_120m_agl", "above_120m_agl"),
}

# Operation-dependent discriminator terms appended to indicator base queries.
DISCRIMINATOR_TERMS: dict[str, dict[str, list[str]]] = {
    "mass_category": {
        "sub_250g": ["below 250 g", "small unmanned aircraft"],
        "sub_25kg": ["below 25 kg maximum take-off mass"],
        "over_25kg": ["above 25 kg maximum take-off mass"],
    },
    "flight_mode": {
        "VLOS": ["visual line of sight"],
        "BVLOS": ["beyond visual line of sight"],
    },
    "ground_environment": {
        "controlled_ground": ["controlled ground area"],
        "sparsely_populated": ["sparsely populated environment"],
        "populated": ["populated environment", "people on the ground"],
        "assembly_of_people": ["assemblies of people"],
    },
    "airspace_type": {
        "uncontrolled": ["uncontrolled airspace"],
        "controlled": ["controlled airspace"],
    },
    "altitude_category": {
        "below_120m_agl": ["below 120 m above ground level"],
        "above_120m_agl": ["above 120 m altitude"],
    },
}


@dataclass(frozen=True)
class OperationInput:
    mass_category: str
    flight_mode: str
    ground_environment: str
    airspace_type: str
    altitude_category: str

    def to_dict(self) -> dict:
        return {f: getattr(self, f) for f in OPERATION_FIELDS}


def validate_operation_input(
    raw: dict, vocabularies: dict[str, tuple[str, ...]] | None = None
) -> OperationInput:
    """All five fields required, values from their closed vocabularies.
    Missing fields are never inferred."""
    vocab = vocabularies or DEFAULT_VOCABULARIES
    values = {}
    for name in OPERATION_FIELDS:
        if name not in raw or raw[name] in (None, ""):
            raise MissingFieldError(name)
        if raw[name] not in vocab[name]:
            raise InvalidValueError(name, raw[name])
        values[name] = raw[name]
    return OperationInput(**values)


@dataclass(frozen=True)
class IndicatorSpec:
    name: str
    allowed_values: tuple[str, ...]
    base_query_terms: tuple[str, ...]
    relevant_input_fields: tuple[str, ...]
    value_guidance: str
    hint_terms: tuple[str, ...] = ()


DEFAULT_INDICATORS: dict[str, IndicatorSpec] = {
    spec.name: spec
    for spec in (
        IndicatorSpec(
            name="likely_regulatory_pathway",
            allowed_values=("Open", "Specific PDRA", "Specific SORA"),
            base_query_terms=("regulatory pathway", "operational category", "specific category"),
            relevant_input_fields=OPERATION_FIELDS,
            value_guidance="Example values: Open, Specific PDRA, Specific SORA",
            hint_terms=("PDRA", "standard scenario", "STS"),
        ),
        IndicatorSpec(
            name="initial_ground_risk_orientation",
            allowed_values=("very_low", "low", "medium", "high"),
            base_query_terms=("ground risk", "intrinsic ground risk class"),
            relevant_input_fields=("mass_category", "flight_mode", "ground_environment"),
            value_guidance="Allowed values: very_low, low, medium, high",
        ),
        IndicatorSpec(
            name="initial_air_risk_orientation",
            allowed_values=("very_low", "low", "medium", "high"),
            base_query_terms=("air risk", "airspace encounter category"),
            relevant_input_fields=("flight_mode", "airspace_type", "altitude_category"),
            value_guidance="Allowed values: very_low, low, medium, high",
        ),
        IndicatorSpec(
            name="expected_assessment_depth",
            allowed_values=("simple_declaration", "structured_assessment", "full_sora"),
            base_query_terms=("risk assessment process", "assessment depth"),
            relevant_input_fields=OPERATION_FIELDS,
            value_guidance=(
                "Example values: simple_declaration, structured_assessment, full_sora"
            ),
        ),
    )
}


def build_indicator_query(spec: IndicatorSpec, op: OperationInput) -> list[str]:
    """Deterministic term list: base terms, then discriminators for the
    relevant input fields only, then pathway hint terms."""
    terms = list(spec.base_query_terms)
    for name in spec.relevant_input_fields:
        terms.extend(DISCRIMINATOR_TERMS.get(name, {}).get(getattr(op, name), []))
    terms.extend(spec.hint_terms)
    return terms


@dataclass
class IndicatorRun:
    value: str | None
    explanation: str
    parse_error: str | None = None

    def to_dict(self) -> dict:
        return {"value": self.value, "explanation": self.explanation,
                "parse_error": self.parse_error}


@dataclass
class IndicatorResult:
    name: str
    value: str | None
    explanation: str
    runs: list[IndicatorRun] = field(default_factory=list)
    vote_count: int = 0
    value_consistency: float = 0.0
    inconclusive: bool = False
    tied_values: tuple[str, ...] = ()
    invalid_value: bool = False
    low_confidence: bool = False
    parse_failures: int = 0
    sources: tuple[SourceRef, ...] = ()

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "value": self.value,
            "explanation": self.explanation,
            "runs": [r.to_dict() for r in self.runs],
            "vote_count": self.vote_count,
            "value_consistency": self.value_consistency,
            "inconclusive": self.inconclusive,
            "tied_values": list(self.tied_values),
            "invalid_value": self.invalid_value,
            "low_confidence": self.low_confidence,
            "parse_failures": self.parse_failures,
            "sources": [s.to_dict() for s in self.sources],
        }


def build_indicator_messages(
    spec: IndicatorSpec, op: OperationInput, bundle: ContextBundle
) -> list[Message]:
    """System, developer, then two user messages: the request contract and
    the retrieved context."""
    inputs_block = "\n".join(
        f"{name}: {getattr(op, name)}" for name in spec.relevant_input_fields
    )
    request = (
        "You will receive a context section and a small set of operation inputs.\n"
        "Use only the context and the provided inputs.\n"
        "Return exactly one JSON object with keys name, value, explanation.\n"
        "Do not output any additional text.\n"
        "\n"
        f"Requested indicator: {spec.name}\n"
        f"{spec.value_guidance}\n"
        "Base the value only on the context and the operation inputs below.\n"
        "\n"
        "Operation inputs:\n"
        f"{inputs_block}"
    )
    return [
        Message("system", load_prompt("indicator_system")),
        Message("developer", load_prompt("answer_developer")),
        Message("user", request),
        Message("user", f"Context:\n{bundle.context_text}"),
    ]


def parse_indicator_json(text: str) -> IndicatorRun:
    try:
        parsed = parse_strict_json(text)
    except MalformedBackendJsonError as exc:
        raise MalformedIndicatorJsonError(str(exc)) from exc
    missing = {"name", "value", "explanation"} - set(parsed)
    if missing:
        raise MalformedIndicatorJsonError(f"missing keys: {sorted(missing)}")
    return IndicatorRun(value=str(parsed["value"]), explanation=str(parsed["explanation"]))


def request_indicator(
    spec: IndicatorSpec,
    op: OperationInput,
    runs: int,
    backend: GenerationBackend,
    retriever: Retriever,
    budget: int = DEFAULT_BUDGET,
    params: GenerationParams | None = None,
) -> tuple[IndicatorResult, ContextBundle]:
    """Retrieve once (all runs see the identical context), generate N times,
    and aggregate by majority vote. Ties are flagged inconclusive, never
    broken silently; malformed runs are excluded from the vote denominator."""
    params = params or GenerationParams()
    query = " ".join(build_indicator_query(spec, op))
    trace = retriever.retrieve(query)
    ranked = [
        (c.position, retriever.corpus.get(c.chunk_id)) for c in trace.kept
    ]
    bundle = assemble_context(ranked, budget)

    if not bundle.included_ids:
        result = IndicatorResult(
            name=spec.name,
            value=None,
            explanation=(
                "No supporting material was retrieved for this indicator. "
                "Please refine the operation description or extend the corpus; "
                "this output is low confidence."
            ),
            low_confidence=True,
        )
        return result, bundle

    messages = build_indicator_messages(spec, op, bundle)
    run_records: list[IndicatorRun] = []
    parse_failures = 0
    for _ in range(runs):
        completion = backend.complete(messages, params)
        try:
            run_records.append(parse_indicator_json(completion.text))
        except MalformedIndicatorJsonError as exc:
            parse_failures += 1
            run_records.append(IndicatorRun(value=None, explanation="", parse_error=str(exc)))

    valid = [r for r in run_records if r.parse_error is None]
    result = IndicatorResult(
        name=spec.name,
        value=None,
        explanation="",
        runs=run_records,
        parse_failures=parse_failures,
        sources=bundle.sources,
    )
    if not valid:
        result.low_confidence = True
        result.explanation = "All runs failed to produce parseable indicator output."
        return result, bundle

    votes = Counter(r.value for r in valid)
    top_count = max(votes.values())
    winners = sorted(v for v, c in votes.items() if c == top_count)
    result.vote_count = top_count
    result.value_consistency = 100.0 * top_count / len(valid)
    if len(winners) > 1:
        result.inconclusive = True
        result.tied_values = tuple(winners)
        result.explanation = (
            "Repeated runs were split between "
            + ", ".join(winners)
            + "; the result is inconclusive."
        )
    else:
        winner = winners[0]
        result.value = winner
        result.invalid_value = winner not in spec.allowed_values
        result.explanation = next(r.explanation for r in valid if r.value == winner)
    return result, bundle


# --- cross-indicator coherence -------------------------------------------------

# (indicator_a, value_a, indicator_b, conflicting values of b, warning text)
DEFAULT_COHERENCE_RULES: list[tuple[str, str, str, tuple[str, ...], str]] = [
    (
        "expected_assessment_depth", "simple_declaration",
        "initial_ground_risk_orientation", ("high",),
        "simple_declaration depth is inconsistent with a high ground risk orientation",
    ),
    (
        "expected_assessment_depth", "simple_declaration",
        "initial_air_risk_orientation", ("high",),
        "simple_declaration depth is inconsistent with a high air risk orientation",
    ),
    (
        "likely_regulatory_pathway", "Open",
        "expected_assessment_depth", ("full_sora",),
        "Open pathway is inconsistent with a full_sora assessment depth",
    ),
]


def check_cross_indicator_coherence(
    results: dict[str, IndicatorResult],
    rules: list[tuple[str, str, str, tuple[str, ...], str]] | None = None,
) -> list[str]:
    """Advisory warnings only; values are never mutated."""
    if len(results) < 2:
        return []
    warnings: list[str] = []
    for ind_a, val_a, ind_b, vals_b, message in (rules or DEFAULT_COHERENCE_RULES):
        a = results.get(ind_a)
        b = results.get(ind_b)
        if a is not None and b is not None and a.value == val_a and b.value in vals_b:
            warnings.append(message)
    return warnings
