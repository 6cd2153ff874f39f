import json

import pytest

from reground import gateway
from reground.context import NO_CONTEXT, ContextBundle
from reground.errors import (
    BackendUnavailableError,
    InvalidReasoningLevelError,
    MalformedBackendJsonError,
    MissingCredentialsError,
    MissingPromptFileError,
)
from reground.gateway import (
    ACKNOWLEDGEMENT,
    REFUSAL_ANSWER,
    CallableBackend,
    GenerationParams,
    Message,
    ScriptedBackend,
    build_chat_messages,
    contract_faithful_mock,
    extract_citations,
    generate_answer,
    generate_subqueries,
    load_prompt,
    parse_strict_json,
    require_credential,
)


def bundle(text, ids=("c0",)):
    return ContextBundle(context_text=text, included_ids=tuple(ids), sources=(), truncated=False)


# --- prompts ----------------------------------------------------------------------

def test_prompt_files_load():
    for name in (
        "answer_system",
        "answer_developer",
        "query_generation_system",
        "query_generation_user",
        "indicator_system",
    ):
        assert load_prompt(name).strip()


def test_missing_prompt_raises():
    with pytest.raises(MissingPromptFileError):
        load_prompt("no_such_prompt")


def test_developer_prompt_pins_exact_refusal():
    assert REFUSAL_ANSWER in load_prompt("answer_developer")


# --- params -----------------------------------------------------------------------

def test_default_params():
    p = GenerationParams()
    assert (p.max_tokens, p.temperature, p.top_p) == (56_000, 0.2, 0.9)
    assert p.presence_penalty == p.frequency_penalty == 0.0
    assert p.reasoning_effort == "medium"


def test_param_validation():
    with pytest.raises(ValueError):
        GenerationParams(temperature=-0.1)
    with pytest.raises(ValueError):
        GenerationParams(top_p=0.0)
    with pytest.raises(ValueError):
        GenerationParams(reasoning_effort="max")


# --- message construction -----------------------------------------------------------

def test_message_order():
    msgs = build_chat_messages("What is a ground risk buffer?", bundle("[0] S, page 1 > text\n"))
    assert [m.role for m in msgs] == ["system", "developer", "user", "assistant", "user"]
    assert msgs[2].content == "What is a ground risk buffer?"
    assert msgs[3].content == ACKNOWLEDGEMENT
    assert msgs[4].content.startswith("Context:\n[0]")


def test_history_inserted_between_developer_and_query():
    history = [Message("user", "earlier"), Message("assistant", "reply")]
    msgs = build_chat_messages("follow-up", bundle("ctx"), history=history)
    assert [m.role for m in msgs] == [
        "system", "developer", "user", "assistant", "user", "assistant", "user",
    ]
    assert msgs[2].content == "earlier"


# --- backends ----------------------------------------------------------------------

def test_scripted_backend_replays_in_order():
    backend = ScriptedBackend(["first", "second"])
    p = GenerationParams()
    assert backend.complete([], p).text == "first"
    assert backend.complete([], p).text == "second"
    with pytest.raises(BackendUnavailableError):
        backend.complete([], p)
    assert len(backend.calls) == 2


def test_stream_prefix_consistent():
    backend = ScriptedBackend(["x" * 100])
    pieces = list(backend.stream([], GenerationParams()))
    assert "".join(pieces) == "x" * 100
    assert all(pieces)


def test_callable_backend():
    backend = CallableBackend(lambda msgs, params: f"saw {len(msgs)} messages")
    assert backend.complete([Message("user", "q")], GenerationParams()).text == "saw 1 messages"


def test_contract_mock_refuses_on_no_context():
    backend = contract_faithful_mock()
    msgs = build_chat_messages("q", bundle(NO_CONTEXT, ids=()))
    assert backend.complete(msgs, GenerationParams()).text == REFUSAL_ANSWER


def test_contract_mock_cites_top_chunk():
    backend = contract_faithful_mock()
    msgs = build_chat_messages("q", bundle("[0] Section, page 3 > The buffer is lateral.\n"))
    out = backend.complete(msgs, GenerationParams()).text
    assert "[0]" in out
    assert "The buffer is lateral." in out


# --- answers and citations ---------------------------------------------------------

def test_extract_citations_order_and_dedup():
    assert extract_citations("see [2] then [0] and [2] again") == (2, 0)
    assert extract_citations("no markers") == ()


def test_generate_answer_keeps_trace_out_of_answer():
    backend = ScriptedBackend([gateway.Completion(text="answer [1]", reasoning_trace="chain")])
    result = generate_answer([], GenerationParams(), backend)
    assert result.answer == "answer [1]"
    assert result.citations == (1,)
    assert result.reasoning_trace == "chain"
    assert "chain" not in result.answer


# --- credentials ---------------------------------------------------------------------

def test_require_credential(monkeypatch):
    monkeypatch.setenv("RG_TEST_TOKEN", "s3cr3t")
    assert require_credential("RG_TEST_TOKEN") == "s3cr3t"


def test_missing_credential_message_has_name_not_value(monkeypatch):
    monkeypatch.delenv("RG_TEST_TOKEN", raising=False)
    with pytest.raises(MissingCredentialsError) as err:
        require_credential("RG_TEST_TOKEN")
    assert "RG_TEST_TOKEN" in str(err.value)


# --- strict JSON / subqueries ---------------------------------------------------------

def test_parse_strict_json():
    assert parse_strict_json(' {"a": 1} ') == {"a": 1}
    with pytest.raises(MalformedBackendJsonError):
        parse_strict_json('prefix {"a": 1}')
    with pytest.raises(MalformedBackendJsonError):
        parse_strict_json("[1, 2]")


def subquery_payload(entries):
    return json.dumps({"queries": entries})


def test_generate_subqueries_happy_path():
    backend = ScriptedBackend([
        subquery_payload([
            {"query": "ground risk buffer sizing", "reasoning_level": "low"},
            {"query": "buffer vs contingency volume", "reasoning_level": "high"},
        ])
    ])
    subs = generate_subqueries("how big is the buffer?", 3, backend)
    assert [s.query for s in subs] == [
        "ground risk buffer sizing",
        "buffer vs contingency volume",
    ]
    assert [s.reasoning_level for s in subs] == ["low", "high"]
    # the N cap is substituted into the system prompt
    system = backend.calls[0][0]
    assert "at most 3 queries" in system.content


def test_generate_subqueries_truncates_to_n():
    entries = [{"query": f"q{i}", "reasoning_level": "none"} for i in range(5)]
    backend = ScriptedBackend([subquery_payload(entries)])
    assert len(generate_subqueries("q", 2, backend)) == 2


def test_generate_subqueries_invalid_level():
    backend = ScriptedBackend([subquery_payload([{"query": "q", "reasoning_level": "extreme"}])])
    with pytest.raises(InvalidReasoningLevelError):
        generate_subqueries("q", 2, backend)


def test_generate_subqueries_malformed():
    for raw in ["not json", '{"wrong": []}', subquery_payload([{"reasoning_level": "low"}])]:
        with pytest.raises(MalformedBackendJsonError):
            generate_subqueries("q", 2, ScriptedBackend([raw]))
