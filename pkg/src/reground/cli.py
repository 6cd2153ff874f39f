"""Command-line entry points: build-index, query, indicators, eval, serve.

Exit codes are stable for scripting: 0 success, 2 validation errors,
3 backend unavailable, 4 index errors.
"""

from __future__ import annotations

import json
import sys

import click

from .engine import Engine, RunConfig
from .errors import (
    BackendUnavailableError,
    EngineError,
    GenerationTimeoutError,
    IndexCorruptError,
    IndexWriteFailureError,
    InvalidValueError,
    MissingCredentialsError,
    MissingFieldError,
)
from .gateway import BackendRegistry, ScriptedBackend, contract_faithful_mock

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_BACKEND = 3
EXIT_INDEX = 4


def _registry(script_path: str | None) -> BackendRegistry:
    registry = BackendRegistry()
    registry.register(contract_faithful_mock())
    if script_path:
        responses = json.loads(open(script_path, encoding="utf-8").read())
        registry.register(ScriptedBackend(responses))
    return registry


def _make_engine(corpus, index_dir, audit, backend, script) -> Engine:
    config = RunConfig(
        corpus_path=corpus, index_dir=index_dir, audit_path=audit, backend_name=backend
    )
    return Engine(config, backends=_registry(script))


def _fail(exc: Exception, code: int) -> None:
    click.echo(f"error: {exc}", err=True)
    sys.exit(code)


common_options = [
    click.option("--corpus", required=True, type=click.Path(), help="chunk JSON file"),
    click.option("--index-dir", default="./index", type=click.Path(), show_default=True),
    click.option("--audit", default="./audit.jsonl", type=click.Path(), show_default=True),
    click.option("--backend", default="contract-mock", show_default=True,
                 help="generation backend name"),
    click.option("--backend-script", default=None, type=click.Path(exists=True),
                 help="JSON list of scripted responses, registered as 'scripted-mock'"),
]


def with_common_options(fn):
    for option in reversed(common_options):
        fn = option(fn)
    return fn


@click.group()
def main() -> None:
    """Grounded hybrid-retrieval and assessment engine."""


@main.command("build-index")
@with_common_options
def build_index(corpus, index_dir, audit, backend, backend_script) -> None:
    """Validate the corpus and build the dense + sparse indexes."""
    engine = _make_engine(corpus, index_dir, audit, backend, backend_script)
    try:
        meta = engine.build_index()
    except IndexWriteFailureError as exc:
        _fail(exc, EXIT_INDEX)
    except EngineError as exc:
        _fail(exc, EXIT_VALIDATION)
    click.echo(json.dumps(meta, indent=2, sort_keys=True))


@main.command("query")
@with_common_options
@click.argument("question")
@click.option("--top-k", default=None, type=int, help="dense candidate pool size")
@click.option("--keep-k", default=None, type=int,
              help="post-fusion keep count (ce_keep_k)")
@click.option("--preprocess/--no-preprocess", default=False)
@click.option("--stream/--no-stream", default=False)
@click.option("--reasoning-effort", default=None,
              type=click.Choice(["low", "medium", "high"]))
def query(corpus, index_dir, audit, backend, backend_script, question,
          top_k, keep_k, preprocess, stream, reasoning_effort) -> None:
    """Answer a question through the full retrieval + generation pipeline."""
    engine = _make_engine(corpus, index_dir, audit, backend, backend_script)
    try:
        engine.load()
    except IndexCorruptError as exc:
        _fail(exc, EXIT_INDEX)
    except EngineError as exc:
        _fail(exc, EXIT_VALIDATION)
    overrides = {}
    if top_k:
        overrides["dense_pool"] = top_k
    if keep_k:
        overrides["keep_after_fusion"] = keep_k
    try:
        result = engine.answer_query(
            question,
            preprocess=preprocess,
            stream=stream,
            pipeline_overrides=overrides or None,
            reasoning_effort=reasoning_effort,
        )
    except (MissingCredentialsError, BackendUnavailableError, GenerationTimeoutError) as exc:
        _fail(exc, EXIT_BACKEND)
    click.echo(result.answer)
    click.echo("")
    click.echo("Sources:")
    if not result.sources:
        click.echo("  (none)")
    for src in result.sources:
        click.echo(
            f"  [{src['chunk_index']}] {src['section_title']}, "
            f"page {src['page']} ({src['source_file']})"
        )
    click.echo(f"audit: {result.audit_id}")


@main.command("indicators")
@with_common_options
@click.option("--op", "op_json", required=True,
              help="operation descriptor as a JSON object")
@click.option("--indicator", "names", multiple=True, required=True)
@click.option("--runs", default=10, show_default=True, type=int)
@click.option("--export", default=None, type=click.Path(), help="write results JSON here")
def indicators(corpus, index_dir, audit, backend, backend_script,
               op_json, names, runs, export) -> None:
    """Run one or more indicators for a structured operation input."""
    engine = _make_engine(corpus, index_dir, audit, backend, backend_script)
    try:
        engine.load()
    except IndexCorruptError as exc:
        _fail(exc, EXIT_INDEX)
    except EngineError as exc:
        _fail(exc, EXIT_VALIDATION)
    try:
        op = json.loads(op_json)
    except json.JSONDecodeError as exc:
        _fail(exc, EXIT_VALIDATION)
    try:
        results = engine.run_indicators(op, list(names), runs)
    except (MissingFieldError, InvalidValueError) as exc:
        _fail(exc, EXIT_VALIDATION)
    except (BackendUnavailableError, GenerationTimeoutError) as exc:
        _fail(exc, EXIT_BACKEND)
    payload = json.dumps(results, indent=2, sort_keys=True)
    click.echo(payload)
    if export:
        try:
            with open(export, "w", encoding="utf-8") as fh:
                fh.write(payload)
        except OSError as exc:
            _fail(exc, EXIT_VALIDATION)


@main.command("eval")
@with_common_options
@click.argument("fixture", type=click.Path(exists=True))
def eval_cmd(corpus, index_dir, audit, backend, backend_script, fixture) -> None:
    """Retrieval metrics (Hit@m, MRR) over an evaluation fixture."""
    engine = _make_engine(corpus, index_dir, audit, backend, backend_script)
    try:
        engine.load()
    except IndexCorruptError as exc:
        _fail(exc, EXIT_INDEX)
    except EngineError as exc:
        _fail(exc, EXIT_VALIDATION)
    report = engine.run_eval(fixture)
    click.echo(json.dumps(report, indent=2, sort_keys=True))


@main.command("serve")
@with_common_options
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
def serve(corpus, index_dir, audit, backend, backend_script, host, port) -> None:
    """Run the HTTP service."""
    import uvicorn

    from .service import create_app

    engine = _make_engine(corpus, index_dir, audit, backend, backend_script)
    try:
        engine.load()
    except IndexCorruptError as exc:
        _fail(exc, EXIT_INDEX)
    except EngineError as exc:
        _fail(exc, EXIT_VALIDATION)
    uvicorn.run(create_app(engine), host=host, port=port)


if __name__ == "__main__":
    main()
