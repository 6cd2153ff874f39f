import json

import pytest

from reground.engine import Engine, RunConfig
from reground.gateway import BackendRegistry, contract_faithful_mock


def make_chunk(i, **overrides):
    base = {
        "chunk_id": f"chunk-{i}",
        "chunk_title": f"Title {i}",
        "chunk_text": f"Body text for chunk {i}.",
        "chunk_summary": f"Summary of chunk {i}.",
        "chunk_keywords": [f"keyword{i}"],
        "source_file": "fixture.pdf",
        "section_title": f"Section {i}",
        "page": i + 1,
        "kind": "article",
    }
    base.update(overrides)
    return base


FIXTURE_CHUNKS = [
    make_chunk(
        0,
        chunk_id="art-1",
        chunk_title="Ground risk buffer",
        chunk_text=(
            "The ground risk buffer shall surround the operational volume and "
            "account for the expected trajectory of the unmanned aircraft after "
            "a loss of control. The buffer dimensions depend on the maximum "
            "height and the aircraft characteristics."
        ),
        chunk_summary="Defines the ground risk buffer around the operational volume.",
        chunk_keywords=["ground risk", "buffer", "operational volume"],
        section_title="Ground risk buffer",
        page=12,
    ),
    make_chunk(
        1,
        chunk_id="amc-1",
        chunk_title="Operational volume definition",
        chunk_text=(
            "The operational volume is composed of the flight geography and the "
            "contingency volume. Applicants define the operational volume before "
            "selecting mitigations for ground risk."
        ),
        chunk_summary="Explains how the operational volume is composed.",
        chunk_keywords=["operational volume", "flight geography", "contingency"],
        section_title="Operational volume",
        page=15,
        kind="amc",
    ),
    make_chunk(
        2,
        chunk_id="gm-1",
        chunk_title="Air risk classes",
        chunk_text=(
            "Air risk classes describe the encounter likelihood with manned "
            "aircraft. Controlled airspace and altitudes above 120 m generally "
            "increase the initial air risk class."
        ),
        chunk_summary="Overview of air risk classes and airspace effects.",
        chunk_keywords=["air risk", "airspace", "encounter"],
        section_title="Air risk",
        page=22,
        kind="gm",
    ),
    make_chunk(
        3,
        chunk_id="tbl-1",
        chunk_title="Assessment depth by category",
        chunk_text=(
            "Operations in the open category use a simple declaration. Standard "
            "scenarios and pre-defined risk assessments use a structured "
            "assessment. Other specific category operations require a full "
            "risk assessment process."
        ),
        chunk_summary="Maps operation categories to assessment depth.",
        chunk_keywords=["assessment depth", "pdra", "specific category"],
        section_title="Assessment depth",
        page=30,
        kind="table",
    ),
    make_chunk(
        4,
        chunk_id="art-2",
        chunk_title="BVLOS containment requirements",
        chunk_text=(
            "Beyond visual line of sight operations require enhanced containment "
            "when flown over populated environments. The operator demonstrates "
            "that the probability of leaving the operational volume is low."
        ),
        chunk_summary="Containment requirements for BVLOS flight over populated areas.",
        chunk_keywords=["bvlos", "containment", "populated"],
        section_title="Containment",
        page=35,
    ),
]


@pytest.fixture
def corpus_file(tmp_path):
    path = tmp_path / "corpus.json"
    path.write_text(json.dumps(FIXTURE_CHUNKS), encoding="utf-8")
    return path


@pytest.fixture
def engine(tmp_path, corpus_file):
    config = RunConfig(
        corpus_path=str(corpus_file),
        index_dir=str(tmp_path / "index"),
        audit_path=str(tmp_path / "audit.jsonl"),
    )
    registry = BackendRegistry()
    registry.register(contract_faithful_mock())
    eng = Engine(config, backends=registry)
    eng.build_index()
    return eng


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Print the acceptance-criteria pass/fail lines collected during the run."""
    import sys

    module = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    if module is not None and module.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in module.RESULTS:
            terminalreporter.write_line(line)
