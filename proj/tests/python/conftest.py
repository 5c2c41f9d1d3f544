import os
from pathlib import Path

import pytest


@pytest.fixture(scope="session")
def source_dir():
    return Path(os.environ.get("CROPEMU_SOURCE_DIR", Path(__file__).resolve().parents[2]))


@pytest.fixture(scope="session")
def corpus(source_dir):
    return source_dir / "data" / "synthetic_corpus.csv"


@pytest.fixture(scope="session")
def tiny_run(tmp_path_factory, source_dir, corpus):
    import cropemu

    out = tmp_path_factory.mktemp("tiny") / "run"
    cropemu.run_stage("all", str(source_dir / "config" / "tiny.json"), str(out), str(corpus))
    return out
