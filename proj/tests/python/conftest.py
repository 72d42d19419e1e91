import json
import os
import pathlib

import pytest

SOURCE_DIR = pathlib.Path(os.environ.get("LHM_SOURCE_DIR", pathlib.Path(__file__).resolve().parents[2]))
TINY = {
    "sampler": {"n_walkers": 10, "n_steps": 200, "burn_in": 50},
    "training": {"epochs": 3},
}


@pytest.fixture
def schema():
    def load(name):
        return json.loads((SOURCE_DIR / "schemas" / f"{name}.schema.json").read_text())

    return load


@pytest.fixture
def tiny():
    def make(problem, **extra):
        return {"problem": problem, **json.loads(json.dumps(TINY)), **extra}

    return make
