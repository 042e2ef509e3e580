# tests/conftest.py
import numpy as np
import pytest

from numcore.matrix import make_rng
from seq2seq.checkpoint import save_checkpoint
from seq2seq.config import ModelConfig, TrainingConfig
from seq2seq.model import init_model
from taskgen.splits import generate_bundle, make_example
from taskgen.tables import LookupTable, tables_by_name
from taskgen.vocab import Vocabulary

# ---------------- TABLE FIXTURES ---------------- #

# t1 agrees with the published example rows; the remaining entries are chosen
# so that t2 is a bijection and the composed examples hold.
T1 = {"000": "111", "001": "010", "010": "101", "011": "000",
      "100": "011", "101": "110", "110": "100", "111": "001"}
T2 = {"000": "010", "001": "101", "010": "110", "011": "000",
      "100": "001", "101": "100", "110": "111", "111": "011"}

TINY = ModelConfig(embed_dim=4, hidden_dim=8, attn_dim=6, init_scale=0.5)


@pytest.fixture
def t1():
    return LookupTable.from_dict(1, T1)


@pytest.fixture
def t2():
    return LookupTable.from_dict(2, T2)


@pytest.fixture
def fixture_tables(t1, t2):
    return tables_by_name([t1, t2])


@pytest.fixture
def vocab():
    return Vocabulary.default()


@pytest.fixture(scope="session")
def bundle():
    return generate_bundle(0)


@pytest.fixture
def composed_example(fixture_tables):
    return make_example(fixture_tables, "001", ("t1", "t2"))


@pytest.fixture
def atomic_example(fixture_tables):
    return make_example(fixture_tables, "110", ("t1",))


# ---------------- MODELS ---------------- #

@pytest.fixture
def tiny_config():
    return TINY


def make_model(mode: str = "ag", seed: int = 0, config: ModelConfig = TINY):
    return init_model(config, Vocabulary.default(), mode, make_rng(seed, f"test/{mode}"))


@pytest.fixture
def ag_model():
    return make_model("ag")


@pytest.fixture
def baseline_model():
    return make_model("baseline", seed=1)


@pytest.fixture
def quick_training():
    return TrainingConfig(epochs=1, lr=0.01, seed=0)


@pytest.fixture
def checkpoints(tmp_path, ag_model, baseline_model):
    """Saved AG and baseline tiny checkpoints: (ag_path, baseline_path)."""
    ag = save_checkpoint(ag_model, tmp_path / "ag" / "model.json")
    bl = save_checkpoint(baseline_model, tmp_path / "baseline" / "model.json")
    return ag, bl


@pytest.fixture
def rng():
    return np.random.default_rng(0)
