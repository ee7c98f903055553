import numpy as np
import pytest

from foilskin.estimator import TrainConfig, mlp_init, train
from foilskin.geometry import FoilGeometry
from foilskin.plant import PlantParams
from foilskin.protocol import TrainingProtocol, build_dataset, generate_training_logs
from foilskin.sensing import SkinModelParams

# epochs for the session-wide estimator; enough for sub-percent tip error
SESSION_EPOCHS = 400


@pytest.fixture(scope="session")
def plant():
    return PlantParams()


@pytest.fixture(scope="session")
def skin():
    return SkinModelParams()


@pytest.fixture(scope="session")
def geometry(plant):
    return plant.geometry


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def default_logs(plant, skin):
    """Full-length training routine (24,000 camera frames)."""
    return generate_training_logs(TrainingProtocol(), plant, skin, seed=11)


@pytest.fixture(scope="session")
def trained(default_logs, plant):
    """Estimator trained once on the default routine; shared by the end-to-end tests."""
    logs = default_logs
    dataset, ref, pairs = build_dataset(logs.capacitance, logs.markers, logs.baseline_end, plant, seed=3)
    model, report = train(mlp_init(seed=5), dataset, TrainConfig(epochs=SESSION_EPOCHS, seed=7, patience=100))
    return {"model": model, "report": report, "dataset": dataset, "ref": ref, "pairs": pairs}


@pytest.fixture
def straight_geometry():
    return FoilGeometry(chord_length=200.0)


TINY_CONFIG = """\
[run]
seed = 17
[protocol]
baseline = 10
cycles = 2
[train]
epochs = 30
[control]
cycles = 2
step_trials = 2
"""


@pytest.fixture(scope="session")
def tiny_config(tmp_path_factory):
    path = tmp_path_factory.mktemp("cfg") / "tiny.ini"
    path.write_text(TINY_CONFIG)
    return path


@pytest.fixture(scope="session")
def tiny_run(tiny_config, tmp_path_factory):
    """One complete small pipeline through the CLI ``report`` command."""
    from foilskin.harness.cli import main

    out = tmp_path_factory.mktemp("tiny") / "out"
    assert main(["report", "--config", str(tiny_config), "--out", str(out), "-q"]) == 0
    return out
