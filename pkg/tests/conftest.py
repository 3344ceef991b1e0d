import pytest

from ergowatch.config import PipelineConfig
from ergowatch.pipeline import ModelBundle
from ergowatch.stream import canonical_rigid_template, default_intrinsics
from ergowatch.training import train_gate_model, train_mouth_model, train_pose_model


@pytest.fixture(scope="session")
def template():
    return canonical_rigid_template()


@pytest.fixture(scope="session")
def intrinsics():
    return default_intrinsics()


@pytest.fixture(scope="session")
def base_config():
    return PipelineConfig()


@pytest.fixture(scope="session")
def gate_model(base_config, template):
    model, acc = train_gate_model(base_config, template, seed=7)
    assert acc > 0.99
    return model


@pytest.fixture(scope="session")
def pose_model(base_config, template):
    model, acc = train_pose_model(base_config, template, seed=7)
    assert acc > 0.9
    return model


@pytest.fixture(scope="session")
def mouth_model(base_config, template):
    model, acc = train_mouth_model(base_config, template, seed=7)
    assert acc > 0.97
    return model


@pytest.fixture(scope="session")
def models(gate_model, pose_model, mouth_model):
    return ModelBundle(gate=gate_model, pose=pose_model, mouth=mouth_model)


@pytest.fixture(scope="session")
def model_dir(tmp_path_factory, models):
    from ergowatch import mlkit

    d = tmp_path_factory.mktemp("models")
    mlkit.save_model(models.gate, d / "gate.json")
    mlkit.save_model(models.pose, d / "pose.json")
    mlkit.save_model(models.mouth, d / "mouth.json")
    return d
