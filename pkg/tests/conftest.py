import numpy as np
import pytest

from featad.config import RunConfig
from featad.manifest import load_manifest
from featad.synthbench import SynthSpec, generate


@pytest.fixture(scope="session")
def small_dataset(tmp_path_factory):
    """Small but learnable synthetic dataset shared across tests."""
    root = tmp_path_factory.mktemp("smallset")
    spec = SynthSpec(
        height=12, width=12, channels=24, train_count=16,
        test_normal_count=8, test_anomalous_count=8, patch_size=4,
        noise_std=1.2, offset=2.5, seed=123,
    )
    train_path, test_path = generate(spec, str(root))
    return {
        "spec": spec,
        "train": load_manifest(train_path),
        "test": load_manifest(test_path, require_masks=True),
        "root": root,
    }


@pytest.fixture(scope="session")
def small_config():
    return RunConfig(
        levels=[2], epochs=60, batch_size=4, lr_discriminator=2e-3,
        delta=1e-4, smoothing_sigma=1.0, seed=123,
    )


@pytest.fixture(scope="session")
def small_model(small_dataset, small_config):
    from featad.train import train

    return train(small_dataset["train"], small_config)


def random_toy_setup(seed, batch=3, h=2, w=2, c=8):
    """Projector/discriminator/center/batch tuple on toy dimensions."""
    from featad.center import Projector, init_center
    from featad.discriminator import Discriminator

    rng = np.random.default_rng(seed)
    feats = rng.normal(size=(batch, h, w, c))
    projector = Projector.init_normal(c, rng)
    center = init_center([feats], projector, 0.1)
    projector.unfreeze()
    disc = Discriminator.init_normal(c, rng)
    return projector, disc, center, rng.normal(size=(batch, h, w, c))
