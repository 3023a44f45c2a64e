import time

import numpy as np
import pytest
import torch

from mvdc import dataset as ds
from mvdc import geometry as geo
from mvdc.metrics import avg_l1
from mvdc.net import TrainConfig, build_train_state, complete_shape, run_training
from mvdc.net.train import examples_from_sample

from helpers import sphere_cloud

torch.set_num_threads(1)


@pytest.fixture(scope="session")
def toy_overfit():
    """One-shape overfit at 32 px, shared by the training-dependent criteria.

    Returns the trained state plus the sample, rig, step-0 and final per-view
    avg L1, and the wall-clock training time.
    """
    rig = geo.build_rig(resolution=32)
    cloud = sphere_cloud(20000, seed=42)
    normalized, _ = geo.normalize_shape(cloud)
    sample = ds.make_sample(cloud, rig, "toy", seed=7)
    examples = examples_from_sample(sample, rig.near, rig.far)
    config = TrainConfig(
        resolution=32,
        levels=5,
        channels=(16, 32, 64, 128, 128),
        batch_size=8,
        steps=500,
        lam=1.0,
        seed=0,
        memory_reset="never",
    )
    state = build_train_state(config)

    def per_view_avg_l1():
        completed = complete_shape(state, sample.partial_maps, rig)
        return float(
            np.mean(
                [avg_l1(c, t, rig.near, rig.far) for c, t in zip(completed, sample.truth_maps)]
            )
        )

    base = per_view_avg_l1()
    start = time.monotonic()
    run_training(state, examples)
    train_seconds = time.monotonic() - start
    final = per_view_avg_l1()
    return {
        "state": state,
        "sample": sample,
        "rig": rig,
        "normalized_cloud": normalized,
        "base_avg_l1": base,
        "final_avg_l1": final,
        "train_seconds": train_seconds,
    }
