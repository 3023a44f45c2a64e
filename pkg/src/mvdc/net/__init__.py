from .config import TrainConfig
from .model import CompletionGenerator, PatchDiscriminator, ShapeMemory, view_pool
from .losses import (
    discriminator_loss,
    generator_adversarial_loss,
    loss_cgan,
    pixel_loss,
    total_objective,
)
from .adam import Adam
from .train import TrainExample, TrainState, build_train_state, run_training, train_step
from .inference import complete_shape
from .checkpoint import load_checkpoint, restore_train_state, save_checkpoint
from .encoding import depth_to_net, net_to_depth

__all__ = [
    "Adam",
    "CompletionGenerator",
    "PatchDiscriminator",
    "ShapeMemory",
    "TrainConfig",
    "TrainExample",
    "TrainState",
    "build_train_state",
    "complete_shape",
    "depth_to_net",
    "discriminator_loss",
    "generator_adversarial_loss",
    "load_checkpoint",
    "loss_cgan",
    "net_to_depth",
    "pixel_loss",
    "restore_train_state",
    "run_training",
    "save_checkpoint",
    "total_objective",
    "train_step",
    "view_pool",
]
