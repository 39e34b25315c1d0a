"""Desk-scale conditional GAN for scanpath generation."""

from .losses import loss_discriminator, loss_generator
from .network import (
    coordconv_concat,
    discriminator_forward,
    feature_extract,
    generator_forward,
)
from .params import (
    EquirectImage,
    ParameterStore,
    TrainConfig,
    init_params,
    load_params,
    save_params,
)
from .synthetic import make_blob_dataset, make_blob_image
from .train import (
    EpochLog,
    TrainingDivergedError,
    augment_longitudinal_shift,
    discriminator_loss_and_grads,
    generate,
    generator_loss_and_grads,
    longitudinal_shift,
    train,
    validation_soft_dtw,
)

__all__ = [
    "EquirectImage",
    "ParameterStore",
    "TrainConfig",
    "EpochLog",
    "TrainingDivergedError",
    "init_params",
    "save_params",
    "load_params",
    "coordconv_concat",
    "feature_extract",
    "generator_forward",
    "discriminator_forward",
    "loss_generator",
    "loss_discriminator",
    "augment_longitudinal_shift",
    "longitudinal_shift",
    "train",
    "generate",
    "generator_loss_and_grads",
    "discriminator_loss_and_grads",
    "validation_soft_dtw",
    "make_blob_dataset",
    "make_blob_image",
]
