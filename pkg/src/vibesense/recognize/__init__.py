"""Activity recognition: dilated-causal TCN with multitask heads, and a
from-scratch t-SNE for feature-space analysis."""

from .tcn import (
    ModelWeights,
    TCNConfig,
    TrainConfig,
    TrainingDiverged,
    classify_latent,
    init_weights,
    layer_activations,
    load_weights,
    loss_and_grads,
    save_weights,
    tcn_forward,
    train,
)
from .tsne import TSNEConfig, TSNEResult, conditional_probabilities, tsne

__all__ = [
    "ModelWeights",
    "TCNConfig",
    "TrainConfig",
    "TrainingDiverged",
    "classify_latent",
    "init_weights",
    "layer_activations",
    "load_weights",
    "loss_and_grads",
    "save_weights",
    "tcn_forward",
    "train",
    "TSNEConfig",
    "TSNEResult",
    "conditional_probabilities",
    "tsne",
]
