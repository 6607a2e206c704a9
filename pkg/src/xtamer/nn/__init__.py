"""Minimal dense-array neural network building blocks.

Everything runs on float64 numpy arrays and is deterministic: identical
inputs give bit-identical outputs. Layers cache their forward intermediates
so that ``Sequential.backward`` can produce exact reverse-mode gradients.
"""

from xtamer.nn.ops import (
    EPS_NORM,
    apply_activation,
    conv2d_batch,
    conv2d_forward,
    dense_forward,
    l1_normalize,
    l2_normalize,
    maxpool2d,
    maxpool2d_batch,
)
from xtamer.nn.layers import (
    Conv2D,
    Dense,
    Flatten,
    L1Norm,
    L2Norm,
    LayerGrads,
    MaxPool2,
    NonFiniteGradientError,
    Relu,
    ScaledTanh,
    Sequential,
    Shift,
    SoftmaxCrossEntropy,
    Tanh,
    sgd_step,
)

__all__ = [
    "EPS_NORM",
    "apply_activation",
    "conv2d_batch",
    "conv2d_forward",
    "dense_forward",
    "l1_normalize",
    "l2_normalize",
    "maxpool2d",
    "maxpool2d_batch",
    "Conv2D",
    "Dense",
    "Flatten",
    "L1Norm",
    "L2Norm",
    "LayerGrads",
    "MaxPool2",
    "NonFiniteGradientError",
    "Relu",
    "ScaledTanh",
    "Sequential",
    "Shift",
    "SoftmaxCrossEntropy",
    "Tanh",
    "sgd_step",
]
