"""Layer classes with cached forward passes and exact reverse-mode backward
passes, plus the plain-SGD parameter update.

All layers are batch-first: images are (N, C, H, W), vectors are (N, n).
A layer owns its parameters (`params`) and, after `backward`, its parameter
gradients (`grads`) with identical shapes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from xtamer.nn.ops import EPS_NORM, conv2d_batch, maxpool2d_batch


class NonFiniteGradientError(ValueError):
    """Raised when an SGD step is refused because a gradient is NaN/Inf."""


class Layer:
    """Base class; stateless layers only implement forward/backward."""

    params: tuple[np.ndarray, ...] = ()
    grads: tuple[np.ndarray, ...] = ()

    def forward(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def backward(self, g: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class Conv2D(Layer):
    """Valid cross-correlation, stride 1, square kernels.

    With `train_bias=False` the bias array still exists (and stays zero unless
    set externally) but is excluded from `params`/`grads`, so optimizer steps
    never touch it.  Downstream activation normalization pins the input scale
    of later convolutions far below 1, which makes bias gradients orders of
    magnitude larger than kernel gradients; freezing the bias keeps a single
    global learning rate workable.

    With `center_kernels=True` the layer correlates with mean-subtracted
    filters (each filter's entries sum to zero), and the kernel gradient is
    projected accordingly, so training preserves the constraint.  A centered
    filter responds only to local contrast.  This exists because the inputs
    here are non-negative (pixels, or relu output): an unconstrained filter
    whose mean drifts negative responds negatively everywhere, the relu then
    silences it permanently, and whole networks can collapse that way.

    `init_scale` multiplies the Glorot draw.  Activation normalization right
    after a conv block makes that block's output scale irrelevant downstream,
    but SGD's effective rotation rate of the kernels falls as the square of
    their scale, so init_scale acts as a per-layer learning-rate equalizer.
    """

    def __init__(self, in_channels: int, out_channels: int, kernel_size: int,
                 rng: np.random.Generator | None = None, train_bias: bool = True,
                 center_kernels: bool = False, init_scale: float = 1.0):
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = kernel_size
        self.train_bias = train_bias
        self.center_kernels = center_kernels
        k = kernel_size
        if rng is None:
            kernels = np.zeros((out_channels, in_channels, k, k))
        else:
            fan_in = in_channels * k * k
            fan_out = out_channels * k * k
            limit = init_scale * np.sqrt(6.0 / (fan_in + fan_out))
            kernels = rng.uniform(-limit, limit, size=(out_channels, in_channels, k, k))
            # Center each filter at init even when center_kernels is off:
            # downstream whole-tensor normalization makes any common (DC)
            # response a shared feature direction, which at init would leave
            # features of different inputs nearly parallel.
            kernels -= kernels.mean(axis=(1, 2, 3), keepdims=True)
        self.kernels = kernels
        self.bias = np.zeros(out_channels)
        self._x = None

    @property
    def params(self):
        if self.train_bias:
            return (self.kernels, self.bias)
        return (self.kernels,)

    def _effective_kernels(self) -> np.ndarray:
        if self.center_kernels:
            return self.kernels - self.kernels.mean(axis=(1, 2, 3), keepdims=True)
        return self.kernels

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._x = np.asarray(x, dtype=np.float64)
        return conv2d_batch(self._x, self._effective_kernels(), self.bias)

    def backward(self, g: np.ndarray) -> np.ndarray:
        x = self._x
        k = self.kernel_size
        windows = np.lib.stride_tricks.sliding_window_view(x, (k, k), axis=(2, 3))
        d_kernels = np.einsum("nohw,nchwij->ocij", g, windows, optimize=True)
        if self.center_kernels:
            # Centering is a linear projection of the kernels; its transpose
            # (the same projection) maps the effective-kernel gradient back.
            d_kernels -= d_kernels.mean(axis=(1, 2, 3), keepdims=True)
        d_bias = g.sum(axis=(0, 2, 3))
        # Input gradient = full correlation of the upstream gradient with the
        # 180-degree-rotated kernels.
        pad = k - 1
        g_pad = np.pad(g, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
        g_win = np.lib.stride_tricks.sliding_window_view(g_pad, (k, k), axis=(2, 3))
        flipped = self._effective_kernels()[:, :, ::-1, ::-1]
        d_x = np.einsum("nohwij,ocij->nchw", g_win, flipped, optimize=True)
        self.grads = (d_kernels, d_bias) if self.train_bias else (d_kernels,)
        return d_x


class MaxPool2(Layer):
    """2x2 window, stride 2; remembers argmax positions for the backward pass."""

    def __init__(self):
        self._idx = None
        self._shape = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        out, idx = maxpool2d_batch(x)
        self._idx = idx
        self._shape = x.shape
        return out

    def backward(self, g: np.ndarray) -> np.ndarray:
        n, c, h, w = self._shape
        scattered = np.zeros((n, c, h // 2, w // 2, 4))
        np.put_along_axis(scattered, self._idx[..., None], g[..., None], axis=-1)
        tiles = scattered.reshape(n, c, h // 2, w // 2, 2, 2)
        return tiles.transpose(0, 1, 2, 4, 3, 5).reshape(n, c, h, w)


class Relu(Layer):
    def __init__(self):
        self._mask = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._mask = x > 0
        return np.where(self._mask, x, 0.0)

    def backward(self, g: np.ndarray) -> np.ndarray:
        return np.where(self._mask, g, 0.0)


class Tanh(Layer):
    def __init__(self):
        self._y = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._y = np.tanh(x)
        return self._y

    def backward(self, g: np.ndarray) -> np.ndarray:
        return g * (1.0 - self._y * self._y)


class Shift(Layer):
    """Adds a fixed per-feature offset; the offset is not a trained parameter.

    Placed after an activation, a negative mean-activation offset centers the
    features seen by the next affine layer. Centering matters for online
    regression: activations with a shared nonzero mean give every pair of
    inputs positively correlated features, so each SGD step systematically
    drags the predictions of all unrelated inputs toward the current target.
    Centered features make that cross-talk zero-mean.
    """

    def __init__(self, offset: np.ndarray):
        self.offset = np.asarray(offset, dtype=np.float64)

    def forward(self, x: np.ndarray) -> np.ndarray:
        return x + self.offset

    def backward(self, g: np.ndarray) -> np.ndarray:
        return g


class ScaledTanh(Layer):
    """y = scale * tanh(x); output is confined to (-scale, scale)."""

    def __init__(self, scale: float):
        self.scale = float(scale)
        self._t = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._t = np.tanh(x)
        return self.scale * self._t

    def backward(self, g: np.ndarray) -> np.ndarray:
        return g * self.scale * (1.0 - self._t * self._t)


class L1Norm(Layer):
    """Per-sample x / (||x||_1 + eps), treating the sample as one flat vector."""

    def __init__(self):
        self._x = None
        self._s = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._x = np.asarray(x, dtype=np.float64)
        flat = self._x.reshape(x.shape[0], -1)
        self._s = np.abs(flat).sum(axis=1) + EPS_NORM
        return self._x / self._s.reshape((-1,) + (1,) * (x.ndim - 1))

    def backward(self, g: np.ndarray) -> np.ndarray:
        n = g.shape[0]
        gf = g.reshape(n, -1)
        xf = self._x.reshape(n, -1)
        s = self._s[:, None]
        dot = (gf * xf).sum(axis=1, keepdims=True)
        gin = gf / s - np.sign(xf) * dot / (s * s)
        return gin.reshape(self._x.shape)


class L2Norm(Layer):
    """Per-sample x / (||x||_2 + eps), treating the sample as one flat vector."""

    def __init__(self):
        self._x = None
        self._norm = None
        self._s = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._x = np.asarray(x, dtype=np.float64)
        flat = self._x.reshape(x.shape[0], -1)
        self._norm = np.sqrt((flat * flat).sum(axis=1))
        self._s = self._norm + EPS_NORM
        return self._x / self._s.reshape((-1,) + (1,) * (x.ndim - 1))

    def backward(self, g: np.ndarray) -> np.ndarray:
        n = g.shape[0]
        gf = g.reshape(n, -1)
        xf = self._x.reshape(n, -1)
        s = self._s[:, None]
        dot = (gf * xf).sum(axis=1, keepdims=True)
        # Second term vanishes for a zero sample (x == 0), so guard the norm.
        norm = np.where(self._norm > 0.0, self._norm, 1.0)[:, None]
        gin = gf / s - xf * dot / (s * s * norm)
        return gin.reshape(self._x.shape)


class Flatten(Layer):
    def __init__(self):
        self._shape = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, g: np.ndarray) -> np.ndarray:
        return g.reshape(self._shape)


class Dense(Layer):
    """Affine map x @ W.T + b for batched vectors (N, n) -> (N, m).

    With `train_bias=False` the bias array still exists (and is saved and
    restored by checkpoints) but is excluded from `params`/`grads`, so
    optimizer steps never touch it.  A frozen bias can then serve as a fixed
    prior for inputs the training data never covers: trained weights adjust
    predictions near visited inputs while the resting output level stays put
    instead of drifting toward the mean regression target.
    """

    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator | None = None,
                 train_bias: bool = True):
        self.n_in = n_in
        self.n_out = n_out
        self.train_bias = train_bias
        if rng is None:
            weights = np.zeros((n_out, n_in))
        else:
            limit = np.sqrt(6.0 / (n_in + n_out))
            weights = rng.uniform(-limit, limit, size=(n_out, n_in))
        self.weights = weights
        self.bias = np.zeros(n_out)
        self._x = None

    @property
    def params(self):
        if self.train_bias:
            return (self.weights, self.bias)
        return (self.weights,)

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.n_in:
            raise ValueError(f"expected input (N,{self.n_in}), got {x.shape}")
        self._x = x
        return x @ self.weights.T + self.bias

    def backward(self, g: np.ndarray) -> np.ndarray:
        d_w = g.T @ self._x
        self.grads = (d_w, g.sum(axis=0)) if self.train_bias else (d_w,)
        return g @ self.weights


@dataclass
class LayerGrads:
    """Gradients from one backward pass: per-layer parameter gradients
    (shapes mirror each layer's parameters) plus the network input gradient."""

    param_grads: list[tuple[np.ndarray, ...]]
    input_grad: np.ndarray


class Sequential:
    """A plain layer stack with cached forward state for exact backprop."""

    def __init__(self, layers: list[Layer]):
        self.layers = list(layers)
        self._forwarded = False

    def forward(self, x: np.ndarray) -> np.ndarray:
        for layer in self.layers:
            x = layer.forward(x)
        self._forwarded = True
        return x

    def backward(self, upstream: np.ndarray) -> LayerGrads:
        if not self._forwarded:
            raise RuntimeError("backward called before forward")
        g = upstream
        for layer in reversed(self.layers):
            g = layer.backward(g)
        return LayerGrads(param_grads=[layer.grads for layer in self.layers],
                          input_grad=g)

    def parameters(self) -> list[np.ndarray]:
        out: list[np.ndarray] = []
        for layer in self.layers:
            out.extend(layer.params)
        return out

    def gradients(self) -> list[np.ndarray]:
        out: list[np.ndarray] = []
        for layer in self.layers:
            out.extend(layer.grads)
        return out


class SoftmaxCrossEntropy:
    """Softmax head with mean cross-entropy loss over a batch."""

    def __init__(self):
        self._probs = None
        self._labels = None

    def forward(self, logits: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
        z = logits - logits.max(axis=1, keepdims=True)
        e = np.exp(z)
        self._probs = e / e.sum(axis=1, keepdims=True)
        self._labels = np.asarray(labels, dtype=np.intp)
        picked = self._probs[np.arange(len(self._labels)), self._labels]
        loss = float(-np.log(picked + 1e-300).mean())
        return loss, self._probs

    def backward(self) -> np.ndarray:
        n = len(self._labels)
        g = self._probs.copy()
        g[np.arange(n), self._labels] -= 1.0
        return g / n


def sgd_step(params: list[np.ndarray], grads: list[np.ndarray],
             learning_rate: float) -> list[np.ndarray]:
    """In-place plain-SGD update p <- p - lr * g.

    The step is refused (nothing is mutated) if any gradient holds a
    non-finite value, or if the learning rate is negative or non-finite.
    """
    if not np.isfinite(learning_rate) or learning_rate < 0.0:
        raise ValueError(f"learning rate must be finite and >= 0, got {learning_rate}")
    if len(params) != len(grads):
        raise ValueError(f"{len(params)} parameter arrays but {len(grads)} gradients")
    for p, g in zip(params, grads):
        if p.shape != g.shape:
            raise ValueError(f"gradient shape {g.shape} != parameter shape {p.shape}")
        if not np.isfinite(g).all():
            raise NonFiniteGradientError("refusing step: non-finite gradient")
    for p, g in zip(params, grads):
        p -= learning_rate * g
    return params
