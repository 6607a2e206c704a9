"""Functional forward operations: convolution, pooling, dense layers,
activations, and L1/L2 normalization.

Single-sample signatures follow the library contract (inputs shaped
``C x H x W`` or ``(n,)``); the batched variants used by the layer classes
share the same code paths so both are exercised by the same oracles.
"""

from __future__ import annotations

import numpy as np

# Guard added to the norm denominator so normalizing a zero vector is a
# total operation instead of an error.
EPS_NORM = 1e-8

ACTIVATIONS = ("linear", "relu", "tanh", "scaled_tanh")


def _as_f64(x) -> np.ndarray:
    return np.asarray(x, dtype=np.float64)


def conv2d_batch(x: np.ndarray, kernels: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Valid cross-correlation of a batch: (N,C_in,H,W) -> (N,C_out,H-K+1,W-K+1)."""
    x = _as_f64(x)
    kernels = _as_f64(kernels)
    bias = _as_f64(bias)
    if x.ndim != 4 or kernels.ndim != 4 or bias.ndim != 1:
        raise ValueError(
            f"conv2d expects input (N,C,H,W), kernels (O,C,K,K), bias (O,); "
            f"got {x.shape}, {kernels.shape}, {bias.shape}"
        )
    n, c_in, h, w = x.shape
    c_out, kc_in, kh, kw = kernels.shape
    if kc_in != c_in:
        raise ValueError(
            f"kernel input channels {kc_in} do not match input channels {c_in}"
        )
    if kh != kw:
        raise ValueError(f"only square kernels supported, got {kh}x{kw}")
    if kh > h or kw > w:
        raise ValueError(
            f"kernel {kh}x{kw} larger than input {h}x{w} (valid convolution)"
        )
    if bias.shape[0] != c_out:
        raise ValueError(f"bias length {bias.shape[0]} != output channels {c_out}")
    windows = np.lib.stride_tricks.sliding_window_view(x, (kh, kw), axis=(2, 3))
    out = np.einsum("nchwij,ocij->nohw", windows, kernels, optimize=True)
    return out + bias[None, :, None, None]


def conv2d_forward(x: np.ndarray, kernels: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Valid (no padding, stride 1) cross-correlation plus per-channel bias.

    Parameters
    ----------
    x : array, shape (C_in, H, W)
    kernels : array, shape (C_out, C_in, K, K)
    bias : array, shape (C_out,)

    Returns
    -------
    array, shape (C_out, H-K+1, W-K+1)
    """
    x = _as_f64(x)
    if x.ndim != 3:
        raise ValueError(f"expected input shaped (C,H,W), got {x.shape}")
    return conv2d_batch(x[None], kernels, bias)[0]


def maxpool2d_batch(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """2x2 stride-2 max pool of (N,C,H,W); returns (pooled, argmax in {0..3})."""
    x = _as_f64(x)
    if x.ndim != 4:
        raise ValueError(f"expected input shaped (N,C,H,W), got {x.shape}")
    n, c, h, w = x.shape
    if h % 2 or w % 2:
        raise ValueError(f"pooling needs even extents, got {h}x{w}")
    tiles = x.reshape(n, c, h // 2, 2, w // 2, 2).transpose(0, 1, 2, 4, 3, 5)
    flat = tiles.reshape(n, c, h // 2, w // 2, 4)
    idx = flat.argmax(axis=-1)
    out = np.take_along_axis(flat, idx[..., None], axis=-1)[..., 0]
    return out, idx


def maxpool2d(x: np.ndarray, window: int = 2) -> tuple[np.ndarray, np.ndarray]:
    """Max pool a (C,H,W) tensor with a 2x2 window, stride 2.

    Returns the pooled tensor and the within-window argmax indices
    (values 0..3, row-major inside each window) needed by the backward pass.
    Ties go to the first position, which keeps replay exact.
    """
    if window != 2:
        raise ValueError(f"only window=2 is supported, got {window}")
    x = _as_f64(x)
    if x.ndim != 3:
        raise ValueError(f"expected input shaped (C,H,W), got {x.shape}")
    out, idx = maxpool2d_batch(x[None])
    return out[0], idx[0]


def apply_activation(z: np.ndarray, activation: str, scale: float = 1.0) -> np.ndarray:
    """Apply one of {linear, relu, tanh, scaled_tanh}; scaled_tanh(s) = s*tanh."""
    if activation == "linear":
        return z
    if activation == "relu":
        return np.maximum(z, 0.0)
    if activation == "tanh":
        return np.tanh(z)
    if activation == "scaled_tanh":
        return scale * np.tanh(z)
    raise ValueError(f"unknown activation {activation!r}; expected one of {ACTIVATIONS}")


def dense_forward(
    x: np.ndarray,
    weights: np.ndarray,
    bias: np.ndarray,
    activation: str = "linear",
    scale: float = 1.0,
) -> np.ndarray:
    """activation(W @ x + b) for a single input vector.

    ``weights`` is (m, n), ``x`` is (n,), ``bias`` is (m,).
    """
    x = _as_f64(x)
    weights = _as_f64(weights)
    bias = _as_f64(bias)
    if x.ndim != 1 or weights.ndim != 2 or bias.ndim != 1:
        raise ValueError(
            f"dense expects x (n,), weights (m,n), bias (m,); "
            f"got {x.shape}, {weights.shape}, {bias.shape}"
        )
    m, n = weights.shape
    if x.shape[0] != n or bias.shape[0] != m:
        raise ValueError(
            f"dimension mismatch: weights {weights.shape}, x {x.shape}, bias {bias.shape}"
        )
    return apply_activation(weights @ x + bias, activation, scale)


def l1_normalize(v: np.ndarray) -> np.ndarray:
    """v / (||v||_1 + eps); total on zero input thanks to the eps guard."""
    v = _as_f64(v)
    return v / (np.abs(v).sum() + EPS_NORM)


def l2_normalize(v: np.ndarray) -> np.ndarray:
    """v / (||v||_2 + eps); total on zero input thanks to the eps guard."""
    v = _as_f64(v)
    return v / (np.sqrt((v * v).sum()) + EPS_NORM)
