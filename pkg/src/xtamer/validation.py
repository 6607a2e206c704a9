"""Small input-check helpers shared by the estimators."""

from __future__ import annotations

import numpy as np

IMAGE_SIZE = 64


def as_rng(seed) -> np.random.Generator:
    """Coerce an int seed, SeedSequence, or Generator to a Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def check_image(image) -> np.ndarray:
    """Validate one 64x64 grayscale image with values in [0, 1]."""
    arr = np.asarray(image, dtype=np.float64)
    if arr.shape != (IMAGE_SIZE, IMAGE_SIZE):
        raise ValueError(f"expected a {IMAGE_SIZE}x{IMAGE_SIZE} image, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValueError("image contains non-finite values")
    lo, hi = float(arr.min()), float(arr.max())
    if lo < 0.0 or hi > 1.0:
        raise ValueError(f"image values must lie in [0, 1], got range [{lo}, {hi}]")
    return arr


def check_images(images) -> np.ndarray:
    """Validate a batch of images; accepts (n,64,64), (64,64), or (n,4096)."""
    arr = np.asarray(images, dtype=np.float64)
    if arr.ndim == 2 and arr.shape == (IMAGE_SIZE, IMAGE_SIZE):
        arr = arr[None]
    elif arr.ndim == 2 and arr.shape[1] == IMAGE_SIZE * IMAGE_SIZE:
        arr = arr.reshape(-1, IMAGE_SIZE, IMAGE_SIZE)
    if arr.ndim != 3 or arr.shape[1:] != (IMAGE_SIZE, IMAGE_SIZE):
        raise ValueError(
            f"expected images shaped (n,{IMAGE_SIZE},{IMAGE_SIZE}), got {np.shape(images)}"
        )
    if not np.isfinite(arr).all():
        raise ValueError("images contain non-finite values")
    if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
        raise ValueError("image values must lie in [0, 1]")
    return arr


def check_matrix(X, n_features: int | None = None, name: str = "X") -> np.ndarray:
    """Validate a finite 2-D float matrix, optionally with a fixed column count."""
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None]
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {np.shape(X)}")
    if n_features is not None and arr.shape[1] != n_features:
        raise ValueError(f"{name} must have {n_features} columns, got {arr.shape[1]}")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_vector(v, n: int | None = None, name: str = "v") -> np.ndarray:
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {np.shape(v)}")
    if n is not None and arr.shape[0] != n:
        raise ValueError(f"{name} must have length {n}, got {arr.shape[0]}")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} contains non-finite values")
    return arr
