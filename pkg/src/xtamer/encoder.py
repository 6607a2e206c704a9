"""Pre-trained perception network turning face images into feature vectors.

Architecture: conv(8 kernels, 5x5) -> relu -> 2x2 maxpool -> L1-normalize,
conv(16, 5x5) -> relu -> 2x2 maxpool -> L2-normalize -> flatten. A 64x64
input comes out as a 2704-dim vector (16 channels of 13x13) with unit L2
norm. A softmax head over the 7 emotions is attached only for pretraining;
the deployed pipeline consumes the features.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from xtamer import checkpoint as ckpt
from xtamer.faces import N_EMOTIONS
from xtamer.nn import (
    EPS_NORM,
    Conv2D,
    Dense,
    Flatten,
    L1Norm,
    L2Norm,
    MaxPool2,
    Relu,
    Sequential,
    SoftmaxCrossEntropy,
    conv2d_batch,
    maxpool2d_batch,
    sgd_step,
)
from xtamer.validation import as_rng, check_images

FEATURE_DIM = 16 * 13 * 13  # 64 -conv5-> 60 -pool-> 30 -conv5-> 26 -pool-> 13


class CnnEncoder(ClassifierMixin, TransformerMixin, BaseEstimator):
    """CNN feature extractor with a detachable softmax pretraining head.

    Parameters
    ----------
    epochs : int, default=20
        Pretraining passes over the data. Zero is allowed and leaves the
        randomly initialized network as-is (chance-level classifier).
    learning_rate : float, default=1.5
        Plain-SGD step size. The normalization layers keep gradients tiny,
        so useful rates are far above textbook values; on the standard
        1001-image set anything in roughly 0.75..4.0 trains cleanly.
    batch_size : int, default=32
    seed : int, default=0
        Seeds initialization and the per-epoch shuffle.
    """

    def __init__(self, epochs=20, learning_rate=1.5, batch_size=32, seed=0):
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.seed = seed

    def _build(self, rng) -> None:
        # Conv biases are frozen at zero: the whole-tensor normalizations pin
        # activation scales so low that bias gradients dwarf kernel gradients,
        # and a shared learning rate would let bias updates drown the signal.
        # Kernels are mean-centered (contrast filters): both conv layers see
        # non-negative input, where a filter whose mean drifts negative goes
        # silent under the relu for good.  conv1's init_scale slows its
        # rotation rate to match the deeper layers (see Conv2D).
        self.net_ = Sequential([
            Conv2D(1, 8, 5, rng, train_bias=False, center_kernels=True,
                   init_scale=3.0),
            Relu(), MaxPool2(), L1Norm(),
            Conv2D(8, 16, 5, rng, train_bias=False, center_kernels=True),
            Relu(), MaxPool2(), L2Norm(),
            Flatten(),
        ])
        self.head_ = Dense(FEATURE_DIM, N_EMOTIONS, rng)

    def fit(self, X, y):
        """Pretrain on labeled images; requires every emotion class present."""
        X = check_images(X)
        y = np.asarray(y, dtype=np.int64)
        if y.shape != (X.shape[0],):
            raise ValueError(f"y must have shape ({X.shape[0]},), got {y.shape}")
        missing = sorted(set(range(N_EMOTIONS)) - set(int(v) for v in y))
        if missing:
            raise ValueError(f"dataset is missing emotion classes {missing}; "
                             "the softmax head would be degenerate")
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        if not np.isfinite(self.learning_rate) or self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")

        rng = as_rng(self.seed)
        self._build(rng)
        self.classes_ = np.arange(N_EMOTIONS)
        loss_fn = SoftmaxCrossEntropy()
        params = self.net_.parameters() + list(self.head_.params)
        self.history_ = []

        for epoch in range(self.epochs):
            order = rng.permutation(X.shape[0])
            losses, hits, seen = [], 0, 0
            for start in range(0, X.shape[0], self.batch_size):
                idx = order[start:start + self.batch_size]
                xb = X[idx][:, None, :, :]
                yb = y[idx]
                feats = self.net_.forward(xb)
                logits = self.head_.forward(feats)
                loss, probs = loss_fn.forward(logits, yb)
                g = self.head_.backward(loss_fn.backward())
                self.net_.backward(g)
                grads = self.net_.gradients() + list(self.head_.grads)
                sgd_step(params, grads, self.learning_rate)
                losses.append(loss * len(idx))
                hits += int((probs.argmax(axis=1) == yb).sum())
                seen += len(idx)
            self.history_.append({
                "epoch": epoch + 1,
                "loss": float(np.sum(losses) / seen),
                "accuracy": hits / seen,
            })
        self._calibrate_scale(X)
        return self

    def _calibrate_scale(self, X) -> None:
        # Post-fit conditioning. The conv stack is positively homogeneous
        # (bias-free convs, relu, maxpool), so rescaling conv2's kernels
        # moves the pre-normalization magnitude without changing the
        # normalized features beyond the epsilon guard. Aiming that
        # magnitude at ~1 keeps the guard's eps/||v_pre|| shortfall orders
        # of magnitude inside the unit-norm contract, wherever training
        # dynamics happen to leave the raw activation scale.
        conv2 = self.net_.layers[4]
        norms = [
            np.linalg.norm(self._forward_prenorm(X[i:i + 64]), axis=1)
            for i in range(0, X.shape[0], 64)
        ]
        mean_norm = float(np.mean(np.concatenate(norms)))
        if mean_norm > 0.0:
            conv2.kernels /= mean_norm

    # -- inference --------------------------------------------------------
    # The layer stack caches activations for backprop, so inference uses a
    # stateless path over the same weights: safe to call concurrently on a
    # shared trained model, and bit-identical to the training-time forward.

    def _forward_prenorm(self, images: np.ndarray) -> np.ndarray:
        x = images[:, None, :, :].astype(np.float64)
        conv1, conv2 = self.net_.layers[0], self.net_.layers[4]
        x = conv2d_batch(x, conv1._effective_kernels(), conv1.bias)
        x = np.where(x > 0, x, 0.0)
        x, _ = maxpool2d_batch(x)
        flat = x.reshape(x.shape[0], -1)
        x = x / (np.abs(flat).sum(axis=1) + EPS_NORM).reshape(-1, 1, 1, 1)
        x = conv2d_batch(x, conv2._effective_kernels(), conv2.bias)
        x = np.where(x > 0, x, 0.0)
        x, _ = maxpool2d_batch(x)
        return x.reshape(x.shape[0], -1)

    def _forward_features(self, images: np.ndarray) -> np.ndarray:
        flat = self._forward_prenorm(images)
        norm = np.sqrt((flat * flat).sum(axis=1)) + EPS_NORM
        return flat / norm[:, None]

    def transform(self, X) -> np.ndarray:
        """Feature vectors for a batch of images, shape (n, 2704)."""
        check_is_fitted(self, "net_")
        X = check_images(X)
        chunks = [self._forward_features(X[i:i + 64]) for i in range(0, X.shape[0], 64)]
        return np.concatenate(chunks)

    def features(self, image) -> np.ndarray:
        """Feature vector of a single 64x64 image, shape (2704,)."""
        return self.transform(image)[0]

    def predict_proba(self, X) -> np.ndarray:
        check_is_fitted(self, "net_")
        X = check_images(X)
        logits = self.transform(X) @ self.head_.weights.T + self.head_.bias
        z = logits - logits.max(axis=1, keepdims=True)
        e = np.exp(z)
        return e / e.sum(axis=1, keepdims=True)

    def predict(self, X) -> np.ndarray:
        return self.predict_proba(X).argmax(axis=1)

    # -- persistence ------------------------------------------------------

    def to_section(self) -> ckpt.Section:
        check_is_fitted(self, "net_")
        conv1, conv2 = self.net_.layers[0], self.net_.layers[4]
        arrays = {
            "conv1_kernels": conv1.kernels, "conv1_bias": conv1.bias,
            "conv2_kernels": conv2.kernels, "conv2_bias": conv2.bias,
            "head_weights": self.head_.weights, "head_bias": self.head_.bias,
        }
        meta = {
            "epochs": self.epochs, "learning_rate": self.learning_rate,
            "batch_size": self.batch_size, "seed": self.seed,
            "history": self.history_, "feature_dim": FEATURE_DIM,
        }
        return ckpt.Section("cnn", arrays, meta)

    @classmethod
    def from_section(cls, section: ckpt.Section) -> "CnnEncoder":
        m = section.meta
        model = cls(epochs=m["epochs"], learning_rate=m["learning_rate"],
                    batch_size=m["batch_size"], seed=m["seed"])
        model._build(rng=None)
        conv1, conv2 = model.net_.layers[0], model.net_.layers[4]
        a = section.arrays
        for target, key in ((conv1.kernels, "conv1_kernels"), (conv1.bias, "conv1_bias"),
                            (conv2.kernels, "conv2_kernels"), (conv2.bias, "conv2_bias"),
                            (model.head_.weights, "head_weights"),
                            (model.head_.bias, "head_bias")):
            if a[key].shape != target.shape:
                raise ckpt.CheckpointError(
                    "format", f"array {key!r} has shape {a[key].shape}, "
                              f"expected {target.shape}")
            target[...] = a[key]
        model.classes_ = np.arange(N_EMOTIONS)
        model.history_ = list(m.get("history", []))
        return model

    def save(self, path) -> None:
        ckpt.write_checkpoint(path, [self.to_section()])

    @classmethod
    def load(cls, path) -> "CnnEncoder":
        return cls.from_section(ckpt.find_section(ckpt.read_checkpoint(path), "cnn"))
