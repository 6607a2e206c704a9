"""Per-user self-organizing map over CNN feature vectors.

The map is the learner's state abstraction: a feature vector is reduced to
the grid position of its best-matching unit (BMU), and distances between
BMU positions (normalized by the grid diagonal) drive the mimicry reward.
Training is the classic online rule w <- w + lr(t) * h(t, d) * (x - w) with
a Gaussian neighborhood and exponentially decaying learning rate and radius.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from xtamer import checkpoint as ckpt
from xtamer.validation import as_rng, check_matrix, check_vector


@dataclass(frozen=True)
class BmuPosition:
    """Grid position of a best-matching unit, tagged with its grid shape."""

    row: int
    col: int
    rows: int = 20
    cols: int = 20

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError(f"grid shape ({self.rows}, {self.cols}) must be positive")
        if not (0 <= self.row < self.rows and 0 <= self.col < self.cols):
            raise ValueError(
                f"position ({self.row}, {self.col}) outside {self.rows}x{self.cols} grid"
            )

    @property
    def normalized(self) -> tuple[float, float]:
        """(row, col) scaled to [0, 1]^2; a 1-wide axis maps to 0."""
        return (self.row / max(self.rows - 1, 1), self.col / max(self.cols - 1, 1))


def normalized_bmu_distance(a: BmuPosition, b: BmuPosition) -> float:
    """Euclidean distance between normalized positions over the diagonal sqrt(2).

    Both positions must come from the same grid shape; the result is in [0, 1].
    """
    if (a.rows, a.cols) != (b.rows, b.cols):
        raise ValueError(
            f"positions from different grids: {a.rows}x{a.cols} vs {b.rows}x{b.cols}"
        )
    (ar, ac), (br, bc) = a.normalized, b.normalized
    return float(np.hypot(ar - br, ac - bc) / np.sqrt(2.0))


class SelfOrganizingMap(TransformerMixin, BaseEstimator):
    """Online-trained SOM with deterministic, resumable updates.

    Parameters
    ----------
    rows, cols : int, default=20
        Grid shape.
    n_iter : int, default=3000
        Training horizon; the decay schedules reach their final values at
        the last scheduled iteration. Updates past the horizon reuse the
        final learning rate and radius.
    learning_rate : float, default=0.5
        Initial learning rate; decays exponentially to learning_rate / 100.
    radius : float or None, default=None
        Initial neighborhood radius sigma(0); decays exponentially to 1.0.
        None means max(rows, cols) / 2.
    seed : int, default=0
        Seeds both prototype initialization and the sample-draw stream.
    """

    def __init__(self, rows=20, cols=20, n_iter=3000, learning_rate=0.5,
                 radius=None, seed=0):
        self.rows = rows
        self.cols = cols
        self.n_iter = n_iter
        self.learning_rate = learning_rate
        self.radius = radius
        self.seed = seed

    # -- training ---------------------------------------------------------

    def _initialize(self, n_features: int) -> None:
        if self.rows < 1 or self.cols < 1:
            raise ValueError(f"grid shape ({self.rows}, {self.cols}) must be positive")
        if self.n_iter < 1:
            raise ValueError(f"n_iter must be >= 1, got {self.n_iter}")
        if not np.isfinite(self.learning_rate) or self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        self.radius_ = float(self.radius if self.radius is not None
                             else max(self.rows, self.cols) / 2.0)
        if not np.isfinite(self.radius_) or self.radius_ <= 0:
            raise ValueError(f"radius must be > 0, got {self.radius_}")
        self.rng_ = as_rng(self.seed)
        n_units = self.rows * self.cols
        self.weights_ = np.zeros((n_units, n_features))
        self.n_features_in_ = n_features
        self.t_ = 0
        # grid coordinates per unit, row-major, for neighborhood distances
        rr, cc = np.divmod(np.arange(n_units), self.cols)
        self._grid_sq = ((rr[:, None] - rr) ** 2 + (cc[:, None] - cc) ** 2).astype(np.float64)

    def _seed_prototypes(self, X) -> None:
        # Sample initialization: prototypes start on the data manifold, so
        # the wide-neighborhood phase spends its budget ordering real
        # clusters instead of dragging random vectors toward the data mean.
        idx = self.rng_.integers(0, X.shape[0], self.rows * self.cols)
        self.weights_ = X[idx].astype(np.float64, copy=True)

    def _schedule(self, t: int) -> tuple[float, float]:
        """(learning rate, sigma) at iteration t of the n_iter horizon."""
        frac = min(t, self.n_iter - 1) / max(self.n_iter - 1, 1)
        lr = self.learning_rate * 0.01**frac
        sigma = self.radius_ * (1.0 / self.radius_) ** frac
        return lr, sigma

    def fit(self, X, y=None):
        """Initialize prototypes from X and run n_iter online updates over X."""
        X = check_matrix(X, name="X")
        if X.shape[0] == 0:
            raise ValueError("training requires at least one feature vector")
        self._initialize(X.shape[1])
        self._seed_prototypes(X)
        return self.partial_fit(X, self.n_iter)

    def partial_fit(self, X, n_updates=None):
        """Continue training for n_updates draws (default: up to the horizon).

        Resuming is exact: fitting i updates, then j more on the same data,
        leaves the same prototypes as i + j updates in one run, because the
        sample-draw stream and the iteration counter both persist.
        """
        X = check_matrix(X, name="X")
        if X.shape[0] == 0:
            raise ValueError("training requires at least one feature vector")
        if not hasattr(self, "weights_"):
            self._initialize(X.shape[1])
            self._seed_prototypes(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, map was built with {self.n_features_in_}"
            )
        if n_updates is None:
            n_updates = max(self.n_iter - self.t_, 0)
        for _ in range(int(n_updates)):
            x = X[int(self.rng_.integers(0, X.shape[0]))]
            lr, sigma = self._schedule(self.t_)
            diff = x - self.weights_
            d2 = (diff**2).sum(axis=1)
            bmu = int(np.argmin(d2))
            h = np.exp(-self._grid_sq[bmu] / (2.0 * sigma * sigma))
            self.weights_ += (lr * h)[:, None] * diff
            self.t_ += 1
        return self

    # -- queries ----------------------------------------------------------

    def best_matching_unit(self, v) -> BmuPosition:
        """Position of the unit whose prototype is nearest to v.

        Exact argmin of squared Euclidean distance; ties resolve to the
        smallest row, then smallest col (argmin's first occurrence under
        row-major unit order).
        """
        check_is_fitted(self, "weights_")
        v = check_vector(v, self.n_features_in_, name="v")
        d2 = ((self.weights_ - v) ** 2).sum(axis=1)
        idx = int(np.argmin(d2))
        return BmuPosition(idx // self.cols, idx % self.cols, self.rows, self.cols)

    def transform(self, X) -> np.ndarray:
        """Normalized BMU coordinates for each row of X, shape (n, 2)."""
        check_is_fitted(self, "weights_")
        X = check_matrix(X, name="X")
        return np.array([self.best_matching_unit(x).normalized for x in X])

    def quantization_error(self, X) -> float:
        """Mean Euclidean distance from each sample to its BMU prototype."""
        check_is_fitted(self, "weights_")
        X = check_matrix(X, name="X")
        total = 0.0
        for x in X:
            d2 = ((self.weights_ - x) ** 2).sum(axis=1)
            total += np.sqrt(d2.min())
        return float(total / X.shape[0])

    def label_map(self, X, y) -> tuple[np.ndarray, float]:
        """Majority-vote label per unit plus clustering purity.

        Every sample votes its label onto its BMU; a unit takes its most
        frequent label (ties to the smallest code). Units no sample reached
        copy the label of the nearest visited unit (grid distance, ties
        row-major). Purity is the fraction of samples whose BMU carries the
        sample's own label.
        """
        check_is_fitted(self, "weights_")
        X = check_matrix(X, name="X")
        y = np.asarray(y, dtype=np.int64)
        if y.shape != (X.shape[0],):
            raise ValueError(f"y must have shape ({X.shape[0]},), got {y.shape}")
        if X.shape[0] == 0:
            raise ValueError("label_map requires at least one sample")

        n_units = self.rows * self.cols
        n_labels = int(y.max()) + 1
        votes = np.zeros((n_units, n_labels), dtype=np.int64)
        bmu_idx = np.empty(X.shape[0], dtype=np.int64)
        for i, x in enumerate(X):
            d2 = ((self.weights_ - x) ** 2).sum(axis=1)
            u = int(np.argmin(d2))
            bmu_idx[i] = u
            votes[u, y[i]] += 1

        unit_label = votes.argmax(axis=1)  # argmax ties -> smallest label
        visited = votes.sum(axis=1) > 0
        if not visited.all():
            vidx = np.flatnonzero(visited)
            for u in np.flatnonzero(~visited):
                d = self._grid_sq[u, vidx]
                unit_label[u] = unit_label[vidx[int(np.argmin(d))]]

        purity = float(np.mean(unit_label[bmu_idx] == y))
        return unit_label.reshape(self.rows, self.cols), purity

    # -- persistence ------------------------------------------------------

    def to_section(self) -> ckpt.Section:
        check_is_fitted(self, "weights_")
        meta = {
            "rows": self.rows, "cols": self.cols, "n_iter": self.n_iter,
            "learning_rate": self.learning_rate, "radius": self.radius,
            "seed": self.seed, "radius0": self.radius_, "t": self.t_,
            "rng_state": self.rng_.bit_generator.state,
        }
        return ckpt.Section("som", {"weights": self.weights_}, meta)

    @classmethod
    def from_section(cls, section: ckpt.Section) -> "SelfOrganizingMap":
        m = section.meta
        model = cls(rows=m["rows"], cols=m["cols"], n_iter=m["n_iter"],
                    learning_rate=m["learning_rate"], radius=m["radius"],
                    seed=m["seed"])
        model._initialize(section.arrays["weights"].shape[1])
        weights = section.arrays["weights"]
        if weights.shape != model.weights_.shape:
            raise ckpt.CheckpointError(
                "format", f"weights shape {weights.shape} does not match "
                          f"{model.rows}x{model.cols} grid")
        model.weights_ = weights.copy()
        model.radius_ = float(m["radius0"])
        model.t_ = int(m["t"])
        model.rng_.bit_generator.state = m["rng_state"]
        return model

    def save(self, path) -> None:
        ckpt.write_checkpoint(path, [self.to_section()])

    @classmethod
    def load(cls, path) -> "SelfOrganizingMap":
        return cls.from_section(ckpt.find_section(ckpt.read_checkpoint(path), "som"))
