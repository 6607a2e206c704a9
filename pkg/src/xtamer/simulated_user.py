"""A configurable stand-in for the human trainer.

A profile fixes who the user is (face proportions), how faithfully they
mimic the robot (mimic_accuracy plus a confusion matrix for the misses),
and how noisy their camera images are. A SimulatedUser instance then owns
one seeded rng stream, so closed-loop experiments replay exactly.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from xtamer.expressions import ExpressionAction, emotion_for_action, encode_action
from xtamer.faces import (
    N_EMOTIONS,
    EmotionLabel,
    IdentityParams,
    add_noise,
    render_face,
)
from xtamer.validation import as_rng

PROFILE_FORMAT_VERSION = 1


def _uniform_confusion() -> tuple[tuple[float, ...], ...]:
    row = tuple(1.0 / N_EMOTIONS for _ in range(N_EMOTIONS))
    return tuple(row for _ in range(N_EMOTIONS))


@dataclass(frozen=True)
class UserProfile:
    """Who the simulated user is and how reliably they mimic.

    confusion[i][j] is the probability of mimicking emotion j when the
    robot displayed the expression for emotion i, used only when the
    mimic_accuracy coin comes up as a miss. Rows must sum to 1.
    """

    identity: IdentityParams
    mimic_accuracy: float = 1.0
    confusion: tuple[tuple[float, ...], ...] = field(default_factory=_uniform_confusion)
    expression_noise: float = 0.03
    seed: int = 0

    def __post_init__(self):
        if not np.isfinite(self.mimic_accuracy) or not 0.0 <= self.mimic_accuracy <= 1.0:
            raise ValueError(f"mimic_accuracy must be in [0, 1], got {self.mimic_accuracy!r}")
        if not np.isfinite(self.expression_noise) or self.expression_noise < 0:
            raise ValueError(f"expression_noise must be >= 0, got {self.expression_noise!r}")
        matrix = np.asarray(self.confusion, dtype=np.float64)
        if matrix.shape != (N_EMOTIONS, N_EMOTIONS):
            raise ValueError(f"confusion must be {N_EMOTIONS}x{N_EMOTIONS}, got {matrix.shape}")
        if (matrix < 0).any() or not np.allclose(matrix.sum(axis=1), 1.0, atol=1e-9):
            raise ValueError("confusion rows must be nonnegative and sum to 1 within 1e-9")
        object.__setattr__(
            self, "confusion", tuple(tuple(float(v) for v in row) for row in matrix))

    @classmethod
    def from_seed(cls, seed: int, mimic_accuracy: float = 1.0,
                  expression_noise: float = 0.03, confusion=None) -> "UserProfile":
        """Profile with an identity derived from the seed."""
        kwargs = {} if confusion is None else {"confusion": confusion}
        return cls(identity=IdentityParams.from_seed(seed),
                   mimic_accuracy=mimic_accuracy,
                   expression_noise=expression_noise, seed=seed, **kwargs)

    # -- serialization ----------------------------------------------------

    def to_json(self) -> str:
        doc = {
            "format_version": PROFILE_FORMAT_VERSION,
            "identity": asdict(self.identity),
            "mimic_accuracy": self.mimic_accuracy,
            "confusion": [list(row) for row in self.confusion],
            "expression_noise": self.expression_noise,
            "seed": self.seed,
        }
        return json.dumps(doc, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "UserProfile":
        doc = json.loads(text)
        version = doc.get("format_version")
        if version != PROFILE_FORMAT_VERSION:
            raise ValueError(f"unsupported profile format_version {version!r}")
        return cls(identity=IdentityParams(**doc["identity"]),
                   mimic_accuracy=doc["mimic_accuracy"],
                   confusion=tuple(tuple(row) for row in doc["confusion"]),
                   expression_noise=doc["expression_noise"], seed=doc["seed"])

    def save(self, path) -> None:
        Path(path).write_text(self.to_json() + "\n", encoding="ascii")

    @classmethod
    def load(cls, path) -> "UserProfile":
        return cls.from_json(Path(path).read_text(encoding="ascii"))


class SimulatedUser:
    """One user in front of the camera, with a private seeded rng stream."""

    def __init__(self, profile: UserProfile):
        self.profile = profile
        self.rng = as_rng(profile.seed)

    def present_emotion(self, emotion: EmotionLabel) -> np.ndarray:
        """Camera frame of the user posing the given emotion."""
        img = render_face(self.profile.identity, EmotionLabel(emotion))
        return add_noise(img, self.profile.expression_noise, self.rng)

    def mimic_action(self, robot_action: ExpressionAction) -> np.ndarray:
        """Camera frame of the user imitating the robot's expression.

        With probability mimic_accuracy the user poses the emotion the
        action stands for; otherwise they pose a draw from that emotion's
        confusion row. The accuracy coin is flipped first, so a profile
        with mimic_accuracy=1 never consults the confusion matrix.
        """
        if robot_action.action_id is None:
            raise ValueError(
                f"cannot mimic non-catalog action {encode_action(robot_action)}")
        intended = emotion_for_action(robot_action)
        if self.rng.uniform() < self.profile.mimic_accuracy:
            posed = intended
        else:
            row = np.asarray(self.profile.confusion[int(intended)])
            posed = EmotionLabel(int(self.rng.choice(N_EMOTIONS, p=row)))
        img = render_face(self.profile.identity, posed)
        return add_noise(img, self.profile.expression_noise, self.rng)
