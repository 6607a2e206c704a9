"""Turning user feedback into the scalar reward the learner consumes.

Mimicry mode: the user re-enacts the robot's expression; the re-enactment
image runs through the same CNN+SOM perception as the stimulus, and the
normalized grid distance between the two BMUs is thresholded into one of
five integer rewards. The less the mimic differs from the stimulus, the
more positive the reward. Direct mode passes a UI slider value through.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_THRESHOLDS = (0.10, 0.30, 0.55, 0.80)
REWARD_LEVELS = (2, 1, 0, -1, -2)


@dataclass(frozen=True)
class RewardConfig:
    """Reward-channel settings serialized inside the session config.

    thresholds are the four strictly increasing cut points t1 < t2 < t3 < t4
    in (0, 1) mapping normalized BMU distance to the five reward levels.
    """

    thresholds: tuple[float, float, float, float] = DEFAULT_THRESHOLDS
    mode: str = "mimicry"

    def __post_init__(self):
        t = tuple(float(v) for v in self.thresholds)
        if len(t) != 4:
            raise ValueError(f"expected 4 thresholds, got {len(t)}")
        if not all(np.isfinite(t)) or not all(0.0 < v < 1.0 for v in t):
            raise ValueError(f"thresholds must lie strictly inside (0, 1): {t}")
        if not (t[0] < t[1] < t[2] < t[3]):
            raise ValueError(f"thresholds must be strictly increasing: {t}")
        object.__setattr__(self, "thresholds", t)
        if self.mode not in ("mimicry", "direct"):
            raise ValueError(f"mode must be 'mimicry' or 'direct', got {self.mode!r}")

    def to_dict(self) -> dict:
        return {"thresholds": list(self.thresholds), "mode": self.mode}

    @classmethod
    def from_dict(cls, d: dict) -> "RewardConfig":
        return cls(thresholds=tuple(d.get("thresholds", DEFAULT_THRESHOLDS)),
                   mode=d.get("mode", "mimicry"))


def threshold_distance(d: float, cfg: RewardConfig | None = None) -> int:
    """Five-level reward from a normalized BMU distance in [0, 1].

    d < t1 -> +2, d < t2 -> +1, d < t3 -> 0, d < t4 -> -1, else -2.
    """
    cfg = cfg or RewardConfig()
    if not np.isfinite(d) or not 0.0 <= d <= 1.0:
        raise ValueError(f"distance must be in [0, 1], got {d!r}")
    for cut, reward in zip(cfg.thresholds, REWARD_LEVELS):
        if d < cut:
            return reward
    return REWARD_LEVELS[-1]


def mimicry_reward(som, cnn, stimulus_bmu, mimic_image,
                   cfg: RewardConfig | None = None):
    """(reward, mimic BMU, normalized distance) for a mimic image.

    The mimic image goes through the identical perception path as the
    stimulus did; the reward compares where the two land on the user's map.
    """
    from xtamer.som import normalized_bmu_distance

    features = cnn.features(mimic_image)
    mimic_bmu = som.best_matching_unit(features)
    d = normalized_bmu_distance(stimulus_bmu, mimic_bmu)
    return threshold_distance(d, cfg), mimic_bmu, d


def direct_reward(value: float) -> float:
    """Slider passthrough: finite values clamp to [-2, 2]."""
    value = float(value)
    if not np.isfinite(value):
        raise ValueError(f"direct reward must be finite, got {value!r}")
    return float(np.clip(value, -2.0, 2.0))
