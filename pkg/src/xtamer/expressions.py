"""The virtual robot face: LED subsystem masks and the seven-action catalog.

An expression action is one complete LED configuration — left brow (4 LEDs),
right brow (4 LEDs), mouth (6 LEDs), and an eyelid aperture step 0..5. Its
wire form is a 5-hex-digit string: one digit per brow, two for the mouth
(zero-padded), one for the eyelids, uppercase. That encoding is what shows
up in logs, API payloads, and the UI.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from xtamer.faces import EmotionLabel

LEFT_BROW_BITS = 4
RIGHT_BROW_BITS = 4
MOUTH_BITS = 6
EYELID_STEPS = 6  # aperture 0 (closed) .. 5 (wide open)

N_ACTIONS = 7


@dataclass(frozen=True)
class ExpressionAction:
    """One LED configuration; action_id is the catalog slot (None off-catalog)."""

    action_id: int | None
    left_brow: int
    right_brow: int
    mouth: int
    eyelids: int

    def __post_init__(self):
        if self.action_id is not None and not 0 <= self.action_id < N_ACTIONS:
            raise ValueError(f"action_id must be 0..{N_ACTIONS - 1}, got {self.action_id}")
        for name, value, limit in (
            ("left_brow", self.left_brow, 1 << LEFT_BROW_BITS),
            ("right_brow", self.right_brow, 1 << RIGHT_BROW_BITS),
            ("mouth", self.mouth, 1 << MOUTH_BITS),
            ("eyelids", self.eyelids, EYELID_STEPS),
        ):
            if not isinstance(value, (int, np.integer)) or not 0 <= value < limit:
                raise ValueError(f"{name} must be an integer in [0, {limit - 1}], got {value!r}")

    @property
    def masks(self) -> tuple[int, int, int, int]:
        return (self.left_brow, self.right_brow, self.mouth, self.eyelids)


def encode_action(action: ExpressionAction) -> str:
    """5 uppercase hex digits: left brow, right brow, mouth (2), eyelids."""
    return (
        f"{action.left_brow:X}{action.right_brow:X}"
        f"{action.mouth:02X}{action.eyelids:X}"
    )


def decode_action(encoding: str) -> ExpressionAction:
    """Inverse of encode_action; resolves action_id by catalog lookup.

    Raises ValueError naming the offending field for malformed input.
    """
    if not isinstance(encoding, str) or len(encoding) != 5:
        raise ValueError(f"encoding must be 5 hex digits, got {encoding!r}")
    try:
        left = int(encoding[0], 16)
        right = int(encoding[1], 16)
        mouth = int(encoding[2:4], 16)
        eyelids = int(encoding[4], 16)
    except ValueError:
        raise ValueError(f"encoding contains non-hex characters: {encoding!r}") from None
    if mouth >= 1 << MOUTH_BITS:
        raise ValueError(f"mouth value 0x{mouth:02X} exceeds {MOUTH_BITS} bits in {encoding!r}")
    if eyelids >= EYELID_STEPS:
        raise ValueError(f"eyelids digit {eyelids} out of range 0..{EYELID_STEPS - 1} in {encoding!r}")
    action_id = _CATALOG_IDS.get((left, right, mouth, eyelids))
    return ExpressionAction(action_id, left, right, mouth, eyelids)


def _catalog() -> tuple[ExpressionAction, ...]:
    # Brow masks index LEDs outer->inner (bit 0 = outer); mouth bits run
    # left->right along the arc. Patterns are chosen so every emotion reads
    # on the rendered face and all seven stay pairwise distinct.
    spec = [
        (EmotionLabel.ANGER, 0xC, 0x3, 0x18, 3),      # brows slanted in, tight mouth
        (EmotionLabel.DISGUST, 0x9, 0x9, 0x20, 2),    # split brows, curled lip corner
        (EmotionLabel.FEAR, 0x6, 0x6, 0x30, 4),       # mid brows, mouth pulled aside
        (EmotionLabel.HAPPINESS, 0x1, 0x8, 0x1E, 4),  # outer brow tips, broad smile arc
        (EmotionLabel.SADNESS, 0x3, 0x9, 0x21, 2),    # drooping brows, corners down
        (EmotionLabel.SURPRISE, 0x6, 0x6, 0x33, 5),   # raised brows, open round mouth
        (EmotionLabel.NEUTRAL, 0x1, 0x8, 0x18, 3),    # rest pattern
    ]
    return tuple(
        ExpressionAction(int(label), lb, rb, m, e) for label, lb, rb, m, e in spec
    )


ACTION_CATALOG: tuple[ExpressionAction, ...] = _catalog()
_CATALOG_IDS = {a.masks: a.action_id for a in ACTION_CATALOG}


def action_catalog() -> tuple[ExpressionAction, ...]:
    """The seven catalog actions, indexed by emotion code (= action_id)."""
    return ACTION_CATALOG


def action_for_emotion(emotion: EmotionLabel) -> ExpressionAction:
    return ACTION_CATALOG[int(emotion)]


def emotion_for_action(action: ExpressionAction) -> EmotionLabel:
    if action.action_id is None:
        raise ValueError(f"action {encode_action(action)} is not in the catalog")
    return EmotionLabel(action.action_id)


def action_features(action: ExpressionAction) -> np.ndarray:
    """One-hot vector of length 7 keyed by action_id; catalog actions only."""
    if action.action_id is None or ACTION_CATALOG[action.action_id].masks != action.masks:
        raise ValueError(f"action {encode_action(action)} is not in the catalog")
    v = np.zeros(N_ACTIONS)
    v[action.action_id] = 1.0
    return v


def led_layout(action: ExpressionAction) -> dict:
    """Lit-LED index lists per subsystem, the shape the face renderer draws."""
    return {
        "left_brow": [i for i in range(LEFT_BROW_BITS) if action.left_brow >> i & 1],
        "right_brow": [i for i in range(RIGHT_BROW_BITS) if action.right_brow >> i & 1],
        "mouth": [i for i in range(MOUTH_BITS) if action.mouth >> i & 1],
        "eyelids_aperture": action.eyelids,
    }
