"""xtamer: an interactive expression-learning engine.

A simulated robot face perceives a user's expression image through a
pretrained CNN, locates it on a per-user self-organizing map, greedily
shows the LED expression with the highest predicted human reward, and
learns online from mimicry-derived or direct scalar rewards.
"""

from xtamer.checkpoint import CheckpointError, Section, read_checkpoint, write_checkpoint
from xtamer.encoder import FEATURE_DIM, CnnEncoder
from xtamer.expressions import (
    ACTION_CATALOG,
    N_ACTIONS,
    ExpressionAction,
    action_catalog,
    action_features,
    action_for_emotion,
    decode_action,
    emotion_for_action,
    encode_action,
    led_layout,
)
from xtamer.faces import (
    IDENTITY_BOUNDS,
    N_EMOTIONS,
    EmotionLabel,
    IdentityParams,
    add_noise,
    generate_dataset,
    load_dataset,
    read_manifest,
    read_pgm,
    render_face,
    write_manifest,
    write_pgm,
)
from xtamer.reward_channel import (
    DEFAULT_THRESHOLDS,
    REWARD_LEVELS,
    RewardConfig,
    direct_reward,
    mimicry_reward,
    threshold_distance,
)
from xtamer.reward_model import (
    RewardNetwork,
    RewardSample,
    epoch_cost,
    state_action_features,
)
from xtamer.session import (
    InteractionRecord,
    InteractionTimeoutError,
    NoPendingInteractionError,
    PendingInteractionError,
    Session,
    SessionConfig,
    read_report,
    summarize_records,
    write_report,
)
from xtamer.simulated_user import SimulatedUser, UserProfile
from xtamer.som import BmuPosition, SelfOrganizingMap, normalized_bmu_distance

__version__ = "0.1.0"

__all__ = [
    "ACTION_CATALOG",
    "BmuPosition",
    "CheckpointError",
    "CnnEncoder",
    "DEFAULT_THRESHOLDS",
    "EmotionLabel",
    "ExpressionAction",
    "FEATURE_DIM",
    "IDENTITY_BOUNDS",
    "IdentityParams",
    "InteractionRecord",
    "InteractionTimeoutError",
    "N_ACTIONS",
    "N_EMOTIONS",
    "NoPendingInteractionError",
    "PendingInteractionError",
    "REWARD_LEVELS",
    "RewardConfig",
    "RewardNetwork",
    "RewardSample",
    "Section",
    "SelfOrganizingMap",
    "Session",
    "SessionConfig",
    "SimulatedUser",
    "UserProfile",
    "action_catalog",
    "action_features",
    "action_for_emotion",
    "add_noise",
    "decode_action",
    "direct_reward",
    "emotion_for_action",
    "encode_action",
    "epoch_cost",
    "generate_dataset",
    "led_layout",
    "load_dataset",
    "mimicry_reward",
    "normalized_bmu_distance",
    "read_checkpoint",
    "read_manifest",
    "read_pgm",
    "read_report",
    "render_face",
    "state_action_features",
    "summarize_records",
    "threshold_distance",
    "write_checkpoint",
    "write_manifest",
    "write_pgm",
    "write_report",
]
