"""The interaction loop: capture -> BMU -> act -> reward -> update.

A session owns one user's models (their SOM and reward network; the CNN is
shared and read-only), an append-only JSONL record log, and per-epoch
summaries. Sessions are deterministic: a simulated session with the same
config and seed reproduces its log and report byte for byte, helped by a
virtual clock (timestamp = interaction index) and 12-significant-digit
float formatting.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from xtamer.expressions import (
    ACTION_CATALOG,
    ExpressionAction,
    decode_action,
    emotion_for_action,
    encode_action,
)
from xtamer.faces import N_EMOTIONS, EmotionLabel, render_face
from xtamer.reward_channel import RewardConfig, direct_reward, mimicry_reward
from xtamer.reward_model import RewardNetwork, RewardSample, epoch_cost
from xtamer.simulated_user import SimulatedUser, UserProfile
from xtamer.som import BmuPosition, SelfOrganizingMap
from xtamer import checkpoint as ckpt
from xtamer.validation import as_rng, check_image


class PendingInteractionError(RuntimeError):
    """A stimulus is already awaiting its reward."""


class NoPendingInteractionError(RuntimeError):
    """A reward arrived with no stimulus awaiting one (or it was already paid)."""


class InteractionTimeoutError(RuntimeError):
    """The pending interaction outlived the reward timeout and was discarded."""


def _g12(x) -> float:
    """Round to 12 significant decimal digits (the logged precision)."""
    return float(f"{float(x):.12g}")


@dataclass(frozen=True)
class SessionConfig:
    """Everything a session needs, mirrored 1:1 by the JSON config file.

    user is either the string "interactive" or a path to a UserProfile
    JSON file. Interactive sessions still derive a synthetic stand-in
    profile from the seed: it poses the calibration images and renders
    label-based presents and mimic-by-selection rewards.
    """

    seed: int = 0
    calibration_samples: int = 10
    interactions_per_epoch: int = 100
    epochs: int = 10
    reward: RewardConfig = field(default_factory=RewardConfig)
    learner: dict = field(default_factory=dict)
    som: dict = field(default_factory=dict)
    user: str = "interactive"
    cnn_checkpoint: str | None = None
    timeout_s: float = 120.0

    def __post_init__(self):
        if self.interactions_per_epoch < 1:
            raise ValueError(
                f"interactions_per_epoch must be >= 1, got {self.interactions_per_epoch}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.calibration_samples < 1:
            raise ValueError(
                f"calibration_samples must be >= 1, got {self.calibration_samples}")
        if not np.isfinite(self.timeout_s) or self.timeout_s <= 0:
            raise ValueError(f"timeout_s must be > 0, got {self.timeout_s}")

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "calibration_samples": self.calibration_samples,
            "interactions_per_epoch": self.interactions_per_epoch,
            "epochs": self.epochs,
            "reward": self.reward.to_dict(),
            "learner": dict(self.learner),
            "som": dict(self.som),
            "user": self.user,
            "cnn_checkpoint": self.cnn_checkpoint,
            "timeout_s": self.timeout_s,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SessionConfig":
        d = dict(d)
        reward = d.pop("reward", {})
        if not isinstance(reward, RewardConfig):
            reward = RewardConfig.from_dict(reward)
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown session config keys: {sorted(unknown)}")
        return cls(reward=reward, **d)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n",
                              encoding="ascii")

    @classmethod
    def load(cls, path) -> "SessionConfig":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="ascii")))


@dataclass(frozen=True)
class InteractionRecord:
    """One completed loop turn, exactly as logged."""

    index: int
    emotion: int | None
    bmu: tuple[int, int]
    action: str
    predicted: tuple[float, ...]
    reward: float
    distance: float | None
    cost: float
    timestamp: float

    def __post_init__(self):
        if not -2.0 <= self.reward <= 2.0:
            raise ValueError(f"observed reward {self.reward} outside [-2, 2]")
        if self.cost < 0:
            raise ValueError(f"cost must be >= 0, got {self.cost}")
        if len(self.predicted) != len(ACTION_CATALOG):
            raise ValueError(f"expected {len(ACTION_CATALOG)} predictions, "
                             f"got {len(self.predicted)}")
        decode_action(self.action)
        # Canonicalize floats to the logged precision so a record equals
        # its JSONL round-trip and summaries recomputed from the log match
        # summaries computed in memory.
        object.__setattr__(self, "predicted", tuple(_g12(p) for p in self.predicted))
        object.__setattr__(self, "reward", _g12(self.reward))
        if self.distance is not None:
            object.__setattr__(self, "distance", _g12(self.distance))
        object.__setattr__(self, "cost", _g12(self.cost))
        object.__setattr__(self, "timestamp", _g12(self.timestamp))

    def to_json_line(self) -> str:
        doc = {
            "index": self.index,
            "emotion": self.emotion,
            "bmu": list(self.bmu),
            "action": self.action,
            "predicted": [_g12(p) for p in self.predicted],
            "reward": _g12(self.reward),
            "distance": None if self.distance is None else _g12(self.distance),
            "cost": _g12(self.cost),
            "timestamp": _g12(self.timestamp),
        }
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json_line(cls, line: str) -> "InteractionRecord":
        doc = json.loads(line)
        return cls(index=doc["index"], emotion=doc["emotion"],
                   bmu=tuple(doc["bmu"]), action=doc["action"],
                   predicted=tuple(doc["predicted"]), reward=doc["reward"],
                   distance=doc["distance"], cost=doc["cost"],
                   timestamp=doc["timestamp"])


def write_report(path, summaries) -> None:
    """Tab-separated per-epoch table: epoch, avg_cost, accuracy."""
    lines = ["epoch\tavg_cost\taccuracy"]
    for s in summaries:
        lines.append(f"{s['epoch']}\t{s['avg_cost']:.12g}\t{s['accuracy']:.12g}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def read_report(path):
    lines = Path(path).read_text(encoding="ascii").strip().split("\n")
    if lines[0].split("\t") != ["epoch", "avg_cost", "accuracy"]:
        raise ValueError(f"{path}: bad report header")
    return [{"epoch": int(e), "avg_cost": float(c), "accuracy": float(a)}
            for e, c, a in (ln.split("\t") for ln in lines[1:])]


def summarize_records(records, interactions_per_epoch: int):
    """Per-epoch summaries recomputed from raw records (the report's source)."""
    summaries = []
    for start in range(0, len(records), interactions_per_epoch):
        block = records[start:start + interactions_per_epoch]
        if len(block) < interactions_per_epoch:
            break  # incomplete epoch: not summarized
        hits = sum(
            1 for r in block
            if r.emotion is not None
            and emotion_for_action(decode_action(r.action)) == r.emotion)
        summaries.append({
            "epoch": start // interactions_per_epoch + 1,
            "avg_cost": epoch_cost([r.cost for r in block]),
            "accuracy": hits / len(block),
        })
    return summaries


@dataclass
class PendingTurn:
    index: int
    emotion: int | None
    bmu: BmuPosition
    action: ExpressionAction
    predicted: np.ndarray
    started_at: float


class Session:
    """One user's training run, driven either by a SimulatedUser or the API.

    All mutations (calibrate, present, reward) must be externally
    serialized; reads of completed state (records, summaries) are safe
    between mutations.
    """

    def __init__(self, config: SessionConfig, cnn, out_dir=None, wall_clock=None):
        self.config = config
        self.cnn = cnn
        self.phase = "calibrating"
        self.records: list[InteractionRecord] = []
        self.epoch_summaries: list[dict] = []
        self.discarded = 0
        self.som = None
        self.purity = None
        self.label_grid = None
        self.pending: PendingTurn | None = None
        # Sessions learn online from thresholded mimicry rewards, where the
        # greedy sweep only reaches every action if untried ones rest above
        # the fitted value of tried-and-wrong ones; +1.2 clears the +1
        # reward of near-cluster confusions while staying below a fitted
        # correct action (see RewardNetwork's optimism parameter).
        learner = {"optimism": 1.2, "seed": config.seed, **config.learner}
        self.model = RewardNetwork(**learner).initialize()
        # schedule stream is separate from the user's stream so adding
        # interactions never shifts stimulus order
        self.schedule_rng = as_rng([config.seed, 1])
        self._schedule: list[int] = []
        if config.user == "interactive":
            profile = UserProfile.from_seed(config.seed)
        else:
            profile = UserProfile.load(config.user)
        self.profile = profile
        self.user = SimulatedUser(profile)
        # wall_clock=None keeps the deterministic virtual clock: each
        # record's timestamp is its interaction index
        self.wall_clock = wall_clock
        self.out_dir = Path(out_dir) if out_dir is not None else None
        self._log_fh = None
        if self.out_dir is not None:
            self.out_dir.mkdir(parents=True, exist_ok=True)

    # -- clock ------------------------------------------------------------

    def _now(self) -> float:
        if self.wall_clock is not None:
            return float(self.wall_clock())
        return float(len(self.records))

    # -- calibration ------------------------------------------------------

    def calibrate(self) -> float:
        """Collect labeled presentations, train this user's SOM, report purity."""
        if self.phase != "calibrating":
            raise RuntimeError(f"cannot calibrate in phase {self.phase!r}")
        images, labels = [], []
        for _ in range(self.config.calibration_samples):
            for emotion in EmotionLabel:
                images.append(self.user.present_emotion(emotion))
                labels.append(int(emotion))
        features = self.cnn.transform(np.stack(images))
        som_params = {"seed": self.config.seed, **self.config.som}
        self.som = SelfOrganizingMap(**som_params).fit(features)
        self.label_grid, self.purity = self.som.label_map(features, labels)
        self.phase = "training"
        return self.purity

    # -- one turn ---------------------------------------------------------

    def _require_trained(self) -> None:
        if self.som is None:
            raise RuntimeError("session is not calibrated yet")

    def present(self, image=None, emotion=None) -> PendingTurn:
        """Perceive a stimulus and act; the turn then awaits its reward.

        Exactly one of image/emotion must be given. An emotion label is
        rendered as the session user's canonical face for that emotion.
        A pending turn older than the timeout is discarded silently (no
        model update); a fresh one makes this call a conflict.
        """
        self._require_trained()
        if (image is None) == (emotion is None):
            raise ValueError("present needs exactly one of image or emotion")
        if self.pending is not None:
            if self._now() - self.pending.started_at <= self.config.timeout_s:
                raise PendingInteractionError(
                    f"interaction {self.pending.index} is still awaiting its reward")
            self.pending = None
            self.discarded += 1
        if emotion is not None:
            emotion = int(EmotionLabel(emotion))
            image = self.user.present_emotion(emotion)
        image = check_image(image)
        bmu = self.som.best_matching_unit(self.cnn.features(image))
        action, predicted = self.model.select_action(bmu)
        self.pending = PendingTurn(
            index=len(self.records), emotion=emotion, bmu=bmu, action=action,
            predicted=predicted, started_at=self._now())
        return self.pending

    def reward(self, mode: str, value=None, image=None, emotion=None) -> InteractionRecord:
        """Pay the pending turn's reward, update the model, log the record.

        mode="mimic" takes an image (or an emotion, rendered canonically as
        the session user); mode="direct" takes a scalar in [-2, 2]. Exactly
        one model update happens per completed interaction.
        """
        self._require_trained()
        if self.pending is None:
            raise NoPendingInteractionError("no interaction is awaiting a reward")
        if self._now() - self.pending.started_at > self.config.timeout_s:
            self.pending = None
            self.discarded += 1
            raise InteractionTimeoutError(
                "pending interaction timed out and was discarded; no update applied")
        turn = self.pending
        distance = None
        if mode == "mimic":
            if (image is None) == (emotion is None):
                raise ValueError("mimic reward needs exactly one of image or emotion")
            if emotion is not None:
                # mimic-by-selection: noise-free canonical render of the
                # picked emotion as this session's user
                image = render_face(self.profile.identity, EmotionLabel(emotion))
            observed, _, distance = mimicry_reward(
                self.som, self.cnn, turn.bmu, check_image(image), self.config.reward)
        elif mode == "direct":
            if value is None:
                raise ValueError("direct reward needs a value")
            observed = direct_reward(value)
        else:
            raise ValueError(f"mode must be 'mimic' or 'direct', got {mode!r}")

        cost = self.model.update(RewardSample(turn.bmu, turn.action, float(observed)))
        record = InteractionRecord(
            index=turn.index, emotion=turn.emotion,
            bmu=(turn.bmu.row, turn.bmu.col), action=encode_action(turn.action),
            predicted=tuple(float(p) for p in turn.predicted),
            reward=float(observed), distance=distance, cost=cost,
            timestamp=turn.started_at)
        self.pending = None
        self.records.append(record)
        self._log(record)
        if len(self.records) % self.config.interactions_per_epoch == 0:
            self._close_epoch()
        return record

    def _log(self, record: InteractionRecord) -> None:
        if self.out_dir is None:
            return
        if self._log_fh is None:
            self._log_fh = open(self.out_dir / "session.jsonl", "a", encoding="ascii")
        self._log_fh.write(record.to_json_line() + "\n")
        self._log_fh.flush()

    def _close_epoch(self) -> None:
        n = self.config.interactions_per_epoch
        block = self.records[-n:]
        hits = sum(1 for r in block if r.emotion is not None
                   and int(emotion_for_action(decode_action(r.action))) == r.emotion)
        # summaries hold raw floats; rounding to 12 significant digits
        # happens only when a file or API response is written
        self.epoch_summaries.append({
            "epoch": len(self.records) // n,
            "avg_cost": epoch_cost([r.cost for r in block]),
            "accuracy": hits / n,
        })
        if self.out_dir is not None:
            write_report(self.out_dir / "report.tsv", self.epoch_summaries)
            self.save_checkpoint(
                self.out_dir / f"checkpoint_epoch_{len(self.epoch_summaries):03d}.xtc")

    # -- simulated driving ------------------------------------------------

    def _next_emotion(self) -> int:
        # round-robin over the 7 emotions, reshuffled each cycle
        if not self._schedule:
            self._schedule = [int(e) for e in self.schedule_rng.permutation(N_EMOTIONS)]
        return self._schedule.pop()

    def run_interaction(self) -> InteractionRecord:
        """One full simulated turn: present, act, mimic, reward, update."""
        emotion = self._next_emotion()
        turn = self.present(emotion=emotion)
        mimic = self.user.mimic_action(turn.action)
        return self.reward("mimic", image=mimic)

    def run_epoch(self) -> dict:
        """interactions_per_epoch simulated turns; returns the epoch summary."""
        self._require_trained()
        for _ in range(self.config.interactions_per_epoch):
            self.run_interaction()
        return self.epoch_summaries[-1]

    def run(self) -> list[dict]:
        """Calibrate if needed, then run every remaining configured epoch."""
        if self.phase == "calibrating":
            self.calibrate()
        while len(self.epoch_summaries) < self.config.epochs:
            self.run_epoch()
        self.phase = "idle"
        return self.epoch_summaries

    # -- evaluation -------------------------------------------------------

    def evaluate_policy(self, per_class: int = 50, seed: int = 9001):
        """Greedy accuracy on held-out stimuli, without touching any state.

        Renders per_class fresh stimuli per emotion with the session user's
        identity and noise on a dedicated rng, runs perception and greedy
        selection only (no updates), and reports the per-class fraction of
        correct choices plus how many classes come out majority-correct.
        """
        self._require_trained()
        probe = SimulatedUser(self.profile)
        probe.rng = as_rng([self.profile.seed, seed])
        per_class_acc = np.zeros(N_EMOTIONS)
        for emotion in EmotionLabel:
            hits = 0
            for _ in range(per_class):
                image = probe.present_emotion(emotion)
                bmu = self.som.best_matching_unit(self.cnn.features(image))
                # argmax directly: this measures the greedy policy even when
                # the session's learner was configured with epsilon > 0
                choice = int(np.argmax(self.model.predict_all(bmu)))
                hits += int(emotion_for_action(ACTION_CATALOG[choice]) == emotion)
            per_class_acc[int(emotion)] = hits / per_class
        classes_correct = int((per_class_acc > 0.5).sum())
        return per_class_acc, classes_correct

    # -- persistence ------------------------------------------------------

    def save_checkpoint(self, path) -> None:
        """One container holding the SOM, the reward model, and loop state."""
        self._require_trained()
        meta = {
            "config": self.config.to_dict(),
            "phase": self.phase,
            "n_records": len(self.records),
            "epoch_summaries": self.epoch_summaries,
            "purity": self.purity,
            "discarded": self.discarded,
            "schedule": list(self._schedule),
            "schedule_rng_state": self.schedule_rng.bit_generator.state,
            "user_rng_state": self.user.rng.bit_generator.state,
        }
        session_section = ckpt.Section(
            "session", {"label_grid": self.label_grid.astype(np.float64)}, meta)
        ckpt.write_checkpoint(
            path, [self.som.to_section(), self.model.to_section(), session_section])

    @classmethod
    def resume(cls, path, cnn, out_dir=None, wall_clock=None) -> "Session":
        """Rebuild a session from a checkpoint and continue where it stopped.

        If out_dir holds the session's log, records past the checkpoint
        (a partial epoch cut off by an interruption) are dropped from the
        log; rerunning regenerates them identically.
        """
        sections = ckpt.read_checkpoint(path)
        meta = ckpt.find_section(sections, "session").meta
        config = SessionConfig.from_dict(meta["config"])
        session = cls(config, cnn, out_dir=out_dir, wall_clock=wall_clock)
        session.som = SelfOrganizingMap.from_section(ckpt.find_section(sections, "som"))
        session.model = RewardNetwork.from_section(ckpt.find_section(sections, "reward"))
        session.label_grid = ckpt.find_section(sections, "session").arrays[
            "label_grid"].astype(np.int64)
        session.phase = meta["phase"]
        session.purity = meta["purity"]
        session.discarded = int(meta["discarded"])
        session.epoch_summaries = list(meta["epoch_summaries"])
        session._schedule = [int(e) for e in meta["schedule"]]
        session.schedule_rng.bit_generator.state = meta["schedule_rng_state"]
        session.user.rng.bit_generator.state = meta["user_rng_state"]
        n_records = int(meta["n_records"])
        if out_dir is not None and (Path(out_dir) / "session.jsonl").exists():
            log_path = Path(out_dir) / "session.jsonl"
            lines = log_path.read_text(encoding="ascii").splitlines()
            if len(lines) < n_records:
                raise ValueError(
                    f"log at {log_path} has {len(lines)} records but the "
                    f"checkpoint expects {n_records}")
            lines = lines[:n_records]
            log_path.write_text(
                "".join(ln + "\n" for ln in lines), encoding="ascii")
            session.records = [InteractionRecord.from_json_line(ln) for ln in lines]
        else:
            session.records = [None] * n_records  # placeholders keep indices right
        return session
