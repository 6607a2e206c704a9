"""Simulated-user tests: profile validation and serialization, deterministic
streams, and the mimic-fidelity frequency contract."""

import numpy as np
import pytest

from xtamer import (
    ACTION_CATALOG,
    EmotionLabel,
    SimulatedUser,
    UserProfile,
    render_face,
)
from xtamer.expressions import decode_action
from xtamer.faces import IdentityParams


def canonical_renders(identity):
    return {render_face(identity, e).tobytes(): e for e in EmotionLabel}


class TestUserProfile:
    def test_from_seed_deterministic(self):
        assert UserProfile.from_seed(5) == UserProfile.from_seed(5)

    def test_defaults(self):
        p = UserProfile.from_seed(0)
        assert p.mimic_accuracy == 1.0
        assert p.expression_noise == 0.03
        rows = np.asarray(p.confusion)
        np.testing.assert_allclose(rows, 1.0 / 7.0, atol=1e-15)

    def test_bad_accuracy_rejected(self):
        with pytest.raises(ValueError, match="mimic_accuracy"):
            UserProfile.from_seed(0, mimic_accuracy=1.5)

    def test_bad_noise_rejected(self):
        with pytest.raises(ValueError, match="expression_noise"):
            UserProfile.from_seed(0, expression_noise=-0.1)

    def test_bad_confusion_rejected(self):
        with pytest.raises(ValueError, match="confusion"):
            UserProfile.from_seed(0, confusion=((1.0,) * 7,) * 6)
        rows = [[1 / 7] * 7 for _ in range(7)]
        rows[3][3] += 1e-3  # row no longer sums to 1
        with pytest.raises(ValueError, match="sum to 1"):
            UserProfile.from_seed(0, confusion=rows)

    def test_json_round_trip_exact(self):
        p = UserProfile.from_seed(11, mimic_accuracy=0.6, expression_noise=0.05)
        assert UserProfile.from_json(p.to_json()) == p

    def test_file_round_trip(self, tmp_path):
        p = UserProfile.from_seed(3, mimic_accuracy=0.95)
        p.save(tmp_path / "profile.json")
        assert UserProfile.load(tmp_path / "profile.json") == p

    def test_wrong_version_rejected(self):
        p = UserProfile.from_seed(0)
        text = p.to_json().replace('"format_version": 1', '"format_version": 99')
        with pytest.raises(ValueError, match="format_version"):
            UserProfile.from_json(text)


class TestPresentEmotion:
    def test_noise_free_profile_gives_canonical_render(self):
        p = UserProfile.from_seed(2, expression_noise=0.0)
        user = SimulatedUser(p)
        img = user.present_emotion(EmotionLabel.FEAR)
        assert (img == render_face(p.identity, EmotionLabel.FEAR)).all()

    def test_noise_makes_consecutive_frames_differ(self):
        user = SimulatedUser(UserProfile.from_seed(2, expression_noise=0.05))
        a = user.present_emotion(EmotionLabel.HAPPINESS)
        b = user.present_emotion(EmotionLabel.HAPPINESS)
        assert (a != b).any()

    def test_stream_deterministic_across_instances(self):
        p = UserProfile.from_seed(4, expression_noise=0.04)
        u1, u2 = SimulatedUser(p), SimulatedUser(p)
        for emotion in (EmotionLabel.ANGER, EmotionLabel.NEUTRAL, EmotionLabel.FEAR):
            assert (u1.present_emotion(emotion) == u2.present_emotion(emotion)).all()


class TestMimicAction:
    def test_perfect_mimic_always_intended(self):
        p = UserProfile.from_seed(6, mimic_accuracy=1.0, expression_noise=0.0)
        user = SimulatedUser(p)
        lookup = canonical_renders(p.identity)
        for action in ACTION_CATALOG:
            img = user.mimic_action(action)
            assert lookup[img.tobytes()] == EmotionLabel(action.action_id)

    def test_identity_confusion_also_always_intended(self):
        confusion = np.eye(7).tolist()
        p = UserProfile.from_seed(6, mimic_accuracy=0.0, expression_noise=0.0,
                                  confusion=confusion)
        user = SimulatedUser(p)
        lookup = canonical_renders(p.identity)
        for action in ACTION_CATALOG:
            assert lookup[user.mimic_action(action).tobytes()] == \
                EmotionLabel(action.action_id)

    def test_uniform_confusion_frequencies(self):
        # mimic_accuracy=0 with a uniform confusion row: over 10,000 draws
        # each emotion lands within 3 binomial sigmas of n/7.
        p = UserProfile.from_seed(8, mimic_accuracy=0.0, expression_noise=0.0)
        user = SimulatedUser(p)
        lookup = canonical_renders(p.identity)
        n = 10_000
        counts = np.zeros(7, dtype=int)
        action = ACTION_CATALOG[3]
        for _ in range(n):
            counts[int(lookup[user.mimic_action(action).tobytes()])] += 1
        expected = n / 7
        sigma = np.sqrt(n * (1 / 7) * (6 / 7))
        assert (np.abs(counts - expected) <= 3 * sigma).all(), counts

    def test_deterministic_replay(self):
        p = UserProfile.from_seed(9, mimic_accuracy=0.5, expression_noise=0.02)
        u1, u2 = SimulatedUser(p), SimulatedUser(p)
        for _ in range(10):
            for action in ACTION_CATALOG[:3]:
                assert (u1.mimic_action(action) == u2.mimic_action(action)).all()

    def test_non_catalog_action_rejected(self):
        user = SimulatedUser(UserProfile.from_seed(0))
        with pytest.raises(ValueError, match="non-catalog"):
            user.mimic_action(decode_action("00000"))
