"""Face synthesis tests: renderer determinism and geometry, PGM round trips,
manifest handling, and dataset generation."""

import numpy as np
import pytest

from xtamer.faces import (
    IDENTITY_BOUNDS,
    N_EMOTIONS,
    EmotionLabel,
    IdentityParams,
    ManifestEntry,
    add_noise,
    generate_dataset,
    load_dataset,
    parse_pgm,
    pgm_bytes,
    read_manifest,
    read_pgm,
    render_face,
    write_manifest,
    write_pgm,
)


class TestEmotionLabel:
    def test_seven_labels_in_order(self):
        assert [e.name for e in EmotionLabel] == [
            "ANGER", "DISGUST", "FEAR", "HAPPINESS", "SADNESS", "SURPRISE", "NEUTRAL"]
        assert [int(e) for e in EmotionLabel] == list(range(7))
        assert N_EMOTIONS == 7


class TestIdentityParams:
    def test_from_seed_within_bounds(self):
        for seed in range(25):
            ident = IdentityParams.from_seed(seed)
            for name, (low, high) in IDENTITY_BOUNDS.items():
                assert low <= getattr(ident, name) <= high

    def test_from_seed_deterministic(self):
        assert IdentityParams.from_seed(42) == IdentityParams.from_seed(42)

    def test_distinct_seeds_distinct_identities(self):
        assert IdentityParams.from_seed(1) != IdentityParams.from_seed(2)

    def test_out_of_bounds_rejected(self):
        good = IdentityParams.from_seed(0).__dict__.copy()
        good["eye_spacing"] = 0.6
        with pytest.raises(ValueError, match="eye_spacing"):
            IdentityParams(**good)


def mouth_argmin_spread(ident, emotion):
    """Row spread of the darkest pixel per column inside the mouth band."""
    img = render_face(ident, emotion)
    row0 = int((ident.mouth_height + 1) / 2 * 64)
    c_lo = int((1 - ident.mouth_width * 0.7) / 2 * 64)
    c_hi = int((1 + ident.mouth_width * 0.7) / 2 * 64) + 1
    band = img[max(row0 - 12, 0):row0 + 12, c_lo:c_hi]
    darkest = band.argmin(axis=0)
    return int(darkest.max() - darkest.min())


class TestRenderFace:
    def test_deterministic(self):
        ident = IdentityParams.from_seed(3)
        a = render_face(ident, EmotionLabel.FEAR)
        b = render_face(ident, EmotionLabel.FEAR)
        assert (a == b).all()

    def test_shape_and_range(self):
        img = render_face(IdentityParams.from_seed(0), EmotionLabel.SURPRISE)
        assert img.shape == (64, 64)
        assert img.min() >= 0.0 and img.max() <= 1.0

    def test_emotions_differ_in_at_least_one_percent_of_pixels(self):
        ident = IdentityParams.from_seed(7)
        images = [render_face(ident, e) for e in EmotionLabel]
        for i in range(7):
            for j in range(i + 1, 7):
                frac = (np.abs(images[i] - images[j]) > 1 / 255).mean()
                assert frac >= 0.01, (i, j, frac)

    @pytest.mark.parametrize("seed", [1, 2, 3, 4, 5])
    def test_neutral_mouth_is_horizontal(self, seed):
        ident = IdentityParams.from_seed(seed)
        assert mouth_argmin_spread(ident, EmotionLabel.NEUTRAL) == 0
        # contrast: curved mouths bend by multiple pixel rows
        assert mouth_argmin_spread(ident, EmotionLabel.HAPPINESS) >= 2
        assert mouth_argmin_spread(ident, EmotionLabel.SADNESS) >= 2


class TestAddNoise:
    def test_zero_noise_returns_equal_copy(self):
        img = render_face(IdentityParams.from_seed(1), EmotionLabel.NEUTRAL)
        out = add_noise(img, 0.0, rng=0)
        assert (out == img).all()
        assert out is not img

    def test_stays_in_range(self):
        img = render_face(IdentityParams.from_seed(1), EmotionLabel.NEUTRAL)
        out = add_noise(img, 0.5, rng=np.random.default_rng(0))
        assert out.min() >= 0.0 and out.max() <= 1.0

    def test_seeded_rng_deterministic(self):
        img = render_face(IdentityParams.from_seed(1), EmotionLabel.ANGER)
        a = add_noise(img, 0.05, rng=np.random.default_rng(9))
        b = add_noise(img, 0.05, rng=np.random.default_rng(9))
        assert (a == b).all()

    def test_negative_level_rejected(self):
        img = np.zeros((64, 64))
        with pytest.raises(ValueError, match="noise_level"):
            add_noise(img, -0.1, rng=0)


class TestPgm:
    def test_round_trip_is_exact_after_quantization(self, tmp_path):
        img = render_face(IdentityParams.from_seed(4), EmotionLabel.DISGUST)
        path = tmp_path / "face.pgm"
        write_pgm(path, img)
        back = read_pgm(path)
        quantized = np.round(img * 255.0) / 255.0
        assert (back == quantized).all()

    def test_header_format(self):
        raw = pgm_bytes(np.zeros((64, 64)))
        assert raw.startswith(b"P5\n64 64\n255\n")
        assert len(raw) == len(b"P5\n64 64\n255\n") + 64 * 64

    def test_comments_tolerated(self):
        raw = b"P5\n# a comment\n2 2\n# another\n255\n" + bytes([0, 128, 255, 64])
        img = parse_pgm(raw)
        assert img.shape == (2, 2)
        assert img[0, 1] == 128 / 255.0

    def test_truncated_rejected(self):
        raw = pgm_bytes(np.zeros((64, 64)))
        with pytest.raises(ValueError, match="truncated"):
            parse_pgm(raw[:100])

    def test_wrong_magic_rejected(self):
        with pytest.raises(ValueError, match="P5"):
            parse_pgm(b"P2\n2 2\n255\n....")

    def test_wrong_maxval_rejected(self):
        with pytest.raises(ValueError, match="maxval"):
            parse_pgm(b"P5\n2 2\n65535\n" + bytes(8))


class TestManifest:
    def test_round_trip(self, tmp_path):
        entries = [
            ManifestEntry("a.pgm", EmotionLabel.ANGER, 123, 0.03),
            ManifestEntry("b.pgm", EmotionLabel.NEUTRAL, 456, 0.0),
        ]
        path = tmp_path / "manifest.tsv"
        write_manifest(path, entries)
        assert read_manifest(path) == entries

    def test_bad_header_rejected(self, tmp_path):
        path = tmp_path / "manifest.tsv"
        path.write_text("nope\tnope\n")
        with pytest.raises(ValueError, match="header"):
            read_manifest(path)


class TestGenerateDataset:
    def test_class_balance_1001(self, tmp_path):
        entries = generate_dataset(tmp_path / "d", n_images=1001, seed=0,
                                   noise_level=0.0, n_identities=3)
        assert len(entries) == 1001
        counts = np.bincount([int(e.label) for e in entries], minlength=7)
        assert counts.max() - counts.min() <= 1
        assert counts.sum() == 1001

    def test_seven_images_one_per_class(self, tmp_path):
        entries = generate_dataset(tmp_path / "d", n_images=7, seed=0,
                                   n_identities=1)
        assert sorted(int(e.label) for e in entries) == list(range(7))
        assert len({e.identity_seed for e in entries}) == 1

    def test_regeneration_is_byte_identical(self, tmp_path):
        generate_dataset(tmp_path / "a", n_images=14, seed=5, noise_level=0.02,
                         n_identities=2)
        generate_dataset(tmp_path / "b", n_images=14, seed=5, noise_level=0.02,
                         n_identities=2)
        for name in sorted(p.name for p in (tmp_path / "a").iterdir()):
            assert (tmp_path / "a" / name).read_bytes() == \
                   (tmp_path / "b" / name).read_bytes()

    def test_load_dataset_shapes(self, tmp_path):
        generate_dataset(tmp_path / "d", n_images=21, seed=1)
        images, labels = load_dataset(tmp_path / "d")
        assert images.shape == (21, 64, 64)
        assert labels.shape == (21,)
        assert images.min() >= 0.0 and images.max() <= 1.0

    def test_nearest_centroid_separates_noise_free_single_identity(self, tmp_path):
        generate_dataset(tmp_path / "d", n_images=70, seed=2, noise_level=0.0,
                         n_identities=1)
        images, labels = load_dataset(tmp_path / "d")
        flat = images.reshape(len(images), -1)
        centroids = np.stack([flat[labels == c].mean(axis=0) for c in range(7)])
        d2 = ((flat[:, None, :] - centroids[None]) ** 2).sum(axis=2)
        assert (d2.argmin(axis=1) == labels).all()
        # the seven class centroids are themselves pairwise distinct
        assert len({tuple(np.round(c, 9)) for c in centroids}) == 7

    def test_bad_count_rejected(self, tmp_path):
        with pytest.raises(ValueError, match="n_images"):
            generate_dataset(tmp_path / "d", n_images=0, seed=0)
