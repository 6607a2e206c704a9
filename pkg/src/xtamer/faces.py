"""Synthetic face stimuli: parametric renders, PGM files, dataset generation.

Stimuli are 64x64 grayscale images of a schematic human face posed in one of
seven emotions. Identity (face proportions) is drawn from a seed so that a
dataset can mix many distinct people; expression geometry (brows, eyelids,
mouth) is a deterministic function of the emotion label. Pixels live in
[0, 1] with 1.0 = white; files are 8-bit binary PGM (P5).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, fields
from enum import IntEnum
from pathlib import Path

import numpy as np

from xtamer.validation import IMAGE_SIZE, as_rng, check_image


class EmotionLabel(IntEnum):
    ANGER = 0
    DISGUST = 1
    FEAR = 2
    HAPPINESS = 3
    SADNESS = 4
    SURPRISE = 5
    NEUTRAL = 6


N_EMOTIONS = len(EmotionLabel)

# (low, high) bounds for each identity field, in face-half-width units
# unless noted. from_seed draws uniformly inside these.
IDENTITY_BOUNDS = {
    "face_width": (0.70, 0.95),    # fraction of half image width
    "face_height": (0.80, 0.98),   # fraction of half image height
    "eye_spacing": (0.20, 0.45),   # offset of each eye center from midline
    "eye_height": (0.05, 0.25),    # eye row above center, fraction of half height
    "eye_size": (0.08, 0.16),      # eye radius
    "brow_length": (0.18, 0.32),
    "mouth_width": (0.25, 0.50),   # mouth half-width
    "mouth_height": (0.35, 0.55),  # mouth row below center
    "feature_darkness": (0.55, 0.95),
}


@dataclass(frozen=True)
class IdentityParams:
    """Per-person face proportions; every field stays inside IDENTITY_BOUNDS."""

    face_width: float
    face_height: float
    eye_spacing: float
    eye_height: float
    eye_size: float
    brow_length: float
    mouth_width: float
    mouth_height: float
    feature_darkness: float

    def __post_init__(self):
        for f in fields(self):
            low, high = IDENTITY_BOUNDS[f.name]
            value = getattr(self, f.name)
            if not np.isfinite(value) or not low <= value <= high:
                raise ValueError(
                    f"{f.name}={value!r} outside [{low}, {high}]"
                )

    @classmethod
    def from_seed(cls, seed: int) -> "IdentityParams":
        """Deterministic identity for a seed; one uniform draw per field."""
        rng = as_rng(seed)
        values = {}
        for f in fields(cls):
            low, high = IDENTITY_BOUNDS[f.name]
            values[f.name] = float(rng.uniform(low, high))
        return cls(**values)


# Expression geometry per emotion: brow angle (radians, positive = inner end
# raised), brow raise, eyelid aperture 0..1, mouth curvature (positive =
# smile), mouth opening 0..1.
_EXPRESSION_GEOMETRY = {
    EmotionLabel.ANGER: (-0.55, -0.05, 0.55, -0.5, 0.10),
    EmotionLabel.DISGUST: (-0.25, 0.00, 0.45, -0.7, 0.20),
    EmotionLabel.FEAR: (0.45, 0.10, 0.95, -0.3, 0.45),
    EmotionLabel.HAPPINESS: (0.10, 0.05, 0.70, 1.0, 0.25),
    EmotionLabel.SADNESS: (0.50, -0.02, 0.50, -0.9, 0.05),
    EmotionLabel.SURPRISE: (0.05, 0.18, 1.00, 0.1, 0.90),
    EmotionLabel.NEUTRAL: (0.00, 0.00, 0.72, 0.0, 0.00),
}


def _disk(xx, yy, cx, cy, radius, sharpness=60.0):
    """Soft-edged disk mask in [0, 1]; coordinates in [-1, 1] face units."""
    d = np.hypot(xx - cx, yy - cy)
    return 1.0 / (1.0 + np.exp(sharpness * (d - radius)))


def _stroke(xx, yy, x0, y0, x1, y1, width):
    """Soft line segment from (x0, y0) to (x1, y1)."""
    dx, dy = x1 - x0, y1 - y0
    length_sq = dx * dx + dy * dy
    if length_sq < 1e-12:
        return _disk(xx, yy, x0, y0, width)
    t = np.clip(((xx - x0) * dx + (yy - y0) * dy) / length_sq, 0.0, 1.0)
    px, py = x0 + t * dx, y0 + t * dy
    d = np.hypot(xx - px, yy - py)
    return 1.0 / (1.0 + np.exp(60.0 * (d - width)))


def render_face(identity: IdentityParams, emotion: EmotionLabel, size: int = IMAGE_SIZE) -> np.ndarray:
    """Render one face as a (size, size) float image in [0, 1].

    Purely deterministic: same identity and emotion give the same pixels.
    """
    emotion = EmotionLabel(emotion)
    angle, brow_raise, aperture, curve, opening = _EXPRESSION_GEOMETRY[emotion]

    # pixel centers mapped to [-1, 1]; x grows right, y grows down
    coords = (np.arange(size) + 0.5) / size * 2.0 - 1.0
    xx, yy = np.meshgrid(coords, coords)

    img = np.full((size, size), 0.92)

    # head: filled ellipse, slightly darker than background, dark outline
    ex = xx / identity.face_width
    ey = yy / identity.face_height
    r = np.hypot(ex, ey)
    head = 1.0 / (1.0 + np.exp(40.0 * (r - 1.0)))
    img = img * (1 - head) + 0.80 * head
    outline = np.exp(-((r - 1.0) ** 2) / (2 * 0.03**2))
    img = img * (1 - outline) + 0.25 * outline

    ink = identity.feature_darkness
    dark = 0.92 - 0.9 * ink  # feature gray level

    def paint(mask, level=dark):
        nonlocal img
        img = img * (1 - mask) + level * mask

    eye_y = -identity.eye_height
    for side in (-1, 1):
        eye_x = side * identity.eye_spacing

        # eye: white sclera, pupil sized by eyelid aperture
        paint(_disk(xx, yy, eye_x, eye_y, identity.eye_size), 0.97)
        pupil_r = identity.eye_size * (0.25 + 0.45 * aperture)
        paint(_disk(xx, yy, eye_x, eye_y, pupil_r), dark)
        if aperture < 0.6:
            # lid: flat stroke across the upper eye
            lid_y = eye_y - identity.eye_size * (2 * aperture - 0.6)
            paint(_stroke(xx, yy, eye_x - identity.eye_size, lid_y,
                          eye_x + identity.eye_size, lid_y, 0.02))

        # brow: straight stroke above the eye, inner end tilted by angle
        by = eye_y - identity.eye_size - 0.08 - 0.15 * brow_raise
        half = identity.brow_length / 2
        tilt = np.tan(angle) * half
        inner_x, outer_x = eye_x - side * half, eye_x + side * half
        paint(_stroke(xx, yy, inner_x, by - tilt, outer_x, by + tilt, 0.025))

    # mouth: parabolic arc, positive curve bends the center downward in
    # image coordinates (a smile); opening widens it into a lens
    mw = identity.mouth_width
    my = identity.mouth_height
    mx = np.clip(xx / mw, -1.0, 1.0)
    arc_y = my + curve * 0.15 * (1.0 - mx**2)
    gap = 0.02 + 0.10 * opening * (1.0 - mx**2)
    inside_x = np.abs(xx) <= mw
    dist = np.abs(yy - arc_y)
    mouth = inside_x * (1.0 / (1.0 + np.exp(60.0 * (dist - gap))))
    paint(mouth)

    return np.clip(img, 0.0, 1.0)


def add_noise(image: np.ndarray, noise_level: float, rng) -> np.ndarray:
    """Additive Gaussian pixel noise with std noise_level, clipped to [0, 1]."""
    image = check_image(image)
    if not np.isfinite(noise_level) or noise_level < 0:
        raise ValueError(f"noise_level must be >= 0, got {noise_level!r}")
    if noise_level == 0:
        return image.copy()
    noisy = image + as_rng(rng).normal(0.0, noise_level, image.shape)
    return np.clip(noisy, 0.0, 1.0)


def pgm_bytes(image: np.ndarray) -> bytes:
    """A [0, 1] float image as the bytes of an 8-bit binary PGM (P5)."""
    image = check_image(image)
    data = np.round(image * 255.0).astype(np.uint8)
    header = f"P5\n{image.shape[1]} {image.shape[0]}\n255\n"
    return header.encode("ascii") + data.tobytes()


def write_pgm(path, image: np.ndarray) -> None:
    Path(path).write_bytes(pgm_bytes(image))


def parse_pgm(raw: bytes, source: str = "<bytes>") -> np.ndarray:
    """Binary PGM bytes back to floats in [0, 1]; comments are tolerated."""
    if not raw.startswith(b"P5"):
        raise ValueError(f"{source}: not a binary PGM (missing P5 magic)")
    # header = magic, width, height, maxval as whitespace-separated tokens,
    # with optional '#' comment lines; pixel data starts one byte after maxval
    tokens, pos = [], 2
    while len(tokens) < 3:
        m = re.match(rb"(?:\s+|\s*#[^\n]*\n)*(\d+)", raw[pos:])
        if m is None:
            raise ValueError(f"{source}: malformed PGM header")
        tokens.append(int(m.group(1)))
        pos += m.end()
    width, height, maxval = tokens
    if maxval != 255:
        raise ValueError(f"{source}: expected maxval 255, got {maxval}")
    pos += 1  # single whitespace byte before the raster
    expected = width * height
    available = max(len(raw) - pos, 0)
    pixels = np.frombuffer(raw, np.uint8, count=min(expected, available), offset=pos)
    if pixels.size != expected:
        raise ValueError(f"{source}: truncated pixel data")
    return pixels.reshape(height, width).astype(np.float64) / 255.0


def read_pgm(path) -> np.ndarray:
    return parse_pgm(Path(path).read_bytes(), source=str(path))


@dataclass(frozen=True)
class ManifestEntry:
    file_name: str
    label: EmotionLabel
    identity_seed: int
    noise_level: float


def write_manifest(path, entries) -> None:
    """Tab-separated manifest: file name, label code, identity seed, noise level."""
    lines = ["file_name\tlabel\tidentity_seed\tnoise_level"]
    for e in entries:
        lines.append(f"{e.file_name}\t{int(e.label)}\t{e.identity_seed}\t{e.noise_level:.12g}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def read_manifest(path):
    text = Path(path).read_text(encoding="ascii")
    lines = [ln for ln in text.split("\n") if ln]
    if not lines or lines[0].split("\t") != ["file_name", "label", "identity_seed", "noise_level"]:
        raise ValueError(f"{path}: bad manifest header")
    entries = []
    for ln in lines[1:]:
        name, label, seed, noise = ln.split("\t")
        entries.append(ManifestEntry(name, EmotionLabel(int(label)), int(seed), float(noise)))
    return entries


def generate_dataset(out_dir, n_images: int, seed: int, noise_level: float = 0.03,
                     n_identities: int = 40):
    """Render a labeled PGM dataset plus manifest under out_dir.

    Labels cycle through the seven emotions so classes stay balanced;
    identities cycle through n_identities seeds derived from the dataset
    seed. Returns the manifest entries.
    """
    if n_images < 1:
        raise ValueError(f"n_images must be positive, got {n_images}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = as_rng(seed)
    identity_seeds = [int(s) for s in rng.integers(0, 2**31 - 1, size=n_identities)]

    entries = []
    for i in range(n_images):
        label = EmotionLabel(i % N_EMOTIONS)
        identity_seed = identity_seeds[i % n_identities]
        img = render_face(IdentityParams.from_seed(identity_seed), label)
        img = add_noise(img, noise_level, rng)
        name = f"face_{i:05d}.pgm"
        write_pgm(out_dir / name, img)
        entries.append(ManifestEntry(name, label, identity_seed, noise_level))
    write_manifest(out_dir / "manifest.tsv", entries)
    return entries


def load_dataset(data_dir):
    """Load every manifest entry as (images (n, 64, 64), labels (n,))."""
    data_dir = Path(data_dir)
    entries = read_manifest(data_dir / "manifest.tsv")
    images = np.stack([read_pgm(data_dir / e.file_name) for e in entries])
    labels = np.array([int(e.label) for e in entries], dtype=np.int64)
    return images, labels
