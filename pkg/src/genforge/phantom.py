"""Randomized brain-like phantom images used in place of clinical data.

Each phantom is one bright filled ellipse (the "brain") with one or two
darker interior ellipses (the "ventricles"), modulated by a smooth
low-frequency texture plus additive Gaussian noise, squashed into [0, 1].
All geometry and intensity parameters are drawn from a single seeded
generator, so the output is a pure function of (n, size, seed).
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidInputError
from .imageset import ImageSet

# Geometry/intensity ranges, relative to the image side where applicable.
BRAIN_AXES = (0.35, 0.42)
VENTRICLE_AXES = (0.05, 0.12)
VENTRICLE_OFFSET = 0.07
CENTER_JITTER = 0.01
BRAIN_LEVEL = (0.74, 0.88)
VENTRICLE_FACTOR = (0.30, 0.45)
BACKGROUND_LEVEL = 0.03
TEXTURE_AMPLITUDE = 0.13
NOISE_STD = 0.02
EDGE_SOFTNESS = 0.35  # pixels


def _ellipse_mask(xx, yy, cx, cy, ax, ay, angle):
    """Soft-edged indicator of an ellipse; 1 inside, 0 outside."""
    ca, sa = np.cos(angle), np.sin(angle)
    u = (xx - cx) * ca + (yy - cy) * sa
    v = -(xx - cx) * sa + (yy - cy) * ca
    # signed distance proxy in pixels: positive inside
    r = np.sqrt((u / ax) ** 2 + (v / ay) ** 2)
    margin = (1.0 - r) * min(ax, ay)
    return 1.0 / (1.0 + np.exp(-margin / EDGE_SOFTNESS))


def _smooth_texture(rng, xx, yy, size):
    """Sum of two random low-frequency cosine waves, zero-mean-ish."""
    field = np.zeros_like(xx)
    for _ in range(2):
        freq = rng.uniform(1.0, 3.0)
        theta = rng.uniform(0.0, np.pi)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        proj = (xx * np.cos(theta) + yy * np.sin(theta)) / size
        field += np.cos(2.0 * np.pi * freq * proj + phase)
    return 1.0 + TEXTURE_AMPLITUDE * field / 2.0


def phantom_generate(n: int, size: int, seed: int) -> ImageSet:
    """Generate ``n`` phantom images of shape size x size.

    Deterministic for a fixed (n, size, seed); pixel values lie in [0, 1].
    """
    if n < 1:
        raise InvalidInputError(f"need at least one image, got n={n}")
    if size < 8:
        raise InvalidInputError(f"size must be at least 8 pixels, got {size}")
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    images = np.empty((n, size, size))
    for i in range(n):
        cx = size / 2.0 + rng.uniform(-CENTER_JITTER, CENTER_JITTER) * size
        cy = size / 2.0 + rng.uniform(-CENTER_JITTER, CENTER_JITTER) * size
        ax = rng.uniform(*BRAIN_AXES) * size
        ay = rng.uniform(*BRAIN_AXES) * size
        angle = rng.uniform(0.0, np.pi)
        brain = _ellipse_mask(xx, yy, cx, cy, ax, ay, angle)
        level = rng.uniform(*BRAIN_LEVEL)

        image = BACKGROUND_LEVEL + level * brain * _smooth_texture(rng, xx, yy, size)

        for _ in range(rng.integers(1, 3)):
            vx = cx + rng.uniform(-VENTRICLE_OFFSET, VENTRICLE_OFFSET) * size
            vy = cy + rng.uniform(-VENTRICLE_OFFSET, VENTRICLE_OFFSET) * size
            vax = rng.uniform(*VENTRICLE_AXES) * size
            vay = rng.uniform(*VENTRICLE_AXES) * size
            vangle = rng.uniform(0.0, np.pi)
            ventricle = _ellipse_mask(xx, yy, vx, vy, vax, vay, vangle)
            factor = rng.uniform(*VENTRICLE_FACTOR)
            image *= 1.0 - (1.0 - factor) * ventricle * brain

        image += rng.normal(0.0, NOISE_STD, size=image.shape)
        images[i] = np.clip(image, 0.0, 1.0)
    return ImageSet(images, labels=("phantom",) * n)
