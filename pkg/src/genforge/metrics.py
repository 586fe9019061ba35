"""Generation-quality metrics: set similarity, diversity, and sharpness.

All pairwise metrics are averaged per pixel (1 / (H * W)) and over both
index sets, so values are comparable across image and set sizes. The
pairwise kernels run over fixed-size blocks with a fixed schedule, which
keeps results bitwise deterministic and within float tolerance of the
naive reference loops.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, ShapeError
from .imageset import ImageSet

_BLOCK = 64


@dataclass(frozen=True)
class ReconstructionEval:
    """Per-pair reconstruction error plus sharpness of both sets."""

    mse_mean: float
    mse_std: float
    laplace_originals: tuple[float, float]
    laplace_reconstructions: tuple[float, float]

    def to_dict(self) -> dict:
        return {
            "mse_mean": self.mse_mean,
            "mse_std": self.mse_std,
            "laplace_originals": {"mean": self.laplace_originals[0], "std": self.laplace_originals[1]},
            "laplace_reconstructions": {
                "mean": self.laplace_reconstructions[0],
                "std": self.laplace_reconstructions[1],
            },
        }


@dataclass(frozen=True)
class MetricReport:
    """The four generation metrics, optionally with reconstruction stats."""

    dataset_similarity: float
    isd: float
    min_isd: float
    laplace_mean: float
    laplace_std: float
    n_samples: int
    n_originals: int
    reconstruction: ReconstructionEval | None = None

    def to_dict(self) -> dict:
        out = {
            "dataset_similarity": self.dataset_similarity,
            "isd": self.isd,
            "min_isd": self.min_isd,
            "laplace": {"mean": self.laplace_mean, "std": self.laplace_std},
            "n_samples": self.n_samples,
            "n_originals": self.n_originals,
        }
        if self.reconstruction is not None:
            out["reconstruction"] = self.reconstruction.to_dict()
        return out


def _validate_unit_range(image_set: ImageSet, name: str) -> None:
    lo, hi = image_set.images.min(), image_set.images.max()
    if lo < 0.0 or hi > 1.0:
        raise InvalidInputError(f"{name} must lie in [0, 1]; found range [{lo}, {hi}]")


def _flat(image_set: ImageSet) -> np.ndarray:
    return image_set.images.reshape(len(image_set), -1)


def _pairwise_ssq(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Blocked matrix of sum((a_i - b_j)^2) over pixels, shape (len(a), len(b))."""
    out = np.empty((a.shape[0], b.shape[0]))
    for i in range(0, a.shape[0], _BLOCK):
        ai = a[i : i + _BLOCK]
        for j in range(0, b.shape[0], _BLOCK):
            bj = b[j : j + _BLOCK]
            diff = ai[:, None, :] - bj[None, :, :]
            out[i : i + _BLOCK, j : j + _BLOCK] = np.einsum("ijk,ijk->ij", diff, diff)
    return out


def dataset_similarity(samples: ImageSet, originals: ImageSet) -> float:
    """Mean per-pixel squared distance over all sample-original pairs.

    Smaller values mean the generated set sits closer to the originals.
    """
    if (samples.height, samples.width) != (originals.height, originals.width):
        raise ShapeError(
            f"sample images are {samples.height}x{samples.width}, "
            f"originals {originals.height}x{originals.width}"
        )
    _validate_unit_range(samples, "samples")
    _validate_unit_range(originals, "originals")
    ssq = _pairwise_ssq(_flat(samples), _flat(originals))
    per_pixel = samples.height * samples.width
    return float(ssq.sum() / (len(samples) * len(originals) * per_pixel))


def intra_sample_diversity(samples: ImageSet) -> float:
    """Mean per-pixel squared distance over ordered pairs of distinct samples.

    Zero exactly when every sample is identical.
    """
    if len(samples) < 2:
        raise InvalidInputError(f"need at least 2 samples, got {len(samples)}")
    _validate_unit_range(samples, "samples")
    flat = _flat(samples)
    ssq = _pairwise_ssq(flat, flat)
    off_diag = ssq.sum() - np.trace(ssq)
    n = len(samples)
    return float(off_diag / (n * (n - 1) * samples.height * samples.width))


def min_intra_sample_diversity(samples: ImageSet) -> float:
    """Mean per-pixel squared distance from each sample to its nearest other.

    Low values flag redundancy: clusters of near-duplicate samples.
    """
    if len(samples) < 2:
        raise InvalidInputError(f"need at least 2 samples, got {len(samples)}")
    _validate_unit_range(samples, "samples")
    flat = _flat(samples)
    ssq = _pairwise_ssq(flat, flat)
    np.fill_diagonal(ssq, np.inf)
    nearest = ssq.min(axis=1)
    return float(nearest.mean() / (samples.height * samples.width))


def laplace_sharpness(image: np.ndarray) -> float:
    """Population variance of the four-neighbor Laplacian over the valid region.

    Constant images score 0; the score scales with the square of any
    intensity scaling.
    """
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2 or image.shape[0] < 3 or image.shape[1] < 3:
        raise InvalidInputError(f"image must be at least 3x3, got shape {image.shape}")
    response = (
        image[:-2, 1:-1]
        + image[2:, 1:-1]
        + image[1:-1, :-2]
        + image[1:-1, 2:]
        - 4.0 * image[1:-1, 1:-1]
    )
    return float(response.var())


def laplace_aggregate(image_set: ImageSet) -> tuple[float, float]:
    """Mean and population std of the per-image sharpness scores."""
    scores = np.array([laplace_sharpness(im) for im in image_set.images])
    return float(scores.mean()), float(scores.std())


def reconstruction_eval(originals: ImageSet, reconstructions: ImageSet) -> ReconstructionEval:
    """Paired per-image MSE statistics plus sharpness of both sets."""
    if len(originals) != len(reconstructions):
        raise InvalidInputError(
            f"{len(originals)} originals vs {len(reconstructions)} reconstructions"
        )
    if originals.images.shape != reconstructions.images.shape:
        raise ShapeError(
            f"shape mismatch: {originals.images.shape} vs {reconstructions.images.shape}"
        )
    per_pair = ((originals.images - reconstructions.images) ** 2).mean(axis=(1, 2))
    return ReconstructionEval(
        mse_mean=float(per_pair.mean()),
        mse_std=float(per_pair.std()),
        laplace_originals=laplace_aggregate(originals),
        laplace_reconstructions=laplace_aggregate(reconstructions),
    )


def evaluate_all(
    samples: ImageSet,
    originals: ImageSet,
    reconstructions: ImageSet | None = None,
) -> MetricReport:
    """Assemble the full metric report; reconstruction stats are optional."""
    laplace_mean, laplace_std = laplace_aggregate(samples)
    return MetricReport(
        dataset_similarity=dataset_similarity(samples, originals),
        isd=intra_sample_diversity(samples),
        min_isd=min_intra_sample_diversity(samples),
        laplace_mean=laplace_mean,
        laplace_std=laplace_std,
        n_samples=len(samples),
        n_originals=len(originals),
        reconstruction=None
        if reconstructions is None
        else reconstruction_eval(originals, reconstructions),
    )
