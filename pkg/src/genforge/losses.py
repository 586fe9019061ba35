"""Loss functions and latent-space plumbing for the four architectures.

Image arguments are Tensors shaped (H, W), (C, H, W) or (N, C, H, W);
reductions are means, so values are comparable across batch sizes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .errors import DomainError, ShapeError
from .tensor import Tensor


@dataclass
class LatentCode:
    """Diagonal-Gaussian posterior parameters: mu and log-variance.

    Both are Tensors of shape (d,) for a single code or (N, d) for a batch.
    """

    mu: Tensor
    logvar: Tensor

    def __post_init__(self):
        if self.mu.shape != self.logvar.shape:
            raise ShapeError(
                f"mu shape {self.mu.shape} != logvar shape {self.logvar.shape}"
            )
        if not np.all(np.isfinite(self.logvar.data)):
            raise ShapeError("logvar contains non-finite values")

    @property
    def dim(self) -> int:
        return self.mu.shape[-1]


def kl_gaussian(code: LatentCode) -> Tensor:
    """KL divergence from N(mu, diag(exp(logvar))) to the unit Gaussian.

    Closed form 0.5 * sum_i(mu_i^2 + sigma_i^2 - logvar_i - 1), always >= 0,
    zero exactly when mu = 0 and logvar = 0. Batched codes return the mean
    over the batch.
    """
    var = T.texp(code.logvar)
    terms = T.sub(T.sub(T.add(T.mul(code.mu, code.mu), var), code.logvar), Tensor(np.ones(code.mu.shape)))
    per_code = T.tsum(terms, axes=(-1,))
    if code.mu.data.ndim == 2:
        per_code = T.tmean(per_code)
    return T.mul(Tensor(0.5), per_code)


def reparameterize(code: LatentCode, eps: Tensor) -> Tensor:
    """z = mu + eps * exp(logvar / 2); gradients reach mu and logvar only."""
    if eps.shape != code.mu.shape:
        raise ShapeError(f"eps shape {eps.shape} != code shape {code.mu.shape}")
    sigma = T.texp(T.mul(Tensor(0.5), code.logvar))
    return T.add(code.mu, T.mul(Tensor(eps.data), sigma))


def mean_squared_error(x: Tensor, y: Tensor) -> Tensor:
    """Mean over all elements of the squared difference."""
    if x.shape != y.shape:
        raise ShapeError(f"image shapes differ: {x.shape} vs {y.shape}")
    diff = T.sub(x, y)
    return T.tmean(T.mul(diff, diff))


def vae_loss(x: Tensor, x_rec: Tensor, code: LatentCode, lambda_pix: float | None = None) -> Tensor:
    """KL term plus pixel reconstruction term, weighted by lambda_pix.

    The default weight is 0.025 * H * W so the (mean) pixel term carries the
    same relative weight regardless of image size.
    """
    if x.shape != x_rec.shape:
        raise ShapeError(f"image shapes differ: {x.shape} vs {x_rec.shape}")
    if lambda_pix is None:
        lambda_pix = 0.025 * x.shape[-2] * x.shape[-1]
    return T.add(kl_gaussian(code), T.mul(Tensor(lambda_pix), mean_squared_error(x, x_rec)))


# ---------------------------------------------------------------------------
# perceptual loss


class FeatureExtractor:
    """Fixed, randomly initialized conv net whose activations define a
    perceptual distance.

    Three 3x3 valid convolutions with leaky-ReLU taps; the weights are drawn
    once from the seed and never trained. Random fixed filters still impose
    spatial correlation on the comparison, which is all the perceptual loss
    needs at this scale.
    """

    CHANNELS = (4, 8, 8)

    def __init__(self, seed: int):
        self.seed = seed
        rng = np.random.default_rng(seed)
        self.kernels = []
        c_in = 1
        for c_out in self.CHANNELS:
            fan_in = c_in * 9
            k = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(c_out, c_in, 3, 3))
            self.kernels.append(Tensor(k))
            c_in = c_out

    @property
    def tap_layers(self) -> tuple[int, ...]:
        return tuple(range(len(self.kernels)))

    def forward(self, x: Tensor) -> list[Tensor]:
        """Return the activation after every conv+leaky-ReLU layer."""
        if x.data.ndim == 2:
            x = T.reshape(x, (1, 1) + x.shape)
        elif x.data.ndim == 3:
            x = T.reshape(x, (1,) + x.shape)
        taps = []
        for kernel in self.kernels:
            x = T.leaky_relu(T.conv2d(x, kernel, stride=1), 0.2)
            taps.append(x)
        return taps


def perceptual_loss(x: Tensor, x_rec: Tensor, psi: FeatureExtractor) -> Tensor:
    """Sum over tap layers of sum((psi(x) - psi(x_rec))^2) / (2 * H * W * C).

    Batched inputs average the per-layer term over the batch axis.
    """
    if x.shape != x_rec.shape:
        raise ShapeError(f"image shapes differ: {x.shape} vs {x_rec.shape}")
    taps_x = psi.forward(x)
    taps_r = psi.forward(x_rec)
    total = Tensor(0.0)
    for fx, fr in zip(taps_x, taps_r):
        n, c, h, w = fx.shape
        diff = T.sub(fx, fr)
        layer = T.mul(Tensor(1.0 / (2.0 * h * w * c * n)), T.tsum(T.mul(diff, diff)))
        total = T.add(total, layer)
    return total


# ---------------------------------------------------------------------------
# introspective losses


def hinge(value: Tensor) -> Tensor:
    """max(0, value); zero gradient when value < 0."""
    return T.maximum(value, Tensor(np.zeros(value.shape)))


def introvae_encoder_loss(
    x: Tensor,
    x_rec: Tensor,
    x_gen: Tensor,
    code_real: LatentCode,
    code_gen: LatentCode,
    m: float,
    alpha: float,
    beta: float,
) -> Tensor:
    """Encoder objective: pull real codes to the prior, push generated codes
    at least ``m`` away, and reconstruct.

    alpha * KL(code_real) + alpha * [m - KL(code_gen)]+ + beta * MSE(x, x_rec).
    The hinge contributes exactly zero gradient once KL(code_gen) > m.
    """
    if m <= 0:
        raise DomainError(f"margin m must be positive, got {m}")
    if x.shape != x_rec.shape or x.shape != x_gen.shape:
        raise ShapeError(
            f"image shapes differ: {x.shape}, {x_rec.shape}, {x_gen.shape}"
        )
    kl_real = kl_gaussian(code_real)
    kl_gen = kl_gaussian(code_gen)
    margin = hinge(T.sub(Tensor(float(m)), kl_gen))
    rec = mean_squared_error(x, x_rec)
    return T.add(
        T.add(T.mul(Tensor(alpha), kl_real), T.mul(Tensor(alpha), margin)),
        T.mul(Tensor(beta), rec),
    )


def introvae_generator_loss(
    x: Tensor,
    x_rec: Tensor,
    code_of_generated: LatentCode,
    alpha: float,
    beta: float,
) -> Tensor:
    """Generator objective: make generated codes look prior-like and
    reconstruct: alpha * KL(E(G(z))) + beta * MSE(x, x_rec)."""
    if x.shape != x_rec.shape:
        raise ShapeError(f"image shapes differ: {x.shape} vs {x_rec.shape}")
    return T.add(
        T.mul(Tensor(alpha), kl_gaussian(code_of_generated)),
        T.mul(Tensor(beta), mean_squared_error(x, x_rec)),
    )


# ---------------------------------------------------------------------------
# style normalization and adversarial values


def adain(x: Tensor, ys: Tensor, yb: Tensor) -> Tensor:
    """Adaptive instance normalization: ys * (x - mu) / sigma + yb per channel.

    ``x`` is (C, H, W) with (C,) styles, or (N, C, H, W) with (N, C) styles.
    """
    lead = x.shape[:-2]
    if ys.shape != lead or yb.shape != lead:
        raise ShapeError(f"style shapes {ys.shape}/{yb.shape} do not match input lead {lead}")
    mu, sigma = T.channel_stats(x)
    expand = lead + (1, 1)
    normalized = T.div(T.sub(x, T.reshape(mu, expand)), T.reshape(sigma, expand))
    return T.add(T.mul(T.reshape(ys, expand), normalized), T.reshape(yb, expand))


def gan_minmax_value(d_real: Tensor, d_fake: Tensor) -> Tensor:
    """mean(log d_real) + mean(log(1 - d_fake)) for probabilities in (0, 1).

    This is the classic adversarial value function; the style-based trainer
    uses the Wasserstein losses instead.
    """
    for name, t in (("d_real", d_real), ("d_fake", d_fake)):
        if np.any(t.data <= 0.0) or np.any(t.data >= 1.0):
            raise DomainError(f"{name} must lie strictly inside (0, 1)")
    one_minus = T.sub(Tensor(np.ones(d_fake.shape)), d_fake)
    return T.add(T.tmean(T.tlog(d_real)), T.tmean(T.tlog(one_minus)))


def wgan_losses(d_real: Tensor, d_fake: Tensor) -> tuple[Tensor, Tensor]:
    """Critic and generator objectives on unbounded scores, both minimized.

    loss_D = mean(d_real) - mean(d_fake); loss_G = mean(d_fake). Only the
    relative ordering of the scores matters, so the sign convention is
    internally consistent.
    """
    loss_d = T.sub(T.tmean(d_real), T.tmean(d_fake))
    loss_g = T.tmean(d_fake)
    return loss_d, loss_g
