"""Finite-difference verification of every differentiable primitive and loss.

Each check compares backward-pass gradients against central differences at
h = 1e-5 on small fixed-seed inputs kept away from kinks, and must come in
under a relative error of 1e-4. Hinge-inactivity checks instead assert the
measured gradient magnitude is zero within 1e-10.
"""

from __future__ import annotations

import numpy as np

from . import tensor as T
from .losses import (
    FeatureExtractor,
    LatentCode,
    adain,
    gan_minmax_value,
    introvae_encoder_loss,
    introvae_generator_loss,
    kl_gaussian,
    perceptual_loss,
    reparameterize,
    vae_loss,
    wgan_losses,
)
from .tensor import Tensor, backward, grad_check

REL_TOLERANCE = 1e-4
ZERO_TOLERANCE = 1e-10
STEP = 1e-5
KINK_MARGIN = 1e-3


def _away_from_kinks(rng, shape):
    data = rng.normal(size=shape)
    return np.where(np.abs(data) < KINK_MARGIN, KINK_MARGIN, data)


def _primitive_checks(rng):
    c33 = Tensor(rng.normal(size=(3, 3)))
    c344 = Tensor(rng.normal(size=(3, 4, 4)))
    c388 = Tensor(rng.normal(size=(3, 8, 8)))
    ones344 = Tensor(np.ones((3, 4, 4)))
    k213 = Tensor(rng.normal(size=(2, 1, 3, 3)))
    x166 = Tensor(rng.normal(size=(1, 6, 6)))
    w_mu = Tensor(rng.normal(size=(2,)))
    w_sig = Tensor(rng.normal(size=(2,)))

    def channel_stats_scalar(t):
        mu, sigma = T.channel_stats(t)
        return T.add(T.tsum(T.mul(mu, w_mu)), T.tsum(T.mul(sigma, w_sig)))

    return [
        ("add", lambda t: T.tsum(T.add(t, c344)), (3, 4, 4)),
        ("sub", lambda t: T.tsum(T.sub(c344, t)), (3, 4, 4)),
        ("mul", lambda t: T.tsum(T.mul(t, c344)), (3, 4, 4)),
        ("div", lambda t: T.tsum(T.div(c344, T.add(T.mul(t, t), ones344))), (3, 4, 4)),
        ("exp", lambda t: T.tsum(T.texp(t)), (3, 4, 4)),
        ("log", lambda t: T.tsum(T.tlog(T.add(T.mul(t, t), ones344))), (3, 4, 4)),
        ("sqrt", lambda t: T.tsum(T.tsqrt(T.add(T.mul(t, t), ones344))), (3, 4, 4)),
        ("sigmoid", lambda t: T.tsum(T.sigmoid(t)), (3, 4, 4)),
        ("mean", lambda t: T.tmean(T.mul(t, t)), (3, 4, 4)),
        ("reshape", lambda t: T.tsum(T.mul(T.reshape(t, (-1,)), T.reshape(t, (-1,)))), (3, 4, 4)),
        ("maximum", lambda t: T.tsum(T.maximum(t, c344)), (3, 4, 4)),
        ("leaky_relu", lambda t: T.tsum(T.leaky_relu(t, 0.2)), (3, 4, 4)),
        ("matmul_left", lambda t: T.tsum(T.matmul(t, c33)), (4, 3)),
        ("matmul_right", lambda t: T.tsum(T.matmul(c33, t)), (3, 2)),
        ("conv2d_stride1_input", lambda t: T.tsum(T.conv2d(t, k213, 1)), (1, 6, 6)),
        ("conv2d_stride2_input", lambda t: T.tsum(T.conv2d(t, k213, 2)), (1, 6, 6)),
        ("conv2d_kernel", lambda t: T.tsum(T.conv2d(x166, t, 1)), (2, 1, 3, 3)),
        ("upsample_nn", lambda t: T.tsum(T.mul(T.upsample_nn(t, 2), c388)), (3, 4, 4)),
        ("channel_stats", channel_stats_scalar, (2, 4, 4)),
    ]


def _loss_checks(rng):
    logvar5 = Tensor(rng.normal(size=(5,)) * 0.5)
    mu5 = Tensor(rng.normal(size=(5,)))
    eps5 = Tensor(rng.normal(size=(5,)))
    x44 = Tensor(rng.uniform(0.1, 0.9, size=(4, 4)))
    x_rec44 = Tensor(rng.uniform(0.1, 0.9, size=(4, 4)))
    x_gen44 = Tensor(rng.uniform(0.1, 0.9, size=(4, 4)))
    code_real = LatentCode(Tensor(rng.normal(size=(3,))), Tensor(rng.normal(size=(3,)) * 0.3))
    logvar3 = Tensor(np.zeros(3))
    psi = FeatureExtractor(seed=77)
    x16 = Tensor(rng.uniform(size=(16, 16)))
    ys2 = Tensor(rng.uniform(0.5, 1.5, size=(2,)))
    yb2 = Tensor(rng.normal(size=(2,)))
    x244 = Tensor(rng.normal(size=(2, 4, 4)))
    w244 = Tensor(rng.normal(size=(2, 4, 4)))
    scores5 = Tensor(rng.normal(size=(5,)))

    def reparam_scalar(t):
        z = reparameterize(LatentCode(t, logvar5), eps5)
        return T.tsum(T.mul(z, z))

    def vae_scalar(t):
        return vae_loss(x44, T.sigmoid(t), LatentCode(mu5, logvar5))

    def perceptual_scalar(t):
        return perceptual_loss(T.sigmoid(t), x16, psi)

    def intro_enc_active(t):
        # KL(code_gen) stays below m: hinge active and smooth
        return introvae_encoder_loss(
            x44, x_rec44, x_gen44, code_real, LatentCode(t, logvar3), 25.0, 0.25, 0.5
        )

    def intro_gen(t):
        return introvae_generator_loss(x44, T.sigmoid(t), code_real, 0.25, 0.5)

    def adain_x(t):
        return T.tsum(T.mul(adain(t, ys2, yb2), w244))

    def adain_ys(t):
        return T.tsum(T.mul(adain(x244, t, yb2), w244))

    def adain_yb(t):
        return T.tsum(T.mul(adain(x244, ys2, t), w244))

    def minmax_real(t):
        return gan_minmax_value(T.sigmoid(t), T.sigmoid(scores5))

    def minmax_fake(t):
        return gan_minmax_value(T.sigmoid(scores5), T.sigmoid(t))

    def wgan_d(t):
        loss_d, _ = wgan_losses(scores5, t)
        return loss_d

    def wgan_g(t):
        _, loss_g = wgan_losses(scores5, t)
        return loss_g

    return [
        ("kl_gaussian_mu", lambda t: kl_gaussian(LatentCode(t, logvar5)), (5,)),
        ("kl_gaussian_logvar", lambda t: kl_gaussian(LatentCode(mu5, t)), (5,)),
        ("reparameterize", reparam_scalar, (5,)),
        ("vae_loss", vae_scalar, (4, 4)),
        ("perceptual_loss", perceptual_scalar, (16, 16)),
        ("introvae_encoder_active_hinge", intro_enc_active, (3,)),
        ("introvae_generator", intro_gen, (4, 4)),
        ("adain_x", adain_x, (2, 4, 4)),
        ("adain_ys", adain_ys, (2,)),
        ("adain_yb", adain_yb, (2,)),
        ("gan_minmax_real", minmax_real, (5,)),
        ("gan_minmax_fake", minmax_fake, (5,)),
        ("wgan_critic", wgan_d, (5,)),
        ("wgan_generator", wgan_g, (5,)),
    ]


def _style_path_check(rng):
    """Composition check: style mapping into adain into a reduction."""
    w0 = Tensor(rng.normal(size=(4, 4)) * 0.5)
    b0 = Tensor(rng.normal(size=(4,)) * 0.1)
    ws = Tensor(rng.normal(size=(4, 2)) * 0.5)
    wb = Tensor(rng.normal(size=(4, 2)) * 0.5)
    x = Tensor(rng.normal(size=(1, 2, 4, 4)))
    weights = Tensor(rng.normal(size=(1, 2, 4, 4)))

    def f(t):
        hidden = T.leaky_relu(T.add(T.matmul(t, w0), b0), 0.2)
        ys = T.add(Tensor(np.ones((1, 2))), T.matmul(hidden, ws))
        yb = T.matmul(hidden, wb)
        return T.tsum(T.mul(adain(x, ys, yb), weights))

    return [("style_map_adain_path", f, (1, 4))]


def _inactive_hinge_gradient(rng) -> float:
    """Gradient magnitude through the hinge once KL(code_gen) > m + 1e-3."""
    x = Tensor(rng.uniform(size=(4, 4)))
    x_rec = Tensor(rng.uniform(size=(4, 4)))
    x_gen = Tensor(rng.uniform(size=(4, 4)))
    code_real = LatentCode(Tensor(rng.normal(size=(3,))), Tensor(np.zeros(3)))
    mu = Tensor(np.array([3.0, -3.0, 2.0]), requires_grad=True)
    logvar = Tensor(np.zeros(3), requires_grad=True)
    code_gen = LatentCode(mu, logvar)
    m = kl_gaussian(code_gen).item() - 1e-3  # KL exceeds m by the margin
    loss = introvae_encoder_loss(x, x_rec, x_gen, code_real, code_gen, m, 0.25, 0.5)
    backward(loss)
    grads = [np.abs(t.grad).max() if t.grad is not None else 0.0 for t in (mu, logvar)]
    return float(max(grads))


def run_all(seed: int = 0) -> list[dict]:
    """Run every check; returns one record per check with its error and verdict."""
    rng = np.random.default_rng(seed)
    results = []
    checks = _primitive_checks(rng) + _loss_checks(rng) + _style_path_check(rng)
    for name, f, shape in checks:
        x = Tensor(_away_from_kinks(rng, shape))
        err = grad_check(f, x, h=STEP)
        results.append(
            {"check": name, "kind": "relative", "error": err, "passed": err < REL_TOLERANCE}
        )
    zero_err = _inactive_hinge_gradient(rng)
    results.append(
        {
            "check": "introvae_inactive_hinge_zero_gradient",
            "kind": "absolute",
            "error": zero_err,
            "passed": zero_err < ZERO_TOLERANCE,
        }
    )
    return results
