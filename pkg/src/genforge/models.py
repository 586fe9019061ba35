"""The four generative architectures: construction, training, sampling.

All four share the same conv encoder / upsampling decoder skeleton at desk
scale (16x16 or 32x32 inputs). Convolutions are valid (unpadded), so layer
counts are derived from the image size rather than fixed. Per-channel
normalization with a learned affine stands in for batch normalization.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import tensor as T
from .errors import (
    FormatError,
    InvalidInputError,
    ShapeError,
    TrainingDivergedError,
    UnsupportedOperationError,
)
from .imageset import ImageSet
from .losses import (
    FeatureExtractor,
    LatentCode,
    adain,
    hinge,
    introvae_encoder_loss,
    introvae_generator_loss,
    kl_gaussian,
    mean_squared_error,
    perceptual_loss,
    reparameterize,
    wgan_losses,
)
from .tensor import AdamState, Tensor, adam_step, backward, he_normal

ARCHITECTURES = ("vanilla_vae", "dfc_vae", "intro_vae", "style_gan")
SUPPORTED_SIZES = (16, 32)
LRELU_SLOPE = 0.2

DEFAULT_HYPER: dict[str, dict] = {
    "vanilla_vae": {
        "latent_dim": 8,
        "lr": 1e-4,
        "batch_size": 64,
        "steps": 2000,
        "lambda_pix": None,  # None: 0.025 * H * W
    },
    "dfc_vae": {
        "latent_dim": 8,
        "lr": 1e-4,
        "batch_size": 64,
        "steps": 2000,
        "perceptual_weight": 1e-2,
        "feature_seed": 1234,
    },
    "intro_vae": {
        "latent_dim": 16,
        "lr": 2e-4,
        "batch_size": 8,
        "steps": 3000,
        "m": 1.0,
        "alpha": 0.25,
        "beta": 0.5,
        # also apply the encoder's KL margin to reconstructions, not just
        # prior samples (off by default: the base objective hinges only
        # generated images)
        "hinge_reconstructions": False,
    },
    "style_gan": {
        "latent_dim": 32,
        "lr": 1e-4,
        "batch_size": 8,
        "steps": 3000,
        "clip_value": 0.05,
        "clip_enabled": True,
    },
}


@dataclass
class ModelParams:
    """Named parameter tensors plus hyperparameters and optimizer state."""

    architecture: str
    image_size: int
    params: dict[str, Tensor]
    hyper: dict
    groups: dict[str, list[str]]
    opt: dict[str, AdamState] = field(default_factory=dict)

    def __post_init__(self):
        for group, names in self.groups.items():
            if group not in self.opt:
                self.opt[group] = AdamState([self.params[n] for n in names])

    def group_params(self, group: str) -> list[Tensor]:
        return [self.params[n] for n in self.groups[group]]

    @property
    def latent_dim(self) -> int:
        return self.hyper["latent_dim"]


@dataclass
class TrainingLog:
    """Per-step loss records; serializable as JSON lines."""

    entries: list[dict]

    def to_jsonl(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for entry in self.entries:
                fh.write(json.dumps(entry) + "\n")

    def series(self, key: str) -> np.ndarray:
        return np.array([e[key] for e in self.entries if key in e])

    def smoothed(self, key: str = "loss", window: int = 100) -> np.ndarray:
        values = self.series(key)
        if len(values) < window:
            window = max(1, len(values))
        kernel = np.ones(window) / window
        return np.convolve(values, kernel, mode="valid")


# ---------------------------------------------------------------------------
# layer plans


def _encoder_plan(image_size: int) -> tuple[list[tuple[int, int]], int, int]:
    """4x4 stride-2 valid convs applied while the spatial size allows it.

    Returns (list of (c_in, c_out), final channels, final spatial size).
    """
    convs = []
    h, c_in, c_out = image_size, 1, 8
    while h >= 6:
        convs.append((c_in, c_out))
        h = (h - 4) // 2 + 1
        c_in, c_out = c_out, min(c_out * 2, 32)
    return convs, c_in, h


def _decoder_plan(image_size: int) -> tuple[int, list[tuple[int, int]]]:
    """Upsample-by-2 + 3x3 valid conv rounds from a 4x4 seed feature map.

    Each round maps spatial h -> 2h - 2 and a final 3x3 conv trims to the
    target size, so `rounds = log2(size) - 1` lands exactly on 16 or 32.
    """
    rounds = int(round(np.log2(image_size))) - 1
    chans = [16] * (rounds - 2) + [8, 8]
    convs = []
    c_in = 16
    for c_out in chans:
        convs.append((c_in, c_out))
        c_in = c_out
    return rounds, convs


# ---------------------------------------------------------------------------
# parameter construction


def _init_conv(rng, params, name, c_in, c_out, k):
    params[f"{name}.w"] = he_normal(rng, (c_out, c_in, k, k), fan_in=c_in * k * k)
    params[f"{name}.g"] = Tensor(np.ones(c_out), requires_grad=True)
    params[f"{name}.b"] = Tensor(np.zeros(c_out), requires_grad=True)


def _init_fc(rng, params, name, n_in, n_out):
    params[f"{name}.w"] = he_normal(rng, (n_in, n_out), fan_in=n_in)
    params[f"{name}.b"] = Tensor(np.zeros(n_out), requires_grad=True)


def _init_encoder(rng, params, image_size, latent_dim, prefix="enc"):
    convs, c_final, h_final = _encoder_plan(image_size)
    for i, (c_in, c_out) in enumerate(convs):
        _init_conv(rng, params, f"{prefix}.conv{i}", c_in, c_out, 4)
    flat = c_final * h_final * h_final
    _init_fc(rng, params, f"{prefix}.fc_mu", flat, latent_dim)
    _init_fc(rng, params, f"{prefix}.fc_logvar", flat, latent_dim)


def _init_decoder(rng, params, image_size, latent_dim, prefix="dec"):
    rounds, convs = _decoder_plan(image_size)
    _init_fc(rng, params, f"{prefix}.fc", latent_dim, 16 * 4 * 4)
    for i, (c_in, c_out) in enumerate(convs):
        _init_conv(rng, params, f"{prefix}.conv{i}", c_in, c_out, 3)
    params[f"{prefix}.out.w"] = he_normal(rng, (1, convs[-1][1], 3, 3), fan_in=convs[-1][1] * 9)
    params[f"{prefix}.out.b"] = Tensor(np.zeros(1), requires_grad=True)


def _init_critic(rng, params, image_size, prefix="cr"):
    convs, c_final, h_final = _encoder_plan(image_size)
    for i, (c_in, c_out) in enumerate(convs):
        params[f"{prefix}.conv{i}.w"] = he_normal(rng, (c_out, c_in, 4, 4), fan_in=c_in * 16)
        params[f"{prefix}.conv{i}.b"] = Tensor(np.zeros(c_out), requires_grad=True)
    _init_fc(rng, params, f"{prefix}.fc", c_final * h_final * h_final, 1)


def _init_stylegan(rng, params, image_size, style_dim):
    _init_fc(rng, params, "map.fc0", style_dim, style_dim)
    _init_fc(rng, params, "map.fc1", style_dim, style_dim)
    rounds, convs = _decoder_plan(image_size)
    params["syn.const"] = Tensor(rng.normal(0.0, 1.0, size=(16, 4, 4)), requires_grad=True)
    for i, (c_in, c_out) in enumerate(convs):
        params[f"syn.conv{i}.w"] = he_normal(rng, (c_out, c_in, 3, 3), fan_in=c_in * 9)
        params[f"syn.noise{i}"] = Tensor(np.zeros(1), requires_grad=True)
        _init_fc(rng, params, f"syn.style{i}.s", style_dim, c_out)
        _init_fc(rng, params, f"syn.style{i}.b", style_dim, c_out)
    params["syn.out.w"] = he_normal(rng, (1, convs[-1][1], 3, 3), fan_in=convs[-1][1] * 9)
    params["syn.out.b"] = Tensor(np.zeros(1), requires_grad=True)


def build_model(architecture: str, image_size: int = 16, seed: int = 0, **overrides) -> ModelParams:
    """Construct an initialized model; deterministic for a fixed seed.

    Hyperparameter overrides (latent_dim, lr, ...) replace the defaults for
    the chosen architecture.
    """
    if architecture not in ARCHITECTURES:
        raise InvalidInputError(f"unknown architecture {architecture!r}; choose from {ARCHITECTURES}")
    if image_size not in SUPPORTED_SIZES:
        raise InvalidInputError(f"image_size must be one of {SUPPORTED_SIZES}, got {image_size}")
    hyper = dict(DEFAULT_HYPER[architecture])
    unknown = set(overrides) - set(hyper)
    if unknown:
        raise InvalidInputError(f"unknown hyperparameters for {architecture}: {sorted(unknown)}")
    hyper.update(overrides)

    rng = np.random.default_rng(seed)
    params: dict[str, Tensor] = {}
    if architecture in ("vanilla_vae", "dfc_vae", "intro_vae"):
        _init_encoder(rng, params, image_size, hyper["latent_dim"])
        _init_decoder(rng, params, image_size, hyper["latent_dim"])
        if architecture == "intro_vae":
            groups = {
                "encoder": [n for n in params if n.startswith("enc.")],
                "decoder": [n for n in params if n.startswith("dec.")],
            }
        else:
            groups = {"all": list(params)}
    else:
        _init_stylegan(rng, params, image_size, hyper["latent_dim"])
        _init_critic(rng, params, image_size)
        groups = {
            "generator": [n for n in params if n.startswith(("map.", "syn."))],
            "critic": [n for n in params if n.startswith("cr.")],
        }
    return ModelParams(architecture, image_size, params, hyper, groups)


# ---------------------------------------------------------------------------
# forward passes


def _affine_norm(x: Tensor, gain: Tensor, bias: Tensor) -> Tensor:
    """Standardize each channel over its spatial extent, then scale/shift."""
    mu, sigma = T.channel_stats(x)
    expand = x.shape[:-2] + (1, 1)
    normalized = T.div(T.sub(x, T.reshape(mu, expand)), T.reshape(sigma, expand))
    c = x.shape[-3]
    return T.add(T.mul(normalized, T.reshape(gain, (c, 1, 1))), T.reshape(bias, (c, 1, 1)))


def encode(model: ModelParams, x: Tensor, prefix: str = "enc") -> LatentCode:
    """Map an (N, 1, H, W) image batch to a batched latent code."""
    p = model.params
    h = x
    i = 0
    while f"{prefix}.conv{i}.w" in p:
        h = T.conv2d(h, p[f"{prefix}.conv{i}.w"], stride=2)
        h = _affine_norm(h, p[f"{prefix}.conv{i}.g"], p[f"{prefix}.conv{i}.b"])
        h = T.leaky_relu(h, LRELU_SLOPE)
        i += 1
    flat = T.reshape(h, (h.shape[0], -1))
    mu = T.add(T.matmul(flat, p[f"{prefix}.fc_mu.w"]), p[f"{prefix}.fc_mu.b"])
    logvar = T.add(T.matmul(flat, p[f"{prefix}.fc_logvar.w"]), p[f"{prefix}.fc_logvar.b"])
    return LatentCode(mu, logvar)


def decode(model: ModelParams, z: Tensor, prefix: str = "dec") -> Tensor:
    """Map an (N, d) latent batch to (N, 1, H, W) images in [0, 1]."""
    p = model.params
    n = z.shape[0]
    h = T.leaky_relu(T.add(T.matmul(z, p[f"{prefix}.fc.w"]), p[f"{prefix}.fc.b"]), LRELU_SLOPE)
    h = T.reshape(h, (n, 16, 4, 4))
    i = 0
    while f"{prefix}.conv{i}.w" in p:
        h = T.upsample_nn(h, 2)
        h = T.conv2d(h, p[f"{prefix}.conv{i}.w"], stride=1)
        h = _affine_norm(h, p[f"{prefix}.conv{i}.g"], p[f"{prefix}.conv{i}.b"])
        h = T.leaky_relu(h, LRELU_SLOPE)
        i += 1
    h = T.add(T.conv2d(h, p[f"{prefix}.out.w"], stride=1), p[f"{prefix}.out.b"])
    return T.sigmoid(h)


def style_map(model: ModelParams, z: Tensor) -> Tensor:
    """Two fully connected layers mapping latent draws to style vectors."""
    p = model.params
    h = T.leaky_relu(T.add(T.matmul(z, p["map.fc0.w"]), p["map.fc0.b"]), LRELU_SLOPE)
    return T.add(T.matmul(h, p["map.fc1.w"]), p["map.fc1.b"])


def synthesize(model: ModelParams, z: Tensor, noises: list[np.ndarray]) -> Tensor:
    """Style-based generator: constant input restyled per layer.

    ``noises`` holds one (N, 1, H_i, W_i) array per synthesis layer, injected
    after the convolution through a learned per-layer scale.
    """
    p = model.params
    n = z.shape[0]
    w = style_map(model, z)
    h = T.mul(Tensor(np.ones((n, 1, 1, 1))), p["syn.const"])
    i = 0
    while f"syn.conv{i}.w" in p:
        h = T.upsample_nn(h, 2)
        h = T.conv2d(h, p[f"syn.conv{i}.w"], stride=1)
        if noises[i].shape != (n, 1) + h.shape[-2:]:
            raise ShapeError(f"noise {i} has shape {noises[i].shape}, expected {(n, 1) + h.shape[-2:]}")
        h = T.add(h, T.mul(p[f"syn.noise{i}"], Tensor(noises[i])))
        ones = Tensor(np.ones(p[f"syn.style{i}.s.b"].shape))
        ys = T.add(ones, T.add(T.matmul(w, p[f"syn.style{i}.s.w"]), p[f"syn.style{i}.s.b"]))
        yb = T.add(T.matmul(w, p[f"syn.style{i}.b.w"]), p[f"syn.style{i}.b.b"])
        h = adain(h, ys, yb)
        h = T.leaky_relu(h, LRELU_SLOPE)
        i += 1
    h = T.add(T.conv2d(h, p["syn.out.w"], stride=1), p["syn.out.b"])
    return T.sigmoid(h)


def criticize(model: ModelParams, x: Tensor) -> Tensor:
    """Critic scores for an (N, 1, H, W) batch; unbounded, shape (N, 1)."""
    p = model.params
    h = x
    i = 0
    while f"cr.conv{i}.w" in p:
        h = T.conv2d(h, p[f"cr.conv{i}.w"], stride=2)
        c = h.shape[-3]
        h = T.add(h, T.reshape(p[f"cr.conv{i}.b"], (c, 1, 1)))
        h = T.leaky_relu(h, LRELU_SLOPE)
        i += 1
    flat = T.reshape(h, (h.shape[0], -1))
    return T.add(T.matmul(flat, p["cr.fc.w"]), p["cr.fc.b"])


def noise_shapes(model: ModelParams) -> list[tuple[int, int]]:
    """Spatial shape of each synthesis layer's injected noise map."""
    rounds, _ = _decoder_plan(model.image_size)
    shapes, h = [], 4
    for _ in range(rounds):
        h = 2 * h - 2
        shapes.append((h, h))
    return shapes


def feature_extractor_for(model: ModelParams) -> FeatureExtractor:
    return FeatureExtractor(model.hyper["feature_seed"])


# ---------------------------------------------------------------------------
# training


def _batch_tensor(images: np.ndarray, idx: np.ndarray) -> Tensor:
    return Tensor(images[idx][:, None, :, :])


def _zero_group(model: ModelParams, group: str) -> None:
    for p in model.group_params(group):
        p.zero_grad()


def _apply_group(model: ModelParams, group: str) -> None:
    params = model.group_params(group)
    grads = [np.zeros_like(p.data) if p.grad is None else p.grad for p in params]
    adam_step(params, grads, model.opt[group], model.hyper["lr"])


def _vae_step(model, images, rng, psi):
    hyper = model.hyper
    idx = rng.integers(0, images.shape[0], hyper["batch_size"])
    x = _batch_tensor(images, idx)
    code = encode(model, x)
    eps = rng.standard_normal(code.mu.shape)
    x_rec = decode(model, reparameterize(code, Tensor(eps)))
    kl = kl_gaussian(code)
    pixel = mean_squared_error(x, x_rec)
    if model.architecture == "dfc_vae":
        rec = T.mul(Tensor(hyper["perceptual_weight"]), perceptual_loss(x, x_rec, psi))
        loss = T.add(kl, rec)
    else:
        lambda_pix = hyper["lambda_pix"]
        if lambda_pix is None:
            lambda_pix = 0.025 * model.image_size * model.image_size
        rec = T.mul(Tensor(lambda_pix), pixel)
        loss = T.add(kl, rec)
    _zero_group(model, "all")
    backward(loss)
    _apply_group(model, "all")
    return {"loss": loss.item(), "kl": kl.item(), "rec": rec.item(), "pixel_mse": pixel.item()}


def _intro_step(model, images, rng, step):
    hyper = model.hyper
    idx = rng.integers(0, images.shape[0], hyper["batch_size"])
    x = _batch_tensor(images, idx)
    z_prior = rng.standard_normal((hyper["batch_size"], model.latent_dim))
    m, alpha, beta = hyper["m"], hyper["alpha"], hyper["beta"]

    if step % 2 == 0:
        # encoder update: generated images enter detached
        x_gen = decode(model, Tensor(z_prior)).detach()
        code_real = encode(model, x)
        eps = rng.standard_normal(code_real.mu.shape)
        x_rec = decode(model, reparameterize(code_real, Tensor(eps)))
        code_gen = encode(model, x_gen)
        loss = introvae_encoder_loss(x, x_rec, x_gen, code_real, code_gen, m, alpha, beta)
        if hyper["hinge_reconstructions"]:
            code_rec = encode(model, x_rec.detach())
            margin = hinge(T.sub(Tensor(float(m)), kl_gaussian(code_rec)))
            loss = T.add(loss, T.mul(Tensor(alpha), margin))
        _zero_group(model, "encoder")
        backward(loss)
        _apply_group(model, "encoder")
        return {"loss": loss.item(), "role": "encoder"}

    # generator update: encoder outputs for the reconstruction path are detached
    x_gen = decode(model, Tensor(z_prior))
    code_gen = encode(model, x_gen)
    code_real = encode(model, x)
    code_detached = LatentCode(code_real.mu.detach(), code_real.logvar.detach())
    eps = rng.standard_normal(code_detached.mu.shape)
    x_rec = decode(model, reparameterize(code_detached, Tensor(eps)))
    loss = introvae_generator_loss(x, x_rec, code_gen, alpha, beta)
    _zero_group(model, "decoder")
    backward(loss)
    _apply_group(model, "decoder")
    return {"loss": loss.item(), "role": "generator"}


def _style_step(model, images, rng, step):
    hyper = model.hyper
    batch = hyper["batch_size"]
    idx = rng.integers(0, images.shape[0], batch)
    z = rng.standard_normal((batch, model.latent_dim))
    noises = [rng.standard_normal((batch, 1, h, w)) for h, w in noise_shapes(model)]

    if step % 2 == 0:
        x_real = _batch_tensor(images, idx)
        x_fake = synthesize(model, Tensor(z), noises).detach()
        loss_d, _ = wgan_losses(criticize(model, x_real), criticize(model, x_fake))
        _zero_group(model, "critic")
        backward(loss_d)
        _apply_group(model, "critic")
        if hyper["clip_enabled"]:
            c = hyper["clip_value"]
            for p in model.group_params("critic"):
                np.clip(p.data, -c, c, out=p.data)
        return {"loss": loss_d.item(), "role": "critic"}

    x_fake = synthesize(model, Tensor(z), noises)
    d_fake = criticize(model, x_fake)
    loss_g = T.tmean(d_fake)
    _zero_group(model, "generator")
    backward(loss_g)
    _apply_group(model, "generator")
    return {"loss": loss_g.item(), "role": "generator"}


def train(
    model: ModelParams,
    data: ImageSet,
    steps: int | None = None,
    batch_size: int | None = None,
    seed: int = 0,
    callbacks=None,
) -> TrainingLog:
    """Run the architecture's training loop; deterministic for a fixed seed.

    VAE variants minimize their reconstruction+KL objective each step;
    the introspective VAE and the style-based GAN alternate between their
    two roles on even/odd steps. Raises TrainingDivergedError (with the
    step index) as soon as any loss goes non-finite.
    """
    if steps is None:
        steps = model.hyper["steps"]
    if steps < 1:
        raise InvalidInputError(f"steps must be >= 1, got {steps}")
    if batch_size is not None:
        model.hyper["batch_size"] = batch_size
    if (data.height, data.width) != (model.image_size, model.image_size):
        raise ShapeError(
            f"data is {data.height}x{data.width}, model expects {model.image_size}x{model.image_size}"
        )
    rng = np.random.default_rng(seed)
    psi = feature_extractor_for(model) if model.architecture == "dfc_vae" else None
    images = data.images
    entries = []
    for step in range(steps):
        if model.architecture in ("vanilla_vae", "dfc_vae"):
            record = _vae_step(model, images, rng, psi)
        elif model.architecture == "intro_vae":
            record = _intro_step(model, images, rng, step)
        else:
            record = _style_step(model, images, rng, step)
        if not np.isfinite(record["loss"]):
            raise TrainingDivergedError(step)
        record["step"] = step
        entries.append(record)
        if callbacks:
            for callback in callbacks:
                callback(step, record)
    return TrainingLog(entries)


# ---------------------------------------------------------------------------
# sampling and reconstruction


_CHUNK = 256


def sample(model: ModelParams, n: int, seed: int = 0) -> ImageSet:
    """Draw n images from the prior; deterministic for a fixed seed."""
    if n < 1:
        raise InvalidInputError(f"n must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    z_all = rng.standard_normal((n, model.latent_dim))
    if model.architecture == "style_gan":
        noises_all = [rng.standard_normal((n, 1, h, w)) for h, w in noise_shapes(model)]
    chunks = []
    for start in range(0, n, _CHUNK):
        stop = min(start + _CHUNK, n)
        z = Tensor(z_all[start:stop])
        if model.architecture == "style_gan":
            noises = [nz[start:stop] for nz in noises_all]
            out = synthesize(model, z, noises)
        else:
            out = decode(model, z)
        chunks.append(out.data[:, 0, :, :])
    return ImageSet(np.concatenate(chunks), labels=(model.architecture,) * n)


def reconstruct(model: ModelParams, data: ImageSet, seed: int = 0, deterministic: bool = False) -> ImageSet:
    """Encode-decode each image; only defined for the VAE family.

    With ``deterministic=True`` the latent is the posterior mean (eps = 0),
    making the output a pure function of the input.
    """
    if model.architecture == "style_gan":
        raise UnsupportedOperationError("the style-based GAN does not reconstruct images")
    if (data.height, data.width) != (model.image_size, model.image_size):
        raise ShapeError(
            f"data is {data.height}x{data.width}, model expects {model.image_size}x{model.image_size}"
        )
    rng = np.random.default_rng(seed)
    eps_all = np.zeros((len(data), model.latent_dim)) if deterministic else rng.standard_normal(
        (len(data), model.latent_dim)
    )
    chunks = []
    for start in range(0, len(data), _CHUNK):
        stop = min(start + _CHUNK, len(data))
        x = Tensor(data.images[start:stop][:, None, :, :])
        code = encode(model, x)
        z = reparameterize(code, Tensor(eps_all[start:stop]))
        chunks.append(decode(model, z).data[:, 0, :, :])
    return ImageSet(np.concatenate(chunks))


# ---------------------------------------------------------------------------
# checkpoints


CHECKPOINT_FORMAT = "genforge-checkpoint-v1"


def save_model(model: ModelParams, prefix) -> None:
    """Write `{prefix}.json` (manifest) and `{prefix}.bin` (little-endian
    float64 parameter data in manifest order)."""
    prefix = Path(prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    manifest = {
        "format": CHECKPOINT_FORMAT,
        "architecture": model.architecture,
        "image_size": model.image_size,
        "hyperparameters": model.hyper,
        "groups": model.groups,
        "params": [{"name": n, "shape": list(t.shape)} for n, t in model.params.items()],
        "optimizer": {
            g: {"step": s.step, "beta1": s.beta1, "beta2": s.beta2, "eps": s.eps}
            for g, s in model.opt.items()
        },
    }
    prefix.with_suffix(".json").write_text(json.dumps(manifest, indent=2))
    blob = b"".join(t.data.astype("<f8").tobytes() for t in model.params.values())
    prefix.with_suffix(".bin").write_bytes(blob)


def load_model(prefix) -> ModelParams:
    """Rebuild a model from checkpoint files; Adam moments are not persisted,
    only the optimizer scalars and step counter."""
    prefix = Path(prefix)
    try:
        manifest = json.loads(prefix.with_suffix(".json").read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"cannot read checkpoint manifest {prefix}.json: {exc}") from exc
    if manifest.get("format") != CHECKPOINT_FORMAT:
        raise FormatError(f"{prefix}.json is not a {CHECKPOINT_FORMAT} manifest")
    blob = prefix.with_suffix(".bin").read_bytes()
    params: dict[str, Tensor] = {}
    offset = 0
    for entry in manifest["params"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        try:
            values = np.frombuffer(blob, dtype="<f8", offset=offset, count=count)
        except ValueError as exc:
            raise FormatError(f"{prefix}.bin is truncated at parameter {entry['name']}") from exc
        params[entry["name"]] = Tensor(values.reshape(shape).copy(), requires_grad=True)
        offset += count * 8
    if offset != len(blob):
        raise FormatError(f"{prefix}.bin has {len(blob) - offset} trailing bytes")
    model = ModelParams(
        manifest["architecture"],
        manifest["image_size"],
        params,
        manifest["hyperparameters"],
        {g: list(names) for g, names in manifest["groups"].items()},
    )
    for group, scalars in manifest["optimizer"].items():
        state = model.opt[group]
        state.step = scalars["step"]
        state.beta1, state.beta2, state.eps = scalars["beta1"], scalars["beta2"], scalars["eps"]
    return model
