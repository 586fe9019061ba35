"""Build and briefly train all four architectures side by side.

The vanilla VAE and the deep-feature-consistent VAE minimize a KL +
reconstruction objective (pixel space vs fixed-feature space); the
introspective VAE alternates encoder and generator roles with a hinged
KL margin; the style-based GAN alternates a weight-clipped critic with a
style-mapped generator on score-difference losses.
"""

import numpy as np

from genforge import ARCHITECTURES, build_model, phantom_generate, sample, train

data = phantom_generate(n=100, size=16, seed=5)

for arch in ARCHITECTURES:
    model = build_model(arch, image_size=16, seed=0)
    n_params = sum(t.size for t in model.params.values())
    log = train(model, data, steps=60, batch_size=8, seed=1)
    losses = [e["loss"] for e in log.entries]
    samples = sample(model, n=8, seed=2)
    line = (f"{arch:12s} {n_params:6d} params, "
            f"loss[0..3]={['%.3f' % v for v in losses[:3]]}, "
            f"sample range [{samples.images.min():.2f}, {samples.images.max():.2f}]")
    if "role" in log.entries[0]:
        roles = {e["role"] for e in log.entries}
        line += f", alternating roles {sorted(roles)}"
    print(line)

# The two adversarial trainers keep their critic/encoder honest:
model = build_model("style_gan", image_size=16, seed=0)
train(model, data, steps=10, batch_size=8, seed=3)
clip = model.hyper["clip_value"]
peak = max(np.abs(model.params[n].data).max() for n in model.groups["critic"])
print(f"style_gan critic weights stay inside the +/-{clip} clip box (peak {peak:.3f})")
