"""Tour of the reverse-mode differentiation engine behind the models.

Everything the four architectures need is built from a handful of
primitives on float64 arrays; backward() walks the recorded graph and
fills in gradients, and grad_check() verifies any scalar-valued graph
against central finite differences.
"""

import numpy as np

from genforge import Tensor, backward, grad_check
from genforge import tensor as T

# 1. Build a tiny graph and differentiate it by hand-checkable example:
#    loss = sum(x * x) at x = [1, -2]  =>  dloss/dx = [2, -4].
x = Tensor(np.array([1.0, -2.0]), requires_grad=True)
loss = T.tsum(T.mul(x, x))
backward(loss)
print(f"loss {loss.item():.1f}, gradient {x.grad}")

# Gradients accumulate until zeroed - a second backward doubles them.
backward(T.tsum(T.mul(x, x)))
print(f"after second backward: {x.grad}")

# 2. Convolution, upsampling, and per-channel statistics are the workhorse
#    image ops. All register backward rules.
image = Tensor(np.random.default_rng(0).normal(size=(1, 1, 8, 8)))
kernel = Tensor(np.random.default_rng(1).normal(size=(4, 1, 3, 3)), requires_grad=True)
feature = T.leaky_relu(T.conv2d(image, kernel, stride=2), 0.2)
mu, sigma = T.channel_stats(feature)
print(f"conv output {feature.shape}, per-channel mu {mu.shape}, sigma {sigma.shape}")

# 3. grad_check compares the backward pass against (f(x+h) - f(x-h)) / 2h
#    for every coordinate. Relative errors sit at the float noise floor.
def conv_net(t):
    h = T.leaky_relu(T.conv2d(t, kernel, stride=1), 0.2)
    return T.tmean(T.mul(h, h))

err = grad_check(conv_net, Tensor(np.random.default_rng(2).normal(size=(1, 6, 6))))
print(f"finite-difference check of conv+relu+mean: rel err {err:.2e}")
assert err < 1e-6

# 4. The same harness powers the `genforge gradcheck` CLI command, which
#    sweeps every primitive and every loss the models use.
from genforge.gradcheck import run_all

results = run_all(seed=0)
worst = max(r["error"] for r in results if r["kind"] == "relative")
print(f"{len(results)} engine-wide checks, worst relative error {worst:.2e}")
assert all(r["passed"] for r in results)
