"""Reverse-mode differentiation over dense float64 numpy arrays.

The graph is recorded implicitly: every operation that produces a tensor
requiring gradients stores its parents and a vector-Jacobian callback on the
output. ``backward`` walks the recorded nodes in reverse topological order
and accumulates gradients into every tensor with ``requires_grad`` set.

Only the primitives needed by the four generative architectures are
implemented; there is no GPU path and no broadcasting beyond numpy's
trailing-axis rules.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DomainError, ShapeError

# Lower clamp applied to per-channel standard deviations so constant
# channels stay differentiable (clamped on the variance, before the sqrt).
EPS_STD = 1e-5


class Tensor:
    """Dense N-dimensional float64 array participating in the graph."""

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_vjp")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad = None
        self._parents: tuple[Tensor, ...] = ()
        self._vjp = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # arithmetic sugar; every overload routes through the module-level ops
    def __add__(self, other):
        return add(self, as_tensor(other))

    def __radd__(self, other):
        return add(as_tensor(other), self)

    def __sub__(self, other):
        return sub(self, as_tensor(other))

    def __rsub__(self, other):
        return sub(as_tensor(other), self)

    def __mul__(self, other):
        return mul(self, as_tensor(other))

    def __rmul__(self, other):
        return mul(as_tensor(other), self)

    def __truediv__(self, other):
        return div(self, as_tensor(other))

    def __neg__(self):
        return neg(self)

    def __pow__(self, exponent):
        return pow_const(self, exponent)

    def __matmul__(self, other):
        return matmul(self, as_tensor(other))


def as_tensor(value) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


def _make(data, parents, vjp) -> Tensor:
    """Wrap an op result, recording the node only if a parent needs grads."""
    needs = any(p.requires_grad for p in parents)
    out = Tensor(data, requires_grad=needs)
    if needs:
        out._parents = tuple(parents)
        out._vjp = vjp
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to the original operand shape."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


# ---------------------------------------------------------------------------
# elementwise primitives


def add(a: Tensor, b: Tensor) -> Tensor:
    data = a.data + b.data
    return _make(data, (a, b), lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a: Tensor, b: Tensor) -> Tensor:
    data = a.data - b.data
    return _make(data, (a, b), lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))


def mul(a: Tensor, b: Tensor) -> Tensor:
    data = a.data * b.data
    return _make(
        data,
        (a, b),
        lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
    )


def div(a: Tensor, b: Tensor) -> Tensor:
    data = a.data / b.data
    return _make(
        data,
        (a, b),
        lambda g: (
            _unbroadcast(g / b.data, a.shape),
            _unbroadcast(-g * a.data / (b.data * b.data), b.shape),
        ),
    )


def neg(a: Tensor) -> Tensor:
    return _make(-a.data, (a,), lambda g: (-g,))


def pow_const(a: Tensor, exponent: float) -> Tensor:
    data = a.data ** exponent
    return _make(data, (a,), lambda g: (g * exponent * a.data ** (exponent - 1),))


def texp(a: Tensor) -> Tensor:
    data = np.exp(a.data)
    return _make(data, (a,), lambda g: (g * data,))


def tlog(a: Tensor) -> Tensor:
    if np.any(a.data <= 0.0):
        raise DomainError("log requires strictly positive inputs")
    return _make(np.log(a.data), (a,), lambda g: (g / a.data,))


def tsqrt(a: Tensor) -> Tensor:
    data = np.sqrt(a.data)
    return _make(data, (a,), lambda g: (g / (2.0 * data),))


def sigmoid(a: Tensor) -> Tensor:
    x = a.data
    data = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))), np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))
    return _make(data, (a,), lambda g: (g * data * (1.0 - data),))


def maximum(a: Tensor, b: Tensor) -> Tensor:
    # ties route the gradient to the first argument
    mask = a.data >= b.data
    data = np.where(mask, a.data, b.data)
    return _make(
        data,
        (a, b),
        lambda g: (_unbroadcast(g * mask, a.shape), _unbroadcast(g * ~mask, b.shape)),
    )


def leaky_relu(a: Tensor, slope: float = 0.2) -> Tensor:
    """Elementwise x if x >= 0 else slope * x, with slope in [0, 1)."""
    if not 0.0 <= slope < 1.0:
        raise DomainError(f"leaky_relu slope must be in [0, 1), got {slope}")
    mask = a.data >= 0
    factor = np.where(mask, 1.0, slope)
    return _make(a.data * factor, (a,), lambda g: (g * factor,))


# ---------------------------------------------------------------------------
# reductions and reshapes


def _normalize_axes(axes, ndim: int) -> tuple[int, ...]:
    if axes is None:
        return tuple(range(ndim))
    if isinstance(axes, int):
        axes = (axes,)
    return tuple(sorted(a % ndim for a in axes))


def tsum(a: Tensor, axes=None, keepdims: bool = False) -> Tensor:
    axes = _normalize_axes(axes, a.data.ndim)
    data = a.data.sum(axis=axes, keepdims=keepdims)

    def vjp(g):
        gk = g if keepdims else np.expand_dims(g, axes)
        return (np.broadcast_to(gk, a.shape).copy(),)

    return _make(data, (a,), vjp)


def tmean(a: Tensor, axes=None, keepdims: bool = False) -> Tensor:
    axes = _normalize_axes(axes, a.data.ndim)
    count = int(np.prod([a.shape[i] for i in axes])) if axes else 1
    data = a.data.mean(axis=axes, keepdims=keepdims)

    def vjp(g):
        gk = g if keepdims else np.expand_dims(g, axes)
        return (np.broadcast_to(gk / count, a.shape).copy(),)

    return _make(data, (a,), vjp)


def reshape(a: Tensor, shape) -> Tensor:
    shape = tuple(shape)
    data = a.data.reshape(shape)
    return _make(data, (a,), lambda g: (g.reshape(a.shape),))


# ---------------------------------------------------------------------------
# linear algebra and convolution


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product of a [n, k] and b [k, m].

    Backward follows dA = dC @ B^T and dB = A^T @ dC.
    """
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ShapeError(f"matmul expects 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul inner dimensions differ: {a.shape} vs {b.shape}")
    data = a.data @ b.data
    return _make(data, (a, b), lambda g: (g @ b.data.T, a.data.T @ g))


def conv2d(x: Tensor, kernel: Tensor, stride: int = 1) -> Tensor:
    """Valid (no padding) 2-D cross-correlation.

    Parameters
    ----------
    x : Tensor of shape (C_in, H, W) or (N, C_in, H, W)
    kernel : Tensor of shape (C_out, C_in, kh, kw)
    stride : positive int applied to both spatial axes

    Output spatial size is floor((H - kh) / stride) + 1, same for W.
    """
    if stride < 1:
        raise ShapeError(f"stride must be >= 1, got {stride}")
    if kernel.data.ndim != 4:
        raise ShapeError(f"kernel must be 4-D, got shape {kernel.shape}")
    squeeze = x.data.ndim == 3
    if squeeze:
        x = reshape(x, (1,) + x.shape)
    if x.data.ndim != 4:
        raise ShapeError(f"input must be 3-D or 4-D, got shape {x.shape}")
    n, c_in, h, w = x.shape
    c_out, kc, kh, kw = kernel.shape
    if kc != c_in:
        raise ShapeError(f"kernel expects {kc} input channels, input has {c_in}")
    if kh > h or kw > w:
        raise ShapeError(f"kernel {kh}x{kw} larger than input {h}x{w}")

    windows = sliding_window_view(x.data, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
    data = np.einsum("ncijkl,ockl->noij", windows, kernel.data, optimize=True)
    h_out, w_out = data.shape[2], data.shape[3]

    def vjp(g):
        dk = np.einsum("ncijkl,noij->ockl", windows, g, optimize=True)
        dx = np.zeros_like(x.data)
        for ki in range(kh):
            for kj in range(kw):
                patch = np.einsum("noij,oc->ncij", g, kernel.data[:, :, ki, kj], optimize=True)
                dx[:, :, ki : ki + stride * h_out : stride, kj : kj + stride * w_out : stride] += patch
        return (dx, dk)

    out = _make(data, (x, kernel), vjp)
    if squeeze:
        out = reshape(out, out.shape[1:])
    return out


def upsample_nn(x: Tensor, factor: int) -> Tensor:
    """Nearest-neighbor upsampling of the two trailing spatial axes."""
    if factor < 1:
        raise ShapeError(f"factor must be >= 1, got {factor}")
    if factor == 1:
        return x
    data = np.repeat(np.repeat(x.data, factor, axis=-2), factor, axis=-1)

    def vjp(g):
        lead = g.shape[:-2]
        h, w = x.shape[-2], x.shape[-1]
        return (g.reshape(lead + (h, factor, w, factor)).sum(axis=(-3, -1)),)

    return _make(data, (x,), vjp)


def channel_stats(x: Tensor) -> tuple[Tensor, Tensor]:
    """Per-channel mean and population std over the trailing two axes.

    Works on (C, H, W) and (N, C, H, W) inputs, returning shapes (C,) and
    (N, C) respectively. The std is clamped below by ``EPS_STD`` (on the
    variance, so constant channels keep a finite gradient).
    """
    mu_k = tmean(x, axes=(-2, -1), keepdims=True)
    centered = sub(x, mu_k)
    var_k = tmean(mul(centered, centered), axes=(-2, -1), keepdims=True)
    sigma_k = tsqrt(maximum(var_k, Tensor(np.full(var_k.shape, EPS_STD**2))))
    lead = x.shape[:-2]
    return reshape(mu_k, lead), reshape(sigma_k, lead)


# ---------------------------------------------------------------------------
# backward pass


def _toposort(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in seen:
                stack.append((parent, False))
    return order


def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(t) into t.grad for every reachable grad tensor.

    Gradients add up across calls until the tensors are zeroed, so calling
    twice doubles every gradient.
    """
    if loss.data.size != 1:
        raise ShapeError(f"backward requires a scalar loss, got shape {loss.shape}")
    order = _toposort(loss)
    local: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(order):
        g = local.pop(id(node), None)
        if g is None or not node.requires_grad:
            continue
        node.grad = g if node.grad is None else node.grad + g
        if node._vjp is None:
            continue
        for parent, pg in zip(node._parents, node._vjp(g)):
            if not parent.requires_grad:
                continue
            acc = local.get(id(parent))
            local[id(parent)] = pg if acc is None else acc + pg


def zero_grads(tensors) -> None:
    for t in tensors:
        t.zero_grad()


# ---------------------------------------------------------------------------
# verification harness


def grad_check(f, x: Tensor, h: float = 1e-5) -> float:
    """Compare backward gradients of ``f`` against central finite differences.

    ``f`` must map ``x`` to a scalar Tensor and be deterministic. Returns the
    maximum relative error over all coordinates, with the denominator
    max(|analytic|, |numeric|, 1e-8).
    """
    if h <= 0:
        raise DomainError(f"step h must be positive, got {h}")
    x.requires_grad = True
    x.zero_grad()
    out = f(x)
    if out.data.size != 1:
        raise ShapeError("grad_check requires f to return a scalar")
    backward(out)
    analytic = np.zeros_like(x.data) if x.grad is None else np.array(x.grad, dtype=np.float64)

    numeric = np.zeros_like(x.data)
    flat = x.data.reshape(-1)
    num_flat = numeric.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        f_plus = float(f(x).data)
        flat[i] = orig - h
        f_minus = float(f(x).data)
        flat[i] = orig
        num_flat[i] = (f_plus - f_minus) / (2.0 * h)

    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    return float(np.max(np.abs(analytic - numeric) / denom))


# ---------------------------------------------------------------------------
# optimizer and initialization


class AdamState:
    """First/second moment buffers plus step counter for one parameter list."""

    def __init__(self, params: list[Tensor], beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.step = 0
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = [np.zeros_like(p.data) for p in params]
        self.v = [np.zeros_like(p.data) for p in params]


def adam_step(params: list[Tensor], grads: list[np.ndarray], state: AdamState, lr: float) -> None:
    """One bias-corrected Adam update; mutates params and state in place."""
    if lr <= 0:
        raise DomainError(f"learning rate must be positive, got {lr}")
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ShapeError("params, grads and optimizer state lengths differ")
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    for p, g, m, v in zip(params, grads, state.m, state.v):
        g = np.asarray(g, dtype=np.float64)
        if g.shape != p.data.shape:
            raise ShapeError(f"gradient shape {g.shape} does not match parameter {p.data.shape}")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        m_hat = m / (1.0 - b1**t)
        v_hat = v / (1.0 - b2**t)
        p.data -= lr * m_hat / (np.sqrt(v_hat) + state.eps)


def he_normal(rng: np.random.Generator, shape, fan_in: int) -> Tensor:
    """Fan-in scaled Gaussian init (std = sqrt(2 / fan_in)), trainable."""
    data = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape)
    return Tensor(data, requires_grad=True)
