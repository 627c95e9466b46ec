"""Reverse-mode differentiable tensor engine on numpy arrays.

Provides exactly the layer set the classifier stacks need: 2D convolution,
transposed convolution, max/avg pooling, dense layers, relu/sigmoid/softmax,
range clipping, concatenation and reshaping, plus the four loss kinds used
for training and attacks. Convolutions are lowered to a single GEMM via an
`as_strided` im2col; backward passes scatter with the matching col2im.

Tensors carry float32 data during training and attacks and float64 during
gradient checks. Every operation validates that its output (and, during
backpropagation, every gradient) is finite; disable via `set_finite_checks`
only for profiling.
"""

from __future__ import annotations

import contextlib
from typing import Callable, Optional, Sequence

import numpy as np
from numpy.lib.stride_tricks import as_strided

from .errors import EmptyMask, ShapeMismatch

_CHECK_FINITE = True
_NO_GRAD = False

# Floor for probabilities inside log(); keeps attack-saturated softmax
# outputs from producing non-finite gradients in float32.
_LOG_FLOOR = 1e-30

_KINK_MARGINS: Optional[list] = None


def set_finite_checks(enabled: bool) -> None:
    global _CHECK_FINITE
    _CHECK_FINITE = enabled


@contextlib.contextmanager
def no_grad():
    """Skip graph recording inside the block; forwards only."""
    global _NO_GRAD
    prev = _NO_GRAD
    _NO_GRAD = True
    try:
        yield
    finally:
        _NO_GRAD = prev


@contextlib.contextmanager
def record_kink_margins():
    """Collect distances to nondifferentiable points seen by relu/maxpool/clip.

    Yields a list that, after the block, holds one nonnegative margin per
    kinked operation executed inside it. Gradient checks use the minimum to
    reject instances too close to a kink for central differences to be valid.
    """
    global _KINK_MARGINS
    prev = _KINK_MARGINS
    _KINK_MARGINS = []
    try:
        yield _KINK_MARGINS
    finally:
        _KINK_MARGINS = prev


def _note_kink_margin(margin: float) -> None:
    if _KINK_MARGINS is not None:
        _KINK_MARGINS.append(float(margin))


def _check(arr: np.ndarray, what: str) -> None:
    if _CHECK_FINITE and not np.isfinite(arr).all():
        raise FloatingPointError(f"non-finite values in {what}")


class Tensor:
    """N-dimensional array with an optional gradient slot.

    Operations on Tensors record a graph; calling `backward()` on a scalar
    result fills `.grad` on every requires-grad leaf. Tensors are treated as
    immutable once created, except that optimizers update parameter `.data`
    in place between graph constructions.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float64)
        self.data = arr
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad and not _NO_GRAD
        self._parents: tuple = ()
        self._backward: Optional[Callable[[np.ndarray], None]] = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        if self.data.size != 1:
            raise ShapeMismatch("backward() requires a scalar tensor")
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype})"


def _result(data: np.ndarray, parents: Sequence[Tensor],
            backward: Optional[Callable], what: str) -> Tensor:
    _check(data, what)
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    needs = (not _NO_GRAD) and any(p.requires_grad for p in parents)
    out.requires_grad = needs
    out._parents = tuple(p for p in parents if p.requires_grad) if needs else ()
    out._backward = backward if needs else None
    return out


def _accum(t: Tensor, g: np.ndarray) -> None:
    if not t.requires_grad:
        return
    _check(g, "gradient")
    if t.grad is None:
        # Copy unconditionally: g may be shared with another parent's grad.
        t.grad = np.array(g, dtype=t.data.dtype)
    else:
        t.grad += g


def _same_dtype(a: Tensor, b: Tensor) -> None:
    if a.data.dtype != b.data.dtype:
        raise ShapeMismatch(f"dtype mismatch: {a.data.dtype} vs {b.data.dtype}")


# ---------------------------------------------------------------------------
# elementwise / structural ops
# ---------------------------------------------------------------------------

def add(a: Tensor, b: Tensor) -> Tensor:
    _same_dtype(a, b)
    if a.shape != b.shape:
        raise ShapeMismatch(f"add: {a.shape} vs {b.shape}")
    data = a.data + b.data

    def backward(g):
        _accum(a, g)
        _accum(b, g)

    return _result(data, (a, b), backward, "add")


def sub(a: Tensor, b: Tensor) -> Tensor:
    _same_dtype(a, b)
    if a.shape != b.shape:
        raise ShapeMismatch(f"sub: {a.shape} vs {b.shape}")
    data = a.data - b.data

    def backward(g):
        _accum(a, g)
        _accum(b, -g)

    return _result(data, (a, b), backward, "sub")


def mul(a: Tensor, b: Tensor) -> Tensor:
    _same_dtype(a, b)
    if a.shape != b.shape:
        raise ShapeMismatch(f"mul: {a.shape} vs {b.shape}")
    data = a.data * b.data

    def backward(g):
        _accum(a, g * b.data)
        _accum(b, g * a.data)

    return _result(data, (a, b), backward, "mul")


def div(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise quotient; used for the alpha-weighted score ratio."""
    _same_dtype(a, b)
    if a.shape != b.shape:
        raise ShapeMismatch(f"div: {a.shape} vs {b.shape}")
    data = a.data / b.data

    def backward(g):
        _accum(a, g / b.data)
        _accum(b, -g * data / b.data)

    return _result(data, (a, b), backward, "div")


def scale(a: Tensor, factor: float) -> Tensor:
    data = a.data * a.data.dtype.type(factor)

    def backward(g):
        _accum(a, g * a.data.dtype.type(factor))

    return _result(data, (a,), backward, "scale")


def tsum(a: Tensor) -> Tensor:
    data = np.asarray(a.data.sum(), dtype=a.data.dtype).reshape(())

    def backward(g):
        _accum(a, np.broadcast_to(g, a.shape).astype(a.data.dtype))

    return _result(data, (a,), backward, "sum")


def reshape(a: Tensor, shape) -> Tensor:
    data = a.data.reshape(shape)

    def backward(g):
        _accum(a, g.reshape(a.shape))

    return _result(data, (a,), backward, "reshape")


def concat(parts: Sequence[Tensor], axis: int) -> Tensor:
    for p in parts[1:]:
        _same_dtype(parts[0], p)
    data = np.concatenate([p.data for p in parts], axis=axis)
    offsets = np.cumsum([0] + [p.shape[axis] for p in parts])

    def backward(g):
        sl = [slice(None)] * g.ndim
        for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            sl[axis] = slice(lo, hi)
            _accum(p, g[tuple(sl)])

    return _result(data, tuple(parts), backward, "concat")


# ---------------------------------------------------------------------------
# activations
# ---------------------------------------------------------------------------

def relu(a: Tensor) -> Tensor:
    data = np.maximum(a.data, 0)
    if _KINK_MARGINS is not None and a.data.size:
        _note_kink_margin(np.abs(a.data).min())

    def backward(g):
        _accum(a, g * (a.data > 0))

    return _result(data, (a,), backward, "relu")


def sigmoid(a: Tensor) -> Tensor:
    x = a.data
    data = np.empty_like(x)
    pos = x >= 0
    data[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    data[~pos] = ex / (1.0 + ex)

    def backward(g):
        _accum(a, g * data * (1.0 - data))

    return _result(data, (a,), backward, "sigmoid")


def softmax(a: Tensor) -> Tensor:
    """Softmax over the last axis, stabilized by max subtraction.

    Outputs are floored at the dtype's smallest normal so they stay strictly
    positive even when attack loops drive logits to extremes.
    """
    z = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(z)
    data = np.maximum(e / e.sum(axis=-1, keepdims=True),
                      np.finfo(a.data.dtype).tiny)

    def backward(g):
        dot = (g * data).sum(axis=-1, keepdims=True)
        _accum(a, data * (g - dot))

    return _result(data, (a,), backward, "softmax")


def clip(a: Tensor, lo: float, hi: float) -> Tensor:
    """Hard range clip; gradient passes only strictly inside (lo, hi)."""
    data = np.clip(a.data, lo, hi)
    if _KINK_MARGINS is not None and a.data.size:
        _note_kink_margin(min(np.abs(a.data - lo).min(), np.abs(a.data - hi).min()))
    inside = (a.data > lo) & (a.data < hi)

    def backward(g):
        _accum(a, g * inside)

    return _result(data, (a,), backward, "clip")


# ---------------------------------------------------------------------------
# im2col helpers
# ---------------------------------------------------------------------------

def _im2col(x: np.ndarray, kh: int, kw: int, stride: int):
    """(N,C,Hp,Wp) -> columns (C*kh*kw, N*Ho*Wo) plus (Ho, Wo)."""
    n, c, hp, wp = x.shape
    ho = (hp - kh) // stride + 1
    wo = (wp - kw) // stride + 1
    sn, sc, sh, sw = x.strides
    win = as_strided(
        x,
        shape=(n, c, kh, kw, ho, wo),
        strides=(sn, sc, sh, sw, stride * sh, stride * sw),
        writeable=False,
    )
    cols = np.ascontiguousarray(win.transpose(1, 2, 3, 0, 4, 5)).reshape(
        c * kh * kw, n * ho * wo)
    return cols, ho, wo


def _col2im(cols: np.ndarray, n: int, c: int, hp: int, wp: int,
            kh: int, kw: int, stride: int, ho: int, wo: int,
            dtype) -> np.ndarray:
    """Adjoint of `_im2col`: scatter-add columns back onto the padded plane."""
    out = np.zeros((n, c, hp, wp), dtype=dtype)
    blocks = cols.reshape(c, kh, kw, n, ho, wo).transpose(3, 0, 1, 2, 4, 5)
    for u in range(kh):
        for v in range(kw):
            out[:, :, u:u + stride * ho:stride, v:v + stride * wo:stride] += \
                blocks[:, :, u, v]
    return out


def _pad_hw(x: np.ndarray, pad: int) -> np.ndarray:
    if pad == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))


def _as_batched(t: Tensor):
    """View (C,H,W) data as (1,C,H,W); report whether a batch axis was added."""
    if t.data.ndim == 3:
        return t.data[None], True
    if t.data.ndim == 4:
        return t.data, False
    raise ShapeMismatch(f"expected 3D or 4D input, got {t.data.ndim}D")


# ---------------------------------------------------------------------------
# convolution / pooling / dense
# ---------------------------------------------------------------------------

def conv2d(x: Tensor, kernels: Tensor, bias: Tensor, stride: int = 1,
           pad: int = 0) -> Tensor:
    """Cross-correlation over (N,C,H,W) or (C,H,W) input.

    Kernels are (K,C,kh,kw); output height is floor((H+2*pad-kh)/stride)+1.
    Lowered to one GEMM; matches the naive sliding-window definition.
    """
    _same_dtype(x, kernels)
    xd, squeezed = _as_batched(x)
    k, ck, kh, kw = kernels.shape
    n, c, h, w = xd.shape
    if ck != c:
        raise ShapeMismatch(f"conv2d: input has {c} channels, kernels expect {ck}")
    if bias.shape != (k,):
        raise ShapeMismatch(f"conv2d: bias shape {bias.shape} != ({k},)")
    if h + 2 * pad < kh or w + 2 * pad < kw:
        raise ShapeMismatch("conv2d: kernel larger than padded input")

    xp = _pad_hw(xd, pad)
    cols, ho, wo = _im2col(xp, kh, kw, stride)
    wmat = kernels.data.reshape(k, c * kh * kw)
    out2 = wmat @ cols
    out = np.ascontiguousarray(
        out2.reshape(k, n, ho, wo).transpose(1, 0, 2, 3))
    out += bias.data[None, :, None, None]
    if squeezed:
        out = out[0]

    hp, wp = xp.shape[2], xp.shape[3]

    def backward(g):
        gb = g[None] if squeezed else g
        g2 = np.ascontiguousarray(gb.transpose(1, 0, 2, 3)).reshape(k, n * ho * wo)
        if bias.requires_grad:
            _accum(bias, g2.sum(axis=1))
        if kernels.requires_grad:
            _accum(kernels, (g2 @ cols.T).reshape(kernels.shape))
        if x.requires_grad:
            dcols = wmat.T @ g2
            dxp = _col2im(dcols, n, c, hp, wp, kh, kw, stride, ho, wo, xd.dtype)
            dx = dxp[:, :, pad:pad + h, pad:pad + w] if pad else dxp
            _accum(x, dx[0] if squeezed else dx)

    return _result(out, (x, kernels, bias), backward, "conv2d")


def transposed_conv2d(x: Tensor, kernels: Tensor, bias: Tensor,
                      stride: int = 1, pad: int = 0) -> Tensor:
    """Adjoint of `conv2d` in its input argument, with the same kernel.

    Kernels are (C,K,kh,kw) for C input channels and K output channels;
    output height is (H-1)*stride - 2*pad + kh.
    """
    _same_dtype(x, kernels)
    xd, squeezed = _as_batched(x)
    n, c, h, w = xd.shape
    kc, k, kh, kw = kernels.shape
    if kc != c:
        raise ShapeMismatch(f"transposed_conv2d: input has {c} channels, kernels expect {kc}")
    if bias.shape != (k,):
        raise ShapeMismatch(f"transposed_conv2d: bias shape {bias.shape} != ({k},)")
    ho = (h - 1) * stride - 2 * pad + kh
    wo = (w - 1) * stride - 2 * pad + kw
    if ho <= 0 or wo <= 0:
        raise ShapeMismatch("transposed_conv2d: empty output")

    wmat = kernels.data.reshape(c, k * kh * kw)
    x2 = np.ascontiguousarray(xd.transpose(1, 0, 2, 3)).reshape(c, n * h * w)
    cols = wmat.T @ x2
    hop, wop = ho + 2 * pad, wo + 2 * pad
    outp = _col2im(cols, n, k, hop, wop, kh, kw, stride, h, w, xd.dtype)
    out = outp[:, :, pad:pad + ho, pad:pad + wo] if pad else outp
    out = out + bias.data[None, :, None, None]
    if squeezed:
        out = out[0]

    def backward(g):
        gb = g[None] if squeezed else g
        if bias.requires_grad:
            _accum(bias, gb.sum(axis=(0, 2, 3)))
        gp = _pad_hw(gb, pad)
        gcols, gho, gwo = _im2col(gp, kh, kw, stride)
        if kernels.requires_grad:
            _accum(kernels, (x2 @ gcols.T).reshape(kernels.shape))
        if x.requires_grad:
            dx2 = wmat @ gcols
            dx = np.ascontiguousarray(
                dx2.reshape(c, n, gho, gwo).transpose(1, 0, 2, 3))
            _accum(x, dx[0] if squeezed else dx)

    return _result(out, (x, kernels, bias), backward, "transposed_conv2d")


def pool2d(x: Tensor, kind: str, size: int, stride: int) -> Tensor:
    """Valid (unpadded) max or average pooling.

    Average pooling spreads gradient uniformly over its window; max pooling
    routes it to the first maximum in row-major window order.
    """
    if kind not in ("max", "avg"):
        raise ValueError(f"unknown pooling kind {kind!r}")
    xd, squeezed = _as_batched(x)
    n, c, h, w = xd.shape
    if h < size or w < size:
        raise ShapeMismatch(f"pool2d: window {size} exceeds input {h}x{w}")
    ho = (h - size) // stride + 1
    wo = (w - size) // stride + 1
    sn, sc, sh, sw = xd.strides
    win = as_strided(
        xd,
        shape=(n, c, ho, wo, size, size),
        strides=(sn, sc, stride * sh, stride * sw, sh, sw),
        writeable=False,
    )

    if kind == "avg":
        out = win.mean(axis=(4, 5))

        def backward(g):
            gb = (g[None] if squeezed else g) / x.data.dtype.type(size * size)
            dx = np.zeros_like(xd)
            for u in range(size):
                for v in range(size):
                    dx[:, :, u:u + stride * ho:stride, v:v + stride * wo:stride] += gb
            _accum(x, dx[0] if squeezed else dx)
    else:
        flat = win.reshape(n, c, ho, wo, size * size)
        arg = flat.argmax(axis=-1)  # first max in row-major scan
        out = np.take_along_axis(flat, arg[..., None], axis=-1)[..., 0]
        if _KINK_MARGINS is not None:
            part = np.sort(flat, axis=-1)
            if part.shape[-1] > 1:
                _note_kink_margin((part[..., -1] - part[..., -2]).min())

        def backward(g):
            gb = g[None] if squeezed else g
            dx = np.zeros_like(xd)
            iu = arg // size
            iv = arg % size
            gi, gc = np.meshgrid(np.arange(n), np.arange(c), indexing="ij")
            gi = gi[:, :, None, None]
            gc = gc[:, :, None, None]
            oh = np.arange(ho)[None, None, :, None]
            ow = np.arange(wo)[None, None, None, :]
            rows = oh * stride + iu
            cols_ = ow * stride + iv
            np.add.at(dx, (gi, gc, rows, cols_), gb)
            _accum(x, dx[0] if squeezed else dx)

    out = np.ascontiguousarray(out)
    if squeezed:
        out = out[0]
    return _result(out, (x,), backward, "pool2d")


def dense(x: Tensor, weights: Tensor, bias: Tensor) -> Tensor:
    """Affine layer on flattened per-sample features.

    Input (N, ...) or a single unbatched feature array; trailing axes are
    flattened to match the weight matrix inner dimension.
    """
    _same_dtype(x, weights)
    out_dim, in_dim = weights.shape
    if bias.shape != (out_dim,):
        raise ShapeMismatch(f"dense: bias shape {bias.shape} != ({out_dim},)")
    xd = x.data
    batched = xd.ndim > 1 and xd.shape[0] * in_dim == xd.size and xd.size != in_dim
    if batched:
        x2 = xd.reshape(xd.shape[0], -1)
    elif xd.size == in_dim:
        x2 = xd.reshape(1, in_dim)
    else:
        raise ShapeMismatch(f"dense: input size {xd.size} incompatible with inner dim {in_dim}")
    if x2.shape[1] != in_dim:
        raise ShapeMismatch(f"dense: flattened length {x2.shape[1]} != inner dim {in_dim}")
    out = x2 @ weights.data.T + bias.data
    if not batched:
        out = out[0]

    def backward(g):
        g2 = g.reshape(-1, out_dim)
        if bias.requires_grad:
            _accum(bias, g2.sum(axis=0))
        if weights.requires_grad:
            _accum(weights, g2.T @ x2)
        if x.requires_grad:
            _accum(x, (g2 @ weights.data).reshape(x.shape))

    return _result(out, (x, weights, bias), backward, "dense")


_ACTIVATIONS = {"relu": relu, "sigmoid": sigmoid, "softmax": softmax, "none": None}


def dense_and_activation(x: Tensor, weights: Tensor, bias: Tensor,
                         activation: str = "none") -> Tensor:
    if activation not in _ACTIVATIONS:
        raise ValueError(f"unknown activation {activation!r}")
    out = dense(x, weights, bias)
    fn = _ACTIVATIONS[activation]
    return out if fn is None else fn(out)


# ---------------------------------------------------------------------------
# losses
# ---------------------------------------------------------------------------

def cross_entropy(probs: Tensor, labels) -> Tensor:
    """Mean true-class negative log-likelihood of a softmax output."""
    p = probs.data
    single = p.ndim == 1
    p2 = p[None] if single else p
    y = np.atleast_1d(np.asarray(labels, dtype=np.int64))
    if y.shape[0] != p2.shape[0]:
        raise ShapeMismatch("cross_entropy: batch size mismatch")
    n = p2.shape[0]
    picked = np.maximum(p2[np.arange(n), y], _LOG_FLOOR)
    data = np.asarray(-np.log(picked).mean(), dtype=p.dtype).reshape(())

    def backward(g):
        dp = np.zeros_like(p2)
        dp[np.arange(n), y] = -1.0 / (picked * n)
        _accum(probs, (dp[0] if single else dp) * g)

    return _result(data, (probs,), backward, "cross_entropy")


def masked_mse(pred: Tensor, target: Tensor, mask: Optional[np.ndarray] = None) -> Tensor:
    """Mean squared error over unmasked entries.

    A full mask (or no mask) is the plain mean over all entries; entries
    with mask False contribute neither loss nor gradient.
    """
    _same_dtype(pred, target)
    if pred.shape != target.shape:
        raise ShapeMismatch(f"masked_mse: {pred.shape} vs {target.shape}")
    if mask is None:
        count = pred.data.size
        diff = pred.data - target.data
        data = np.asarray((diff * diff).sum() / count, dtype=pred.dtype).reshape(())

        def backward(g):
            scale_ = 2.0 / count
            _accum(pred, g * scale_ * diff)
            _accum(target, -g * scale_ * diff)
    else:
        m = np.asarray(mask, dtype=bool)
        if m.shape != pred.shape:
            raise ShapeMismatch(f"masked_mse: mask shape {m.shape} != {pred.shape}")
        count = int(m.sum())
        if count == 0:
            raise EmptyMask("mask excludes every entry")
        diff = (pred.data - target.data) * m
        data = np.asarray((diff * diff).sum() / count, dtype=pred.dtype).reshape(())

        def backward(g):
            scale_ = 2.0 / count
            _accum(pred, g * scale_ * diff)
            _accum(target, -g * scale_ * diff)

    return _result(data, (pred, target), backward, "masked_mse")


def binary_cross_entropy(pred: Tensor, target: Tensor) -> Tensor:
    """Mean binary cross-entropy of sigmoid outputs against {0,1} targets."""
    _same_dtype(pred, target)
    if pred.shape != target.shape:
        raise ShapeMismatch(f"binary_cross_entropy: {pred.shape} vs {target.shape}")
    eps = _LOG_FLOOR
    p = np.clip(pred.data, eps, 1.0 - 1e-7)
    t = target.data
    n = p.size
    data = np.asarray(
        -(t * np.log(p) + (1.0 - t) * np.log(1.0 - p)).sum() / n,
        dtype=pred.dtype).reshape(())

    def backward(g):
        _accum(pred, g * ((1.0 - t) / (1.0 - p) - t / p) / n)

    return _result(data, (pred, target), backward, "binary_cross_entropy")


def target_score(score: Tensor) -> Tensor:
    """Negation of a scalar network output; minimizing it ascends the score."""
    if score.data.size != 1:
        raise ShapeMismatch("target_score expects a scalar")
    data = -score.data

    def backward(g):
        _accum(score, -g)

    return _result(data, (score,), backward, "target_score")


def loss_eval(kind: str, prediction: Tensor, target=None,
              mask: Optional[np.ndarray] = None) -> Tensor:
    """Dispatch on the loss kind used by training and the attack loops."""
    if kind == "cross-entropy-softmax":
        return cross_entropy(prediction, target)
    if kind == "masked-mean-squared-error":
        return masked_mse(prediction, target, mask)
    if kind == "binary-cross-entropy":
        return binary_cross_entropy(prediction, target)
    if kind == "target-score":
        return target_score(prediction)
    raise ValueError(f"unknown loss kind {kind!r}")
