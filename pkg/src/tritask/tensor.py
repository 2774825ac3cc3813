"""Dense tensors with reverse-mode automatic differentiation on numpy.

Every operation returns a new Tensor whose backward closure scatters the
output gradient to its inputs; ``Tensor.backward()`` on a scalar then walks
the recorded graph once in reverse topological order.  Double precision is
the default so finite-difference checks are meaningful; training code may
switch to float32 with :func:`set_default_dtype`.
"""

from __future__ import annotations

from contextlib import contextmanager
from typing import Iterable, Sequence

import numpy as np

_DTYPE = np.float64
_FINITE_CHECKS = True


class NonFiniteError(ArithmeticError):
    """An operation produced NaN or Inf."""


def set_default_dtype(dtype) -> None:
    """Set the dtype newly created tensors use (float32 or float64)."""
    global _DTYPE
    dt = np.dtype(dtype)
    if dt.type not in (np.float32, np.float64):
        raise ValueError(f"unsupported dtype {dtype!r}; use float32 or float64")
    _DTYPE = dt.type


def default_dtype():
    return _DTYPE


def set_finite_checks(enabled: bool) -> None:
    """Toggle the NaN/Inf guard that runs after every op (on by default)."""
    global _FINITE_CHECKS
    _FINITE_CHECKS = bool(enabled)


@contextmanager
def using_dtype(dtype):
    prev = _DTYPE
    set_default_dtype(dtype)
    try:
        yield
    finally:
        set_default_dtype(prev)


def _check_finite(data: np.ndarray, op: str) -> None:
    if _FINITE_CHECKS and not np.all(np.isfinite(data)):
        raise NonFiniteError(f"{op} produced non-finite values")


class Tensor:
    """N-dimensional array with optional gradient tracking.

    Treat tensors as immutable once created; only ``grad`` accumulates.
    A leaf that never participates in a backward pass keeps ``grad=None``,
    which readers should interpret as zero.
    """

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward_fn", "_consumed")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=_DTYPE)
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._backward_fn = None
        self._consumed = False

    # -- basic introspection ------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # -- autodiff -----------------------------------------------------------

    def backward(self) -> None:
        """Propagate d(self)/d(leaf) into every participating leaf's grad.

        Requires a scalar root; a graph can be walked only once.
        """
        if self.data.size != 1:
            raise ValueError(f"backward requires a scalar root, got shape {self.shape}")
        if self._consumed:
            raise RuntimeError("graph already consumed by a previous backward call")
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
            for parent in node._parents:
                if id(parent) not in seen:
                    stack.append((parent, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward_fn is not None and node.grad is not None:
                node._backward_fn(node.grad)
                if node is not self:
                    node.grad = None  # intermediate grads are transient
        self._consumed = True

    # -- operator sugar -----------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(_as_tensor(other), self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(_as_tensor(other), self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def relu(self):
        return relu(self)

    def sigmoid(self):
        return sigmoid(self)

    def exp(self):
        return exp(self)

    def log(self):
        return log(self)

    def abs(self):
        return absolute(self)

    def clamp(self, lo, hi):
        return clamp(self, lo, hi)

    def sum(self):
        return tsum(self)

    def mean(self):
        return tmean(self)

    def reshape(self, *shape):
        return reshape(self, *shape)

    def permute(self, *axes):
        return permute(self, *axes)


def _as_tensor(x) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=_DTYPE))


def _node(data: np.ndarray, parents: Sequence[Tensor], backward_fn) -> Tensor:
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward_fn = backward_fn
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to ``shape``."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _accum(t: Tensor, grad: np.ndarray) -> None:
    if not t.requires_grad:
        return
    grad = _unbroadcast(grad, t.data.shape)
    if t.grad is None:
        # copy views so stored grads never alias (or pin) other arrays
        t.grad = grad.copy() if grad.base is not None else grad
    else:
        t.grad = t.grad + grad


# -- elementwise and shape ops ---------------------------------------------


def _binary(a, b, op: str, fwd, bwd_a, bwd_b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    try:
        with np.errstate(divide="ignore", invalid="ignore"):
            data = fwd(a.data, b.data)
    except ValueError as err:
        raise ValueError(f"{op}: shapes {a.shape} and {b.shape} incompatible") from err
    _check_finite(data, op)

    def backward(g):
        _accum(a, bwd_a(g, a.data, b.data))
        _accum(b, bwd_b(g, a.data, b.data))

    return _node(data, (a, b), backward)


def add(a, b) -> Tensor:
    return _binary(a, b, "add", lambda x, y: x + y, lambda g, x, y: g, lambda g, x, y: g)


def sub(a, b) -> Tensor:
    return _binary(a, b, "sub", lambda x, y: x - y, lambda g, x, y: g, lambda g, x, y: -g)


def mul(a, b) -> Tensor:
    return _binary(a, b, "mul", lambda x, y: x * y, lambda g, x, y: g * y, lambda g, x, y: g * x)


def div(a, b) -> Tensor:
    return _binary(
        a, b, "div",
        lambda x, y: x / y,
        lambda g, x, y: g / y,
        lambda g, x, y: -g * x / (y * y),
    )


def neg(a) -> Tensor:
    a = _as_tensor(a)
    return _node(-a.data, (a,), lambda g: _accum(a, -g))


def relu(a) -> Tensor:
    a = _as_tensor(a)
    data = np.maximum(a.data, 0)

    def backward(g):
        _accum(a, g * (a.data > 0))

    return _node(data, (a,), backward)


def sigmoid(a) -> Tensor:
    a = _as_tensor(a)
    x = a.data
    # split by sign to avoid overflow in exp
    data = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.maximum(x, 0))),
                    np.exp(np.minimum(x, 0)) / (1.0 + np.exp(np.minimum(x, 0))))
    data = data.astype(x.dtype, copy=False)

    def backward(g):
        _accum(a, g * data * (1.0 - data))

    return _node(data, (a,), backward)


def exp(a) -> Tensor:
    a = _as_tensor(a)
    data = np.exp(a.data)
    _check_finite(data, "exp")

    def backward(g):
        _accum(a, g * data)

    return _node(data, (a,), backward)


def log(a) -> Tensor:
    a = _as_tensor(a)
    with np.errstate(divide="ignore", invalid="ignore"):
        data = np.log(a.data)
    _check_finite(data, "log")

    def backward(g):
        _accum(a, g / a.data)

    return _node(data, (a,), backward)


def absolute(a) -> Tensor:
    a = _as_tensor(a)

    def backward(g):
        _accum(a, g * np.sign(a.data))

    return _node(np.abs(a.data), (a,), backward)


def clamp(a, lo: float, hi: float) -> Tensor:
    a = _as_tensor(a)
    data = np.clip(a.data, lo, hi)
    passthrough = (a.data > lo) & (a.data < hi)

    def backward(g):
        _accum(a, g * passthrough)

    return _node(data, (a,), backward)


def tsum(a) -> Tensor:
    a = _as_tensor(a)

    def backward(g):
        _accum(a, np.broadcast_to(g, a.shape))

    return _node(np.asarray(a.data.sum()), (a,), backward)


def tmean(a) -> Tensor:
    a = _as_tensor(a)
    n = a.size

    def backward(g):
        _accum(a, np.broadcast_to(g / n, a.shape))

    return _node(np.asarray(a.data.mean()), (a,), backward)


def reshape(a, *shape) -> Tensor:
    a = _as_tensor(a)
    if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
        shape = tuple(shape[0])
    data = a.data.reshape(shape)

    def backward(g):
        _accum(a, g.reshape(a.shape))

    return _node(data, (a,), backward)


def permute(a, *axes) -> Tensor:
    a = _as_tensor(a)
    if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
        axes = tuple(axes[0])
    inverse = np.argsort(axes)

    def backward(g):
        _accum(a, np.transpose(g, inverse))

    return _node(np.transpose(a.data, axes), (a,), backward)


def concat(tensors: Iterable[Tensor], axis: int = 0) -> Tensor:
    ts = [_as_tensor(t) for t in tensors]
    base = list(ts[0].shape)
    for t in ts[1:]:
        other = list(t.shape)
        if len(other) != len(base) or any(
            b != o for i, (b, o) in enumerate(zip(base, other)) if i != axis % len(base)
        ):
            raise ValueError(
                f"concat: shape {tuple(other)} incompatible with {tuple(base)} on axis {axis}"
            )
    data = np.concatenate([t.data for t in ts], axis=axis)
    offsets = np.cumsum([t.shape[axis] for t in ts])[:-1]

    def backward(g):
        for t, piece in zip(ts, np.split(g, offsets, axis=axis)):
            _accum(t, piece)

    return _node(data, ts, backward)


# -- linear algebra ----------------------------------------------------------


def matmul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul: inner dimensions of {a.shape} and {b.shape} do not match")
    data = a.data @ b.data
    _check_finite(data, "matmul")

    def backward(g):
        _accum(a, g @ b.data.T)
        _accum(b, a.data.T @ g)

    return _node(data, (a, b), backward)


def softmax(a, axis: int = -1) -> Tensor:
    a = _as_tensor(a)
    if not -a.ndim <= axis < a.ndim:
        raise ValueError(f"softmax: axis {axis} invalid for shape {a.shape}")
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    data = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        inner = (g * data).sum(axis=axis, keepdims=True)
        _accum(a, data * (g - inner))

    return _node(data, (a,), backward)


# -- spatial ops -------------------------------------------------------------


def _pair(v) -> tuple[int, int]:
    if isinstance(v, (tuple, list)):
        return int(v[0]), int(v[1])
    return int(v), int(v)


def _out_extent(n: int, pad: int, k: int, stride: int, op: str) -> int:
    span = n + 2 * pad - k
    if span < 0 or span % stride != 0:
        raise ValueError(f"{op}: non-integer output extent for size {n}, k={k}, "
                         f"stride={stride}, pad={pad}")
    return span // stride + 1


def _im2col(xp: np.ndarray, kh: int, kw: int, sh: int, sw: int, ho: int, wo: int) -> np.ndarray:
    c = xp.shape[0]
    cols = np.empty((c, kh, kw, ho, wo), dtype=xp.dtype)
    for u in range(kh):
        for v in range(kw):
            cols[:, u, v] = xp[:, u:u + sh * ho:sh, v:v + sw * wo:sw]
    return cols.reshape(c * kh * kw, ho * wo)


def _col2im(dcols: np.ndarray, c: int, hp: int, wp: int, kh: int, kw: int,
            sh: int, sw: int, ho: int, wo: int) -> np.ndarray:
    dxp = np.zeros((c, hp, wp), dtype=dcols.dtype)
    d6 = dcols.reshape(c, kh, kw, ho, wo)
    for u in range(kh):
        for v in range(kw):
            dxp[:, u:u + sh * ho:sh, v:v + sw * wo:sw] += d6[:, u, v]
    return dxp


def conv2d(x, w, b=None, stride: int = 1, pad=0) -> Tensor:
    """2-D cross-correlation over a C×H×W input.

    ``w`` is C_out×C_in×K_h×K_w; output extent must come out integral.
    """
    x, w = _as_tensor(x), _as_tensor(w)
    if x.ndim != 3 or w.ndim != 4:
        raise ValueError(f"conv2d: expected 3-D input and 4-D kernel, got {x.shape}, {w.shape}")
    co, ci, kh, kw = w.shape
    if ci != x.shape[0]:
        raise ValueError(f"conv2d: input channels {x.shape[0]} != kernel channels {ci}")
    ph, pw = _pair(pad)
    sh = sw = int(stride)
    _, h, wid = x.shape
    ho = _out_extent(h, ph, kh, sh, "conv2d")
    wo = _out_extent(wid, pw, kw, sw, "conv2d")

    xp = np.pad(x.data, ((0, 0), (ph, ph), (pw, pw)))
    cols = _im2col(xp, kh, kw, sh, sw, ho, wo)
    w2 = w.data.reshape(co, ci * kh * kw)
    out = w2 @ cols
    parents = [x, w]
    if b is not None:
        b = _as_tensor(b)
        if b.shape != (co,):
            raise ValueError(f"conv2d: bias shape {b.shape} != ({co},)")
        out = out + b.data[:, None]
        parents.append(b)
    _check_finite(out, "conv2d")

    def backward(g):
        g2 = g.reshape(co, ho * wo)
        if b is not None:
            _accum(b, g2.sum(axis=1))
        if w.requires_grad or x.requires_grad:
            cols_b = _im2col(np.pad(x.data, ((0, 0), (ph, ph), (pw, pw))), kh, kw, sh, sw, ho, wo)
            if w.requires_grad:
                _accum(w, (g2 @ cols_b.T).reshape(w.shape))
            if x.requires_grad:
                dxp = _col2im(w2.T @ g2, ci, h + 2 * ph, wid + 2 * pw, kh, kw, sh, sw, ho, wo)
                _accum(x, dxp[:, ph:ph + h, pw:pw + wid] if (ph or pw) else dxp)

    return _node(out.reshape(co, ho, wo), parents, backward)


def avgpool(x, k: int, stride: int = 1, pad: int = 0) -> Tensor:
    """Box mean with a fixed k*k divisor; padded zeros count toward the window."""
    x = _as_tensor(x)
    if x.ndim != 3:
        raise ValueError(f"avgpool: expected C×H×W input, got {x.shape}")
    c, h, w = x.shape
    ho = _out_extent(h, pad, k, stride, "avgpool")
    wo = _out_extent(w, pad, k, stride, "avgpool")
    xp = np.pad(x.data, ((0, 0), (pad, pad), (pad, pad)))
    # integral image keeps this O(HW) even for the large windows the loss weights use
    s = np.zeros((c, xp.shape[1] + 1, xp.shape[2] + 1), dtype=np.float64)
    s[:, 1:, 1:] = xp.cumsum(axis=1).cumsum(axis=2)
    r0 = np.arange(ho) * stride
    c0 = np.arange(wo) * stride
    r1, c1 = r0 + k, c0 + k
    window = (s[:, r1[:, None], c1[None, :]] - s[:, r1[:, None], c0[None, :]]
              - s[:, r0[:, None], c1[None, :]] + s[:, r0[:, None], c0[None, :]])
    data = (window / float(k * k)).astype(x.data.dtype)

    def backward(g):
        scale = g / float(k * k)
        dxp = np.zeros_like(xp)
        for u in range(k):
            for v in range(k):
                dxp[:, u:u + stride * ho:stride, v:v + stride * wo:stride] += scale
        _accum(x, dxp[:, pad:pad + h, pad:pad + w] if pad else dxp)

    return _node(data, (x,), backward)


def _bilinear_axis(n_in: int, n_out: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    # align_corners=false convention
    coords = (np.arange(n_out, dtype=np.float64) + 0.5) * (n_in / n_out) - 0.5
    coords = np.clip(coords, 0.0, n_in - 1.0)
    i0 = np.floor(coords).astype(np.intp)
    i1 = np.minimum(i0 + 1, n_in - 1)
    return i0, i1, coords - i0


def resize_bilinear(x, out_h: int, out_w: int) -> Tensor:
    """Bilinear resize of a C×H×W map (align_corners=false); differentiable."""
    x = _as_tensor(x)
    if x.ndim != 3:
        raise ValueError(f"resize_bilinear: expected C×H×W input, got {x.shape}")
    if out_h < 1 or out_w < 1:
        raise ValueError("resize_bilinear: output extents must be >= 1")
    c, h, w = x.shape
    y0, y1, fy = _bilinear_axis(h, out_h)
    x0, x1, fx = _bilinear_axis(w, out_w)
    d = x.data
    top = d[:, y0][:, :, x0] * (1 - fx) + d[:, y0][:, :, x1] * fx
    bot = d[:, y1][:, :, x0] * (1 - fx) + d[:, y1][:, :, x1] * fx
    data = top * (1 - fy)[None, :, None] + bot * fy[None, :, None]
    data = data.astype(d.dtype, copy=False)

    def backward(g):
        dx = np.zeros_like(d)
        wy = fy[None, :, None]
        gy0 = g * (1 - wy)
        gy1 = g * wy
        if out_h % h == 0 and out_w % w == 0:
            # integer upsampling factor: per-residue taps are uniform, scatter with slices
            fh, fw = out_h // h, out_w // w
            for ry in range(fh):
                ys, ye = y0[ry::fh], y1[ry::fh]
                for rx in range(fw):
                    xs, xe = x0[rx::fw], x1[rx::fw]
                    for gpart, rows in ((gy0[:, ry::fh], ys), (gy1[:, ry::fh], ye)):
                        sub0 = gpart[:, :, rx::fw] * (1 - fx[rx::fw])
                        sub1 = gpart[:, :, rx::fw] * fx[rx::fw]
                        np.add.at(dx, (slice(None), rows[:, None], xs[None, :]), sub0)
                        np.add.at(dx, (slice(None), rows[:, None], xe[None, :]), sub1)
        else:
            ci = np.arange(c)[:, None, None]
            for rows, gpart in ((y0, gy0), (y1, gy1)):
                np.add.at(dx, (ci, rows[None, :, None], x0[None, None, :]), gpart * (1 - fx))
                np.add.at(dx, (ci, rows[None, :, None], x1[None, None, :]), gpart * fx)
        _accum(x, dx)

    return _node(data, (x,), backward)


def dynamic_filter(x, f) -> Tensor:
    """Per-position grouped filtering: each spatial location carries its own
    K×K kernel, shared by all channels of a group (zero-padded borders)."""
    x, f = _as_tensor(x), _as_tensor(f)
    if x.ndim != 3 or f.ndim != 5:
        raise ValueError(f"dynamic_filter: expected C×H×W and G×H×W×K×K, got {x.shape}, {f.shape}")
    c, h, w = x.shape
    g_, fh, fw, kh, kw = f.shape
    if (fh, fw) != (h, w):
        raise ValueError(f"dynamic_filter: spatial mismatch {x.shape} vs {f.shape}")
    if kh != kw or kh % 2 == 0:
        raise ValueError(f"dynamic_filter: kernel must be square and odd, got {kh}×{kw}")
    if c % g_ != 0:
        raise ValueError(f"dynamic_filter: channels {c} not divisible by groups {g_}")
    cg = c // g_
    r = kh // 2
    xp = np.pad(x.data, ((0, 0), (r, r), (r, r)))
    out = np.zeros_like(x.data)
    for u in range(kh):
        for v in range(kw):
            taps = np.repeat(f.data[:, :, :, u, v], cg, axis=0)
            out += taps * xp[:, u:u + h, v:v + w]
    _check_finite(out, "dynamic_filter")

    def backward(g):
        if x.requires_grad:
            dxp = np.zeros_like(xp)
            for u in range(kh):
                for v in range(kw):
                    taps = np.repeat(f.data[:, :, :, u, v], cg, axis=0)
                    dxp[:, u:u + h, v:v + w] += taps * g
            _accum(x, dxp[:, r:r + h, r:r + w])
        if f.requires_grad:
            df = np.empty_like(f.data)
            for u in range(kh):
                for v in range(kw):
                    prod = g * xp[:, u:u + h, v:v + w]
                    df[:, :, :, u, v] = prod.reshape(g_, cg, h, w).sum(axis=1)
            _accum(f, df)

    return _node(out, (x, f), backward)
