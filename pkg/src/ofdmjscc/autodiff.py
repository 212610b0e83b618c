"""Minimal reverse-mode differentiation engine over real-valued arrays.

Values live in :class:`Grid` objects (n-dimensional real arrays with an
optional gradient slot). Complex quantities are carried as interleaved
(real, imag) pairs in a trailing dimension of extent 2, so every complex
operation is a composite of real ones and differentiates for free.

Ops record closures on the output node; ``Grid.backward()`` replays the
recorded tape in reverse topological order, accumulating exact partials
into each input. ``gradient_check`` is the finite-difference oracle used
to validate every analytic backward pass.
"""

from __future__ import annotations

import contextlib
from typing import Callable, Iterable, Sequence

import numpy as np

__all__ = [
    "Grid",
    "no_grad",
    "constant",
    "add", "sub", "mul", "div", "neg",
    "relu", "leaky_relu", "sigmoid", "tanh", "square", "sqrt", "exp",
    "softplus", "where",
    "cmul", "cmulc", "conj", "cabs2",
    "reduce_sum", "reduce_mean",
    "reshape", "transpose", "concat",
    "conv2d", "conv_transpose2d",
    "idft_rows", "dft_rows", "channel_conv",
    "gradient_check",
]

_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block (forward values only)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class Grid:
    """Real-valued n-d array with an optional gradient of the same shape."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64) if not isinstance(
            data, np.ndarray) else data
        if self.data.dtype not in (np.float32, np.float64):
            self.data = self.data.astype(np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple = ()
        self._backward: Callable[[np.ndarray], None] | None = None

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def detach(self) -> "Grid":
        """Same values, cut from the graph (no gradient flows through)."""
        return Grid(self.data, requires_grad=False)

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        """Reverse-mode sweep from this node; output must be scalar."""
        if self.data.size != 1:
            raise ValueError(
                f"backward requires a scalar output, got shape {self.shape}")
        tape: list[Grid] = []
        visited: set[int] = set()
        stack: list[tuple[Grid, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                tape.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in visited:
                    stack.append((parent, False))
        self._accum(np.ones_like(self.data))
        for node in reversed(tape):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    def _accum(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = g.astype(self.data.dtype, copy=True)
        else:
            self.grad += g

    # Operator sugar; scalars are folded in as constants.
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(_wrap(other, self.dtype), self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return neg(self)

    def __getitem__(self, key):
        return _slice(self, key)

    def __repr__(self):
        return f"Grid(shape={self.shape}, dtype={self.data.dtype}, " \
               f"requires_grad={self.requires_grad})"


def constant(data, dtype=None) -> Grid:
    arr = np.asarray(data, dtype=dtype if dtype is not None else np.float64)
    return Grid(arr, requires_grad=False)


def _wrap(x, dtype) -> Grid:
    if isinstance(x, Grid):
        return x
    return Grid(np.asarray(x, dtype=dtype), requires_grad=False)


def _make(data: np.ndarray, parents: Sequence[Grid],
          backward: Callable[[np.ndarray], None] | None) -> Grid:
    if not np.all(np.isfinite(data)):
        raise FloatingPointError("non-finite values produced by an op")
    out = Grid(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(p for p in parents if p.requires_grad)
        out._backward = backward
    return out


def _sum_to(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Reduce a broadcasted gradient back to the original operand shape."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, (gs, s) in enumerate(zip(g.shape, shape)) if s == 1 and gs != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def _check_broadcast(a: Grid, b: Grid, op: str) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ValueError(
            f"{op}: shapes {a.shape} and {b.shape} are not broadcast-compatible"
        ) from None


# ---------------------------------------------------------------------------
# elementwise ops
# ---------------------------------------------------------------------------

def add(a, b) -> Grid:
    a = _wrap(a, getattr(b, "dtype", np.float64)) if not isinstance(a, Grid) else a
    b = _wrap(b, a.dtype)
    _check_broadcast(a, b, "add")
    out_data = a.data + b.data

    def backward(g):
        a._accum(_sum_to(g, a.shape))
        b._accum(_sum_to(g, b.shape))

    return _make(out_data, (a, b), backward)


def sub(a, b) -> Grid:
    a = _wrap(a, getattr(b, "dtype", np.float64)) if not isinstance(a, Grid) else a
    b = _wrap(b, a.dtype)
    _check_broadcast(a, b, "sub")
    out_data = a.data - b.data

    def backward(g):
        a._accum(_sum_to(g, a.shape))
        b._accum(-_sum_to(g, b.shape))

    return _make(out_data, (a, b), backward)


def mul(a, b) -> Grid:
    a = _wrap(a, getattr(b, "dtype", np.float64)) if not isinstance(a, Grid) else a
    b = _wrap(b, a.dtype)
    _check_broadcast(a, b, "mul")
    out_data = a.data * b.data

    def backward(g):
        a._accum(_sum_to(g * b.data, a.shape))
        b._accum(_sum_to(g * a.data, b.shape))

    return _make(out_data, (a, b), backward)


def div(a, b) -> Grid:
    a = _wrap(a, getattr(b, "dtype", np.float64)) if not isinstance(a, Grid) else a
    b = _wrap(b, a.dtype)
    _check_broadcast(a, b, "div")
    if np.any(b.data == 0.0):
        raise ZeroDivisionError("div: zero entries in the denominator")
    out_data = a.data / b.data

    def backward(g):
        a._accum(_sum_to(g / b.data, a.shape))
        b._accum(_sum_to(-g * a.data / (b.data * b.data), b.shape))

    return _make(out_data, (a, b), backward)


def neg(a: Grid) -> Grid:
    def backward(g):
        a._accum(-g)

    return _make(-a.data, (a,), backward)


def relu(a: Grid) -> Grid:
    # Right-limit subgradient: derivative 1 at exactly zero.
    mask = a.data >= 0.0

    def backward(g):
        a._accum(g * mask)

    return _make(np.where(mask, a.data, 0.0).astype(a.dtype), (a,), backward)


def leaky_relu(a: Grid, slope: float = 0.2) -> Grid:
    mask = a.data >= 0.0
    d = np.where(mask, a.dtype.type(1.0), a.dtype.type(slope))

    def backward(g):
        a._accum(g * d)

    return _make(a.data * d, (a,), backward)


def sigmoid(a: Grid) -> Grid:
    out_data = 1.0 / (1.0 + np.exp(-a.data))

    def backward(g):
        a._accum(g * out_data * (1.0 - out_data))

    return _make(out_data.astype(a.dtype), (a,), backward)


def tanh(a: Grid) -> Grid:
    out_data = np.tanh(a.data)

    def backward(g):
        a._accum(g * (1.0 - out_data * out_data))

    return _make(out_data, (a,), backward)


def square(a: Grid) -> Grid:
    def backward(g):
        a._accum(g * 2.0 * a.data)

    return _make(a.data * a.data, (a,), backward)


def sqrt(a: Grid) -> Grid:
    if np.any(a.data < 0.0):
        raise ValueError("sqrt: negative entries")
    out_data = np.sqrt(a.data)

    def backward(g):
        if np.any(out_data == 0.0):
            raise ZeroDivisionError("sqrt backward at zero")
        a._accum(g / (2.0 * out_data))

    return _make(out_data, (a,), backward)


def exp(a: Grid) -> Grid:
    out_data = np.exp(a.data)

    def backward(g):
        a._accum(g * out_data)

    return _make(out_data.astype(a.dtype), (a,), backward)


def softplus(a: Grid) -> Grid:
    # log(1+e^x), evaluated stably; derivative is the sigmoid.
    out_data = np.logaddexp(0.0, a.data).astype(a.dtype)
    sig = 1.0 / (1.0 + np.exp(-a.data))

    def backward(g):
        a._accum(g * sig)

    return _make(out_data, (a,), backward)


def where(cond: np.ndarray, a, b) -> Grid:
    """Select from a where cond else b; cond is a constant boolean mask."""
    cond = np.asarray(cond, dtype=bool)
    ref = a if isinstance(a, Grid) else b
    a = _wrap(a, ref.dtype)
    b = _wrap(b, ref.dtype)
    out_data = np.where(cond, a.data, b.data)

    def backward(g):
        a._accum(_sum_to(np.where(cond, g, 0.0), a.shape))
        b._accum(_sum_to(np.where(cond, 0.0, g), b.shape))

    return _make(out_data, (a, b), backward)


# ---------------------------------------------------------------------------
# complex pair ops (trailing dimension of extent 2 holds (real, imag))
# ---------------------------------------------------------------------------

def _complex_view(a: np.ndarray) -> np.ndarray:
    if a.shape[-1] != 2:
        raise ValueError(f"complex op expects trailing extent 2, got {a.shape}")
    return a[..., 0] + 1j * a[..., 1]


def _pair_view(z: np.ndarray, dtype) -> np.ndarray:
    out = np.empty(z.shape + (2,), dtype=dtype)
    out[..., 0] = z.real
    out[..., 1] = z.imag
    return out


def cmul(a: Grid, b: Grid) -> Grid:
    """Complex product a*b on interleaved pairs (broadcasting allowed)."""
    _check_broadcast(a, b, "cmul")
    za, zb = _complex_view(a.data), _complex_view(b.data)
    out_data = _pair_view(za * zb, a.dtype)

    def backward(g):
        zg = _complex_view(g)
        a._accum(_sum_to(_pair_view(zg * np.conj(zb), a.dtype), a.shape))
        b._accum(_sum_to(_pair_view(zg * np.conj(za), b.dtype), b.shape))

    return _make(out_data, (a, b), backward)


def cmulc(a: Grid, b: Grid) -> Grid:
    """Complex product a*conj(b) on interleaved pairs."""
    _check_broadcast(a, b, "cmulc")
    za, zb = _complex_view(a.data), _complex_view(b.data)
    out_data = _pair_view(za * np.conj(zb), a.dtype)

    def backward(g):
        zg = _complex_view(g)
        a._accum(_sum_to(_pair_view(zg * zb, a.dtype), a.shape))
        b._accum(_sum_to(_pair_view(np.conj(zg) * za, b.dtype), b.shape))

    return _make(out_data, (a, b), backward)


def conj(a: Grid) -> Grid:
    out_data = a.data.copy()
    out_data[..., 1] = -out_data[..., 1]

    def backward(g):
        gc = g.copy()
        gc[..., 1] = -gc[..., 1]
        a._accum(gc)

    return _make(out_data, (a,), backward)


def cabs2(a: Grid) -> Grid:
    """Squared complex magnitude; drops the trailing pair dimension."""
    if a.shape[-1] != 2:
        raise ValueError(f"cabs2 expects trailing extent 2, got {a.shape}")
    out_data = a.data[..., 0] ** 2 + a.data[..., 1] ** 2

    def backward(g):
        a._accum(2.0 * g[..., None] * a.data)

    return _make(out_data, (a,), backward)


# ---------------------------------------------------------------------------
# reductions and shape ops
# ---------------------------------------------------------------------------

def _norm_axis(axis, ndim) -> tuple:
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(ax % ndim for ax in axis)


def reduce_sum(a: Grid, axis=None, keepdims: bool = False) -> Grid:
    axes = _norm_axis(axis, a.data.ndim)
    out_data = a.data.sum(axis=axes, keepdims=keepdims)

    def backward(g):
        gg = g
        if not keepdims:
            gg = np.expand_dims(g, axes)
        a._accum(np.broadcast_to(gg, a.shape).astype(a.dtype))

    return _make(out_data, (a,), backward)


def reduce_mean(a: Grid, axis=None, keepdims: bool = False) -> Grid:
    axes = _norm_axis(axis, a.data.ndim)
    count = int(np.prod([a.shape[ax] for ax in axes]))
    out_data = a.data.mean(axis=axes, keepdims=keepdims)

    def backward(g):
        gg = g
        if not keepdims:
            gg = np.expand_dims(g, axes)
        a._accum((np.broadcast_to(gg, a.shape) / count).astype(a.dtype))

    return _make(out_data, (a,), backward)


def reshape(a: Grid, shape) -> Grid:
    out_data = a.data.reshape(shape)

    def backward(g):
        a._accum(g.reshape(a.shape))

    return _make(out_data, (a,), backward)


def transpose(a: Grid, axes) -> Grid:
    inv = np.argsort(axes)
    out_data = a.data.transpose(axes)

    def backward(g):
        a._accum(g.transpose(inv))

    return _make(out_data, (a,), backward)


def concat(parts: Iterable[Grid], axis: int) -> Grid:
    parts = [p if isinstance(p, Grid) else Grid(np.asarray(p)) for p in parts]
    out_data = np.concatenate([p.data for p in parts], axis=axis)
    sizes = [p.shape[axis] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            idx = [slice(None)] * g.ndim
            idx[axis] = slice(lo, hi)
            p._accum(g[tuple(idx)])

    return _make(out_data, tuple(parts), backward)


def _slice(a: Grid, key) -> Grid:
    out_data = a.data[key]

    def backward(g):
        full = np.zeros_like(a.data)
        full[key] += g
        a._accum(full)

    return _make(out_data, (a,), backward)


# ---------------------------------------------------------------------------
# convolutions
# ---------------------------------------------------------------------------

def _conv_out_extent(n: int, k: int, stride: int, pad: int, name: str) -> int:
    span = n + 2 * pad - k
    if span < 0 or span % stride != 0:
        raise ValueError(
            f"conv2d: non-integral output extent along {name}: "
            f"({n} + 2*{pad} - {k}) / {stride} + 1")
    return span // stride + 1


def _im2col(x: np.ndarray, kh: int, kw: int, stride: int) -> np.ndarray:
    """Patches of a padded [B,C,H,W] input as [B, C*kh*kw, Ho*Wo]."""
    b, c, h, w = x.shape
    ho = (h - kh) // stride + 1
    wo = (w - kw) // stride + 1
    sb, sc, sh, sw = x.strides
    patches = np.lib.stride_tricks.as_strided(
        x,
        shape=(b, c, kh, kw, ho, wo),
        strides=(sb, sc, sh, sw, stride * sh, stride * sw),
        writeable=False,
    )
    return patches.reshape(b, c * kh * kw, ho * wo), ho, wo


def _col2im(cols: np.ndarray, shape, kh: int, kw: int, stride: int) -> np.ndarray:
    """Scatter-add [B, C*kh*kw, Ho*Wo] columns back onto [B,C,H,W]."""
    b, c, h, w = shape
    ho = (h - kh) // stride + 1
    wo = (w - kw) // stride + 1
    cols = cols.reshape(b, c, kh, kw, ho, wo)
    out = np.zeros(shape, dtype=cols.dtype)
    for i in range(kh):
        for j in range(kw):
            out[:, :, i:i + stride * ho:stride, j:j + stride * wo:stride] += \
                cols[:, :, i, j]
    return out


def conv2d(x: Grid, w: Grid, bias: Grid | None = None,
           stride: int = 1, padding: int = 0) -> Grid:
    """Batched 2D cross-correlation.

    x: [B, C_in, H, W] (or [C_in, H, W]), w: [C_out, C_in, kH, kW],
    bias: [C_out] or None. Output extents must be integral.
    """
    squeeze = x.data.ndim == 3
    xd = x.data[None] if squeeze else x.data
    if xd.ndim != 4 or w.data.ndim != 4:
        raise ValueError(f"conv2d: bad ranks {x.shape} / {w.shape}")
    b, cin, h, wd_ = xd.shape
    cout, cin_w, kh, kw = w.shape
    if cin != cin_w:
        raise ValueError(f"conv2d: channel mismatch {cin} vs {cin_w}")
    ho = _conv_out_extent(h, kh, stride, padding, "height")
    wo = _conv_out_extent(wd_, kw, stride, padding, "width")
    xp = np.pad(xd, ((0, 0), (0, 0), (padding, padding), (padding, padding))) \
        if padding else xd
    cols, _, _ = _im2col(xp, kh, kw, stride)
    wmat = w.data.reshape(cout, -1)
    out_data = np.matmul(wmat, cols).reshape(b, cout, ho, wo)
    if bias is not None:
        out_data = out_data + bias.data.reshape(1, cout, 1, 1)
    if squeeze:
        out_data = out_data[0]

    padded_shape = xp.shape
    cols_saved = np.ascontiguousarray(cols)

    def backward(g):
        gb = g[None] if squeeze else g
        gflat = np.ascontiguousarray(gb.reshape(b, cout, ho * wo))
        gw = np.matmul(gflat, cols_saved.transpose(0, 2, 1)).sum(axis=0)
        w._accum(gw.reshape(w.shape))
        if bias is not None:
            bias._accum(gb.sum(axis=(0, 2, 3)))
        if stride == 1 and kh > padding and kw > padding:
            # adjoint of a stride-1 correlation is correlation with the
            # flipped, channel-swapped kernel; keeps everything in BLAS
            wt = np.ascontiguousarray(
                w.data[:, :, ::-1, ::-1].transpose(1, 0, 2, 3))
            gp = np.pad(gb, ((0, 0), (0, 0), (kh - 1 - padding,) * 2,
                             (kw - 1 - padding,) * 2))
            back_cols, _, _ = _im2col(gp, kh, kw, 1)
            gx = np.matmul(wt.reshape(cin, -1), back_cols).reshape(
                b, cin, h, wd_)
        else:
            gcols = np.matmul(wmat.T, gflat)
            gx = _col2im(gcols, padded_shape, kh, kw, stride)
            if padding:
                gx = gx[:, :, padding:-padding, padding:-padding]
        x._accum(gx[0] if squeeze else gx)

    parents = (x, w) if bias is None else (x, w, bias)
    return _make(out_data, parents, backward)


def conv_transpose2d(x: Grid, w: Grid, bias: Grid | None = None,
                     stride: int = 1, padding: int = 0) -> Grid:
    """Adjoint of conv2d (up-scaling); w: [C_in, C_out, kH, kW]."""
    squeeze = x.data.ndim == 3
    xd = x.data[None] if squeeze else x.data
    b, cin, h, wd_ = xd.shape
    cin_w, cout, kh, kw = w.shape
    if cin != cin_w:
        raise ValueError(f"conv_transpose2d: channel mismatch {cin} vs {cin_w}")
    hp = (h - 1) * stride + kh
    wp = (wd_ - 1) * stride + kw
    ho, wo = hp - 2 * padding, wp - 2 * padding
    if ho <= 0 or wo <= 0:
        raise ValueError("conv_transpose2d: padding larger than output")
    wmat = w.data.reshape(cin, cout * kh * kw)
    xflat = np.ascontiguousarray(xd.reshape(b, cin, h * wd_))
    cols = np.matmul(wmat.T, xflat)
    full = _col2im(cols, (b, cout, hp, wp), kh, kw, stride)
    out_data = full[:, :, padding:hp - padding, padding:wp - padding] \
        if padding else full
    if bias is not None:
        out_data = out_data + bias.data.reshape(1, cout, 1, 1)
    if squeeze:
        out_data = out_data[0]

    def backward(g):
        gb = g[None] if squeeze else g
        gp = np.pad(gb, ((0, 0), (0, 0), (padding, padding),
                         (padding, padding))) if padding else gb
        gcols, _, _ = _im2col(np.ascontiguousarray(gp), kh, kw, stride)
        gcols = np.ascontiguousarray(gcols)
        gx = np.matmul(wmat, gcols).reshape(xd.shape)
        gw = np.matmul(xflat, gcols.transpose(0, 2, 1)).sum(axis=0)
        x._accum(gx[0] if squeeze else gx)
        w._accum(gw.reshape(w.shape))
        if bias is not None:
            bias._accum(gb.sum(axis=(0, 2, 3)))

    parents = (x, w) if bias is None else (x, w, bias)
    return _make(out_data, parents, backward)


# ---------------------------------------------------------------------------
# linear signal ops
# ---------------------------------------------------------------------------

def idft_rows(a: Grid) -> Grid:
    """Unitary inverse DFT along the second-to-last axis of pairs [..., N, 2]."""
    z = _complex_view(a.data)
    out_data = _pair_view(np.fft.ifft(z, axis=-1, norm="ortho"), a.dtype)

    def backward(g):
        gz = _complex_view(g)
        a._accum(_pair_view(np.fft.fft(gz, axis=-1, norm="ortho"), a.dtype))

    return _make(out_data, (a,), backward)


def dft_rows(a: Grid) -> Grid:
    """Unitary DFT along the second-to-last axis of pairs [..., N, 2]."""
    z = _complex_view(a.data)
    out_data = _pair_view(np.fft.fft(z, axis=-1, norm="ortho"), a.dtype)

    def backward(g):
        gz = _complex_view(g)
        a._accum(_pair_view(np.fft.ifft(gz, axis=-1, norm="ortho"), a.dtype))

    return _make(out_data, (a,), backward)


def channel_conv(y: Grid, taps: np.ndarray) -> Grid:
    """Same-length complex convolution with fixed taps.

    y: [..., N, 2] differentiable input, taps: constant [..., L, 2] with
    leading dims broadcastable against y's. Output keeps the first N samples
    of the linear convolution; backward correlates with conj(taps).
    """
    if y.data.shape[-1] != 2 or taps.shape[-1] != 2:
        raise ValueError("channel_conv expects interleaved complex pairs")
    n = y.shape[-2]
    nt = taps.shape[-2]
    if n < nt:
        raise ValueError(f"channel_conv: input length {n} shorter than taps {nt}")
    z = _complex_view(y.data)
    hc = _complex_view(np.asarray(taps, dtype=y.dtype))
    out = np.zeros(np.broadcast_shapes(z.shape, hc.shape[:-1] + (n,)),
                   dtype=z.dtype)
    for l in range(nt):
        if l == 0:
            out += hc[..., 0:1] * z
        else:
            out[..., l:] += hc[..., l:l + 1] * z[..., :n - l]

    def backward(g):
        gz = _complex_view(g)
        acc = np.zeros(z.shape, dtype=z.dtype)
        hcc = np.conj(hc)
        for l in range(nt):
            if l == 0:
                acc += hcc[..., 0:1] * gz
            else:
                acc[..., :n - l] += hcc[..., l:l + 1] * gz[..., l:]
        y._accum(_pair_view(acc, y.dtype))

    return _make(_pair_view(out, y.dtype), (y,), backward)


# ---------------------------------------------------------------------------
# finite-difference oracle
# ---------------------------------------------------------------------------

def gradient_check(f: Callable[..., Grid], inputs: Sequence[Grid],
                   step: float = 1e-6) -> float:
    """Max relative error between analytic and central-difference gradients.

    f must return a scalar Grid; inputs should be 64-bit. The relative
    error at each coordinate is |analytic - numeric| / max(|analytic|, 1e-8).
    """
    inputs = list(inputs)
    for x in inputs:
        if x.data.dtype != np.float64:
            raise ValueError("gradient_check requires float64 inputs")
        x.requires_grad = True
        x.grad = None
    out = f(*inputs)
    if out.size != 1:
        raise ValueError(f"gradient_check: f must be scalar, got {out.shape}")
    out.backward()
    analytic = [np.zeros_like(x.data) if x.grad is None else x.grad.copy()
                for x in inputs]

    worst = 0.0
    with no_grad():
        for x, ga in zip(inputs, analytic):
            flat = x.data.reshape(-1)
            gflat = ga.reshape(-1)
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + step
                fp = f(*inputs).item()
                flat[i] = orig - step
                fm = f(*inputs).item()
                flat[i] = orig
                numeric = (fp - fm) / (2.0 * step)
                rel = abs(gflat[i] - numeric) / max(abs(gflat[i]), 1e-8)
                worst = max(worst, rel)
    return worst
