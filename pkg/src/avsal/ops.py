"""Structured differentiable operators on top of the tensor core.

Conventions, fixed across the package:

* Feature maps are channels-first: ``(C, L)``, ``(C, H, W)`` or
  ``(C, T, H, W)``; token matrices are ``(tokens, dim)``.
* Convolution padding is zero same-padding: ``pad = (k - 1) // 2`` per
  axis for odd kernels, so stride-1 convs preserve spatial extents.
* Resampling uses half-pixel source coordinates without corner
  alignment: ``src = (dst + 0.5) * in/out - 0.5`` clamped to
  ``[0, in - 1]``, then linear interpolation between ``floor(src)`` and
  the next sample.
* Adaptive average pooling bins axis ``in -> out`` as
  ``[floor(j*in/out), ceil((j+1)*in/out))``; bin means are computed as
  ``pivot + mean(block - pivot)`` so constant fields pool exactly.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from .errors import ConfigError, DimensionError
from .tensor import (Tensor, add, as_tensor, matmul, mul, power, record,
                     reshape, softmax, sub, tmean, transpose)


def _tuplize(v, rank: int, name: str) -> tuple:
    if isinstance(v, int):
        return (v,) * rank
    t = tuple(int(x) for x in v)
    if len(t) != rank:
        raise ConfigError(f"{name} must have {rank} entries, got {t}")
    return t


# ---------------------------------------------------------------------------
# convolution
# ---------------------------------------------------------------------------

def conv_nd(x, w, bias=None, stride=1, padding=0, groups: int = 1) -> Tensor:
    """Cross-correlation over 1/2/3 spatial axes.

    x: (C_in, *spatial); w: (C_out, C_in/groups, *kernel); bias: (C_out,)
    or None.  Output extent per axis is
    ``(in + 2*pad - kernel)//stride + 1``.
    """
    x, w = as_tensor(x), as_tensor(w)
    rank = x.ndim - 1
    if rank not in (1, 2, 3):
        raise DimensionError(f"conv_nd supports 1-3 spatial axes, input {x.shape}")
    if w.ndim != rank + 2:
        raise DimensionError(f"kernel {w.shape} does not match input {x.shape}")
    c_in = x.shape[0]
    c_out, c_per_g = w.shape[0], w.shape[1]
    kernel = w.shape[2:]
    if c_per_g * groups != c_in or c_out % groups != 0:
        raise DimensionError(
            f"channel mismatch: input {x.shape}, kernel {w.shape}, groups={groups}")
    stride = _tuplize(stride, rank, "stride")
    padding = _tuplize(padding, rank, "padding")
    in_sp = x.shape[1:]
    out_sp = tuple((i + 2 * p - k) // s + 1
                   for i, p, k, s in zip(in_sp, padding, kernel, stride))
    if any(o < 1 for o in out_sp):
        raise DimensionError(
            f"conv output would be empty: input {x.shape}, kernel {w.shape}, "
            f"stride {stride}, padding {padding}")

    xpad = np.pad(x.data, ((0, 0),) + tuple((p, p) for p in padding))
    depthwise = (groups == c_in == c_out)

    def _window(arr, off):
        sl = tuple(slice(o, o + s * n, s) for o, s, n in zip(off, stride, out_sp))
        return arr[(slice(None),) + sl]

    out = np.zeros((c_out,) + out_sp, dtype=x.data.dtype)
    sp_axes = tuple(range(1, rank + 1))
    for off in itertools.product(*(range(k) for k in kernel)):
        xs = _window(xpad, off)
        w_off = w.data[(slice(None), slice(None)) + off]  # (C_out, C_in/g)
        if depthwise:
            out += w_off[:, 0].reshape((c_out,) + (1,) * rank) * xs
        elif groups == 1:
            out += np.tensordot(w_off, xs, axes=([1], [0]))
        else:
            opg = c_out // groups
            for gi in range(groups):
                xg = xs[gi * c_per_g:(gi + 1) * c_per_g]
                wg = w_off[gi * opg:(gi + 1) * opg]
                out[gi * opg:(gi + 1) * opg] += np.tensordot(wg, xg, axes=([1], [0]))
    if bias is not None:
        bias = as_tensor(bias)
        out = out + bias.data.reshape((c_out,) + (1,) * rank)

    inputs = (x, w) if bias is None else (x, w, bias)

    def vjp(g):
        dw = np.zeros_like(w.data)
        dxpad = np.zeros_like(xpad)
        for off in itertools.product(*(range(k) for k in kernel)):
            xs = _window(xpad, off)
            w_off = w.data[(slice(None), slice(None)) + off]
            sl = (slice(None),) + tuple(
                slice(o, o + s * n, s) for o, s, n in zip(off, stride, out_sp))
            if depthwise:
                dw[(slice(None), 0) + off] = (g * xs).sum(axis=sp_axes)
                dxpad[sl] += w_off[:, 0].reshape((c_out,) + (1,) * rank) * g
            elif groups == 1:
                dw[(slice(None), slice(None)) + off] = np.tensordot(
                    g, xs, axes=(sp_axes, sp_axes))
                dxpad[sl] += np.tensordot(w_off.T, g, axes=([1], [0]))
            else:
                opg = c_out // groups
                for gi in range(groups):
                    gg = g[gi * opg:(gi + 1) * opg]
                    xg = xs[gi * c_per_g:(gi + 1) * c_per_g]
                    wg = w_off[gi * opg:(gi + 1) * opg]
                    dw[(slice(gi * opg, (gi + 1) * opg), slice(None)) + off] = \
                        np.tensordot(gg, xg, axes=(sp_axes, sp_axes))
                    dxpad[(slice(gi * c_per_g, (gi + 1) * c_per_g),) + sl[1:]] += \
                        np.tensordot(wg.T, gg, axes=([1], [0]))
        crop_sl = (slice(None),) + tuple(
            slice(p, p + i) for p, i in zip(padding, in_sp))
        dx = dxpad[crop_sl]
        if bias is None:
            return dx, dw
        return dx, dw, g.sum(axis=sp_axes)

    return record(inputs, out, vjp)


def same_padding(kernel) -> tuple:
    """Zero same-padding amounts for odd kernel extents."""
    kernel = tuple(kernel)
    if any(k % 2 == 0 for k in kernel):
        raise ConfigError(f"same-padding needs odd kernel extents, got {kernel}")
    return tuple((k - 1) // 2 for k in kernel)


def depthwise_conv(x, kernel) -> Tensor:
    """Per-channel same-padded conv; kernel is (C, *extents), extents odd."""
    x, kernel = as_tensor(x), as_tensor(kernel)
    rank = x.ndim - 1
    if kernel.ndim != rank + 1 or kernel.shape[0] != x.shape[0]:
        raise DimensionError(
            f"depthwise kernel {kernel.shape} does not match input {x.shape}")
    pad = same_padding(kernel.shape[1:])
    c = x.shape[0]
    w = reshape(kernel, (c, 1) + kernel.shape[1:])
    return conv_nd(x, w, bias=None, stride=1, padding=pad, groups=c)


# ---------------------------------------------------------------------------
# fully connected
# ---------------------------------------------------------------------------

def fc(x, w, b=None) -> Tensor:
    """Affine map over the last axis: (..., d_in) @ (d_in, d_out) + b."""
    x, w = as_tensor(x), as_tensor(w)
    if x.shape[-1] != w.shape[0]:
        raise DimensionError(f"fc mismatch: input {x.shape} vs weight {w.shape}")
    orig = x.shape
    flat = reshape(x, (-1, orig[-1])) if x.ndim != 2 else x
    y = matmul(flat, w)
    if b is not None:
        y = add(y, as_tensor(b))
    if x.ndim != 2:
        y = reshape(y, orig[:-1] + (w.shape[1],))
    return y


# ---------------------------------------------------------------------------
# pooling
# ---------------------------------------------------------------------------

def _bins(n_in: int, n_out: int):
    return [(int(math.floor(j * n_in / n_out)),
             int(math.ceil((j + 1) * n_in / n_out))) for j in range(n_out)]


def adaptive_avg_pool(x, target) -> Tensor:
    """Average-pool (C, *spatial) down to (C, *target)."""
    x = as_tensor(x)
    rank = x.ndim - 1
    target = _tuplize(target, rank, "pool target")
    in_sp = x.shape[1:]
    for t, i in zip(target, in_sp):
        if t < 1:
            raise ConfigError(f"pool target must be >= 1, got {target}")
        if t > i:
            raise ConfigError(f"pool target {target} exceeds input extents {in_sp}")
    bins = [_bins(i, t) for i, t in zip(in_sp, target)]
    c = x.shape[0]
    out = np.empty((c,) + target, dtype=x.data.dtype)
    for pos in itertools.product(*(range(t) for t in target)):
        sl = tuple(slice(*bins[ax][j]) for ax, j in enumerate(pos))
        block = x.data[(slice(None),) + sl].reshape(c, -1)
        pivot = block[:, 0]
        out[(slice(None),) + pos] = pivot + (block - pivot[:, None]).mean(axis=1)

    def vjp(g):
        dx = np.zeros_like(x.data)
        for pos in itertools.product(*(range(t) for t in target)):
            sl = tuple(slice(*bins[ax][j]) for ax, j in enumerate(pos))
            size = 1
            for ax, j in enumerate(pos):
                b0, b1 = bins[ax][j]
                size *= b1 - b0
            gj = g[(slice(None),) + pos].reshape((c,) + (1,) * rank)
            dx[(slice(None),) + sl] += gj / size
        return (dx,)

    return record((x,), out, vjp)


def pool(x, mode: str = "global_avg", target=None) -> Tensor:
    """Channel-preserving pooling: 'global_avg' -> (C,), 'adaptive_avg' -> (C, *target)."""
    x = as_tensor(x)
    rank = x.ndim - 1
    if mode == "global_avg":
        y = adaptive_avg_pool(x, (1,) * rank)
        return reshape(y, (x.shape[0],))
    if mode == "adaptive_avg":
        if target is None:
            raise ConfigError("adaptive_avg pooling needs a target")
        return adaptive_avg_pool(x, target)
    raise ConfigError(f"unknown pool mode {mode!r}")


# ---------------------------------------------------------------------------
# resampling
# ---------------------------------------------------------------------------

def linear_resample(x, axis: int, new_size: int) -> Tensor:
    """1-D linear resampling along one axis (half-pixel coordinates)."""
    x = as_tensor(x)
    new_size = int(new_size)
    if new_size < 1:
        raise ConfigError(f"resample target must be >= 1, got {new_size}")
    n_in = x.shape[axis]
    src = np.clip((np.arange(new_size) + 0.5) * (n_in / new_size) - 0.5,
                  0.0, n_in - 1.0)
    i0 = np.floor(src).astype(np.int64)
    i1 = np.minimum(i0 + 1, n_in - 1)
    wgt = (src - i0).astype(x.data.dtype)

    xm = np.moveaxis(x.data, axis, 0)
    wshape = (new_size,) + (1,) * (xm.ndim - 1)
    wb = wgt.reshape(wshape)
    x0, x1 = xm[i0], xm[i1]
    out = np.moveaxis(x0 + wb * (x1 - x0), 0, axis)

    def vjp(g):
        gm = np.moveaxis(g, axis, 0)
        dxm = np.zeros_like(xm)
        np.add.at(dxm, i0, (1.0 - wb) * gm)
        np.add.at(dxm, i1, wb * gm)
        return (np.moveaxis(dxm, 0, axis),)

    return record((x,), out, vjp)


def trilinear_upsample(x, target) -> Tensor:
    """Resample the spatial axes of (C, *spatial) to ``target`` extents."""
    x = as_tensor(x)
    rank = x.ndim - 1
    target = _tuplize(target, rank, "resample target")
    y = x
    for ax, t in enumerate(target):
        if y.shape[ax + 1] != t:
            y = linear_resample(y, ax + 1, t)
    return y


# ---------------------------------------------------------------------------
# attention and friends
# ---------------------------------------------------------------------------

def multi_head_attention(q, k, v, params, heads: int) -> Tensor:
    """Scaled dot-product attention with per-head splits.

    q: (..., T_q, d_q); k, v: (..., T_k, d_kv).  ``params`` supplies
    wq/wk/wv mapping into a shared inner width d_i (divisible by heads)
    and wo mapping d_i to the output width; leading batch axes broadcast.
    """
    q, k, v = as_tensor(q), as_tensor(k), as_tensor(v)
    d_i = params.wq.shape[1]
    if d_i % heads != 0:
        raise ConfigError(f"attention width {d_i} not divisible by heads={heads}")
    d_h = d_i // heads

    def split(t, w, b):
        t = fc(t, w, b)
        shp = t.shape[:-1] + (heads, d_h)
        t = reshape(t, shp)
        m = len(shp)
        perm = tuple(range(m - 3)) + (m - 2, m - 3, m - 1)
        return transpose(t, perm)

    qh = split(q, params.wq, params.bq)
    kh = split(k, params.wk, params.bk)
    vh = split(v, params.wv, params.bv)
    kt = transpose(kh, tuple(range(kh.ndim - 2)) + (kh.ndim - 1, kh.ndim - 2))
    scores = mul(matmul(qh, kt), 1.0 / math.sqrt(d_h))
    attn = softmax(scores, axis=-1)
    ctx = matmul(attn, vh)  # (..., heads, T_q, d_h)
    m = ctx.ndim
    ctx = transpose(ctx, tuple(range(m - 3)) + (m - 2, m - 3, m - 1))
    ctx = reshape(ctx, ctx.shape[:-2] + (d_i,))
    return fc(ctx, params.wo, params.bo)


def layer_norm(x, gain, bias, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis to zero mean / unit variance, then affine."""
    x = as_tensor(x)
    mu = tmean(x, axis=-1, keepdims=True)
    xc = sub(x, mu)
    var = tmean(mul(xc, xc), axis=-1, keepdims=True)
    inv = power(add(var, eps), -0.5)
    return add(mul(mul(xc, inv), as_tensor(gain)), as_tensor(bias))


def bilinear_form(h_a, w, h_v) -> Tensor:
    """Row-wise bilinear map: out[t, o] = sum_ij a[t,i] * w[i,o,j] * b[t,j]."""
    h_a, w, h_v = as_tensor(h_a), as_tensor(w), as_tensor(h_v)
    if h_a.ndim != 2 or h_v.ndim != 2 or w.ndim != 3:
        raise DimensionError(
            f"bilinear_form expects (k,d_a), (d_a,d_o,d_v), (k,d_v); "
            f"got {h_a.shape}, {w.shape}, {h_v.shape}")
    if h_a.shape[0] != h_v.shape[0] or h_a.shape[1] != w.shape[0] \
            or h_v.shape[1] != w.shape[2]:
        raise DimensionError(
            f"bilinear_form mismatch: {h_a.shape} x {w.shape} x {h_v.shape}")
    out = np.einsum("ti,ioj,tj->to", h_a.data, w.data, h_v.data, optimize=True)

    def vjp(g):
        da = np.einsum("to,ioj,tj->ti", g, w.data, h_v.data, optimize=True)
        dw = np.einsum("ti,to,tj->ioj", h_a.data, g, h_v.data, optimize=True)
        db = np.einsum("to,ioj,ti->tj", g, w.data, h_a.data, optimize=True)
        return da, dw, db

    return record((h_a, w, h_v), out, vjp)


def positional_encoding(length: int, dim: int) -> np.ndarray:
    """Sinusoidal position table: sin on even columns, cos on odd ones."""
    pe = np.zeros((length, dim))
    pos = np.arange(length, dtype=np.float64)[:, None]
    idx = np.arange(0, dim, 2, dtype=np.float64)
    angle = pos / np.power(10000.0, idx / dim)[None, :]
    pe[:, 0::2] = np.sin(angle)
    pe[:, 1::2] = np.cos(angle)[:, : pe[:, 1::2].shape[1]]
    return pe
