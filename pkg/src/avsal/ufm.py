"""Frequency-aware feature block over token matrices.

Three parallel branches filter a token matrix (tokens, d) and are fused
by elementwise sum:

* high branch  — per-token linear map, then a depthwise conv applied
  after refolding tokens onto their spatial layout (local detail).
* low branch   — multi-head self-attention over the tokens (global
  smoothing).
* channel branch — tokens are mean-pooled, a linear map produces one
  gate per channel, and the gate multiplies every token.

The branch set is configurable; with no branches enabled the block is
the identity map, bit for bit.  Token/spatial duality: refolding uses a
row-major layout tuple whose product must equal the token count.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ConfigError, DimensionError
from .ops import depthwise_conv, fc, multi_head_attention
from .tensor import Tensor, add, mul, reshape, tmean, transpose

VALID_BRANCHES = ("high", "low", "channel")


@dataclass
class AttnParams:
    wq: Tensor
    bq: Tensor
    wk: Tensor
    bk: Tensor
    wv: Tensor
    bv: Tensor
    wo: Tensor
    bo: Tensor


def make_attn_params(pset, prefix: str, d_q: int, d_kv: int, d_inner: int,
                     d_out: int) -> AttnParams:
    return AttnParams(
        wq=pset.weight(f"{prefix}.wq", (d_q, d_inner), fan_in=d_q),
        bq=pset.zeros(f"{prefix}.bq", (d_inner,)),
        wk=pset.weight(f"{prefix}.wk", (d_kv, d_inner), fan_in=d_kv),
        bk=pset.zeros(f"{prefix}.bk", (d_inner,)),
        wv=pset.weight(f"{prefix}.wv", (d_kv, d_inner), fan_in=d_kv),
        bv=pset.zeros(f"{prefix}.bv", (d_inner,)),
        wo=pset.weight(f"{prefix}.wo", (d_inner, d_out), fan_in=d_inner),
        bo=pset.zeros(f"{prefix}.bo", (d_out,)),
    )


class FrequencyBlock:
    """Shape-preserving (tokens, d) -> (tokens, d) filter."""

    def __init__(self, pset, prefix: str, d: int, heads: int, kernel,
                 branches=VALID_BRANCHES):
        kernel = tuple(int(k) for k in kernel)
        for b in branches:
            if b not in VALID_BRANCHES:
                raise ConfigError(f"unknown branch {b!r}; valid: {VALID_BRANCHES}")
        if "low" in branches and d % heads != 0:
            raise ConfigError(f"width {d} not divisible by heads={heads}")
        self.d = d
        self.heads = heads
        self.kernel = kernel
        self.branches = tuple(branches)
        if "high" in branches:
            self.high_fc_w = pset.weight(f"{prefix}.high.fc.weight", (d, d), fan_in=d)
            self.high_fc_b = pset.zeros(f"{prefix}.high.fc.bias", (d,))
            fan = 1
            for k in kernel:
                fan *= k
            self.high_conv = pset.weight(f"{prefix}.high.conv.weight",
                                         (d,) + kernel, fan_in=fan)
        if "low" in branches:
            self.low_attn = make_attn_params(pset, f"{prefix}.low", d, d, d, d)
        if "channel" in branches:
            self.gate_w = pset.weight(f"{prefix}.channel.fc.weight", (d, d), fan_in=d)
            self.gate_b = pset.zeros(f"{prefix}.channel.fc.bias", (d,))

    def _check(self, x: Tensor, layout) -> tuple:
        layout = tuple(int(s) for s in layout)
        if x.ndim != 2 or x.shape[1] != self.d:
            raise DimensionError(f"expected (tokens, {self.d}) input, got {x.shape}")
        n = 1
        for s in layout:
            n *= s
        if n != x.shape[0]:
            raise DimensionError(
                f"token count {x.shape[0]} incompatible with layout {layout}")
        if len(layout) != len(self.kernel):
            raise DimensionError(
                f"layout rank {len(layout)} does not match kernel rank "
                f"{len(self.kernel)}")
        return layout

    def high_branch(self, x: Tensor, layout) -> Tensor:
        layout = self._check(x, layout)
        y = fc(x, self.high_fc_w, self.high_fc_b)
        rank = len(layout)
        lattice = reshape(y, layout + (self.d,))
        lattice = transpose(lattice, (rank,) + tuple(range(rank)))  # (d, *layout)
        lattice = depthwise_conv(lattice, self.high_conv)
        lattice = transpose(lattice, tuple(range(1, rank + 1)) + (0,))
        return reshape(lattice, (x.shape[0], self.d))

    def low_branch(self, x: Tensor, layout=None) -> Tensor:
        if layout is not None:
            self._check(x, layout)
        return multi_head_attention(x, x, x, self.low_attn, self.heads)

    def channel_branch(self, x: Tensor, layout=None) -> Tensor:
        pooled = tmean(x, axis=0)           # (d,)
        gate = fc(pooled, self.gate_w, self.gate_b)
        return mul(x, gate)

    def forward(self, x: Tensor, layout) -> Tensor:
        """Sum of enabled branch outputs; identity when none are enabled."""
        if not self.branches:
            return x
        self._check(x, layout)
        out = None
        for name in self.branches:
            y = {"high": self.high_branch,
                 "low": self.low_branch,
                 "channel": self.channel_branch}[name](x, layout)
            out = y if out is None else add(out, y)
        return out

    __call__ = forward
