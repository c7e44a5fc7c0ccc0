"""Cross-modal fusion: affinity construction plus a token encoder.

The affinity between audio tokens h_a (k, d_a) and video tokens
h_v (k, d_v) is the sum of two routes:

* a row-wise bilinear map,  A_lo[t, o] = sum_ij h_a[t,i] W[i,o,j] h_v[t,j] + b[o]
* cross attention with the video tokens as queries and the audio tokens
  as keys/values, projected to the same width.

The fused affinity (k, d_o) gets a sinusoidal positional table, runs
through pre-norm transformer blocks, is broadcast onto a (k, h0, w0)
lattice (each token fills one 1 x h0 x w0 time slab), and finishes with
a 3-D conv + adaptive average pooling stage.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionError
from .ops import (adaptive_avg_pool, bilinear_form, conv_nd, fc, layer_norm,
                  multi_head_attention, positional_encoding, same_padding)
from .tensor import (Tensor, add, broadcast_to, gelu, relu, reshape,
                     transpose)
from .ufm import make_attn_params


class FusionModule:
    def __init__(self, cfg, pset, d_a: int, d_v: int):
        self.k = cfg.k
        self.d_o = cfg.d_o
        self.heads = cfg.heads
        self.tile = tuple(cfg.fusion_tile)
        self.pool_target = tuple(cfg.fusion_pool)
        self.no_inter = cfg.no_inter
        self.use_pe = cfg.use_pe
        if self.no_inter:
            self.proj_w = pset.weight("fusion.video_proj.weight",
                                      (d_v, self.d_o), fan_in=d_v)
            self.proj_b = pset.zeros("fusion.video_proj.bias", (self.d_o,))
        else:
            self.bi_w = pset.weight("fusion.bilinear.weight",
                                    (d_a, self.d_o, d_v), fan_in=d_a * d_v)
            self.bi_b = pset.zeros("fusion.bilinear.bias", (self.d_o,))
            self.mca = make_attn_params(pset, "fusion.mca", d_v, d_a,
                                        self.d_o, self.d_o)
        self.blocks = []
        hidden = int(round(self.d_o * cfg.mlp_ratio))
        for i in range(cfg.fusion_blocks):
            p = f"fusion.block{i + 1}"
            self.blocks.append({
                "ln1_g": pset.ones(f"{p}.norm1.gain", (self.d_o,)),
                "ln1_b": pset.zeros(f"{p}.norm1.bias", (self.d_o,)),
                "attn": make_attn_params(pset, f"{p}.attn", self.d_o, self.d_o,
                                         self.d_o, self.d_o),
                "ln2_g": pset.ones(f"{p}.norm2.gain", (self.d_o,)),
                "ln2_b": pset.zeros(f"{p}.norm2.bias", (self.d_o,)),
                "mlp_w1": pset.weight(f"{p}.mlp.fc1.weight", (self.d_o, hidden),
                                      fan_in=self.d_o),
                "mlp_b1": pset.zeros(f"{p}.mlp.fc1.bias", (hidden,)),
                "mlp_w2": pset.weight(f"{p}.mlp.fc2.weight", (hidden, self.d_o),
                                      fan_in=hidden),
                "mlp_b2": pset.zeros(f"{p}.mlp.fc2.bias", (self.d_o,)),
            })
        kernel = (3, 3, 3)
        self.conv_w = pset.weight("fusion.conv.weight",
                                  (cfg.fusion_channels, self.d_o) + kernel,
                                  fan_in=self.d_o * 27)
        self.conv_b = pset.zeros("fusion.conv.bias", (cfg.fusion_channels,))
        self._pe = positional_encoding(self.k, self.d_o)

    # ---- affinity routes ------------------------------------------------
    def bilinear_affinity(self, h_a: Tensor, h_v: Tensor) -> Tensor:
        return add(bilinear_form(h_a, self.bi_w, h_v), self.bi_b)

    def cross_attention_affinity(self, h_a: Tensor, h_v: Tensor) -> Tensor:
        return multi_head_attention(h_v, h_a, h_a, self.mca, self.heads)

    def affinity(self, h_a: Tensor, h_v: Tensor) -> Tensor:
        """Fused affinity (k, d_o) = bilinear route + cross-attention route."""
        if h_a.shape[0] != h_v.shape[0]:
            raise DimensionError(
                f"token counts differ: audio {h_a.shape} vs video {h_v.shape}")
        return add(self.bilinear_affinity(h_a, h_v),
                   self.cross_attention_affinity(h_a, h_v))

    def video_only_tokens(self, h_v: Tensor) -> Tensor:
        """Audio-bypassed route: project video tokens to the fusion width."""
        return fc(h_v, self.proj_w, self.proj_b)

    # ---- token encoder --------------------------------------------------
    def encode_tokens(self, a: Tensor, use_pe: bool | None = None) -> Tensor:
        """Transformer-block stack over the affinity tokens (k, d_o)."""
        if a.ndim != 2 or a.shape != (self.k, self.d_o):
            raise DimensionError(
                f"fusion tokens must be ({self.k}, {self.d_o}), got {a.shape}")
        use_pe = self.use_pe if use_pe is None else use_pe
        x = add(a, Tensor(self._pe)) if use_pe else a
        for blk in self.blocks:
            y = layer_norm(x, blk["ln1_g"], blk["ln1_b"])
            y = multi_head_attention(y, y, y, blk["attn"], self.heads)
            x = add(x, y)
            y = layer_norm(x, blk["ln2_g"], blk["ln2_b"])
            y = fc(gelu(fc(y, blk["mlp_w1"], blk["mlp_b1"])),
                   blk["mlp_w2"], blk["mlp_b2"])
            x = add(x, y)
        return x

    def encode(self, a: Tensor, use_pe: bool | None = None) -> Tensor:
        """Affinity tokens -> fused feature volume (C_f, T_f, H_f, W_f)."""
        x = self.encode_tokens(a, use_pe)
        h0, w0 = self.tile
        x = transpose(x, (1, 0))                        # (d_o, k)
        x = reshape(x, (self.d_o, self.k, 1, 1))
        x = broadcast_to(x, (self.d_o, self.k, h0, w0))
        x = relu(conv_nd(x, self.conv_w, self.conv_b, stride=1,
                         padding=same_padding((3, 3, 3))))
        return adaptive_avg_pool(x, self.pool_target)

    def forward(self, h_a: Tensor | None, h_v: Tensor) -> Tensor:
        if self.no_inter:
            return self.encode(self.video_only_tokens(h_v))
        return self.encode(self.affinity(h_a, h_v))

    __call__ = forward
