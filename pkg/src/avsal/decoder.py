"""Saliency decoder and the divergence training loss.

The decoder is a stack of 3-D conv layers (ReLU between layers) with
trilinear upsampling after each conv and skip injection: encoder taps
are resampled to the current extents and concatenated onto configured
layers' outputs.  The last layer emits one channel; the temporal axis is
reduced by its mean and a logistic squashes values into [0, 1], so the
output is a (H, W) map at the input frame extents.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError, DimensionError, InputError
from .ops import conv_nd, same_padding, trilinear_upsample
from .tensor import (Tensor, add, as_tensor, concat, div, log, mul, relu,
                     reshape, sigmoid, tmean, tsum)


class Decoder:
    def __init__(self, cfg, pset, tap_channels: dict):
        """tap_channels maps tap name ('shallow'/'deep') -> channel count."""
        self.channels = tuple(cfg.decoder_channels)
        self.upsample = tuple(tuple(u) for u in cfg.decoder_upsample)
        self.kernel = tuple(cfg.decoder_kernel)
        if len(self.upsample) != len(self.channels):
            raise ConfigError("decoder_upsample must list one (fh, fw) per layer")
        if self.channels[-1] != 1:
            raise ConfigError("decoder must end in a single channel")
        n = len(self.channels)
        self.skips = {}
        for name, layer in (("deep", cfg.skip_deep_layer),
                            ("shallow", cfg.skip_shallow_layer)):
            if layer is None:
                continue
            if not 1 <= layer < n:
                raise ConfigError(
                    f"skip injection for {name!r} targets layer {layer}, "
                    f"but injections must land on layers 1..{n - 1} so a "
                    f"following layer can consume them")
            if layer in self.skips:
                raise ConfigError(
                    f"two skip injections target layer {layer}")
            self.skips[layer] = name
        self.weights = []
        c_in = cfg.fusion_channels
        fan_k = self.kernel[0] * self.kernel[1] * self.kernel[2]
        for i, c_out in enumerate(self.channels, start=1):
            w = pset.weight(f"decoder.layer{i}.conv.weight",
                            (c_out, c_in) + self.kernel, fan_in=c_in * fan_k)
            b = pset.zeros(f"decoder.layer{i}.conv.bias", (c_out,))
            self.weights.append((w, b))
            c_in = c_out
            if i in self.skips:
                c_in += tap_channels[self.skips[i]]

    def forward(self, feats: Tensor, taps: dict) -> Tensor:
        """Fused features (C_f, T, H, W) + taps -> saliency map (H, W)."""
        x = feats
        n = len(self.weights)
        for i, ((w, b), (fh, fw)) in enumerate(zip(self.weights, self.upsample),
                                               start=1):
            x = conv_nd(x, w, b, stride=1, padding=same_padding(self.kernel))
            if i < n:
                x = relu(x)
            if fh != 1 or fw != 1:
                _, t, h, wd = x.shape
                x = trilinear_upsample(x, (t, h * fh, wd * fw))
            if i in self.skips:
                tap = taps[self.skips[i]]
                tap = trilinear_upsample(tap, x.shape[1:])
                x = concat([x, tap], axis=0)
        x = reshape(x, x.shape[1:])          # (T, H, W)
        x = tmean(x, axis=0)                 # (H, W)
        return sigmoid(x)

    __call__ = forward


def kld_loss(pred: Tensor, target: np.ndarray, eps: float = 1e-8) -> Tensor:
    """Divergence of the predicted map from a target map.

    Both maps are normalized to sum to one, then
    ``loss = sum(Q * log(eps + Q / (P + eps)))`` with Q the normalized
    target and P the normalized prediction.  Zero-target pixels
    contribute nothing; ``eps`` keeps the log argument positive.
    """
    pred = as_tensor(pred)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise DimensionError(
            f"prediction {pred.shape} vs target {target.shape}")
    tsum_val = target.sum()
    if not np.isfinite(tsum_val) or tsum_val <= 0 or (target < 0).any():
        raise InputError("target map must be nonnegative with positive sum")
    psum = float(pred.data.sum())
    if not np.isfinite(psum) or psum <= 0 or (pred.data < 0).any():
        raise InputError("predicted map must be nonnegative with positive sum")
    q = (target / tsum_val).astype(pred.data.dtype)
    p = div(pred, tsum(pred))
    qt = Tensor(q)
    ratio = div(qt, add(p, eps))
    return tsum(mul(qt, log(add(ratio, eps))))
