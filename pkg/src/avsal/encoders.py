"""Audio and video feature encoders.

AudioEncoder: a windowed mono waveform runs through seven strided conv1d
blocks (conv -> ReLU), with the frequency block applied to the tokens of
the fifth block, then adaptive average pooling to k temporal slots.

VideoEncoder: a clip (3, T, H, W) is embedded by a strided 3-D patch
conv, then passes four stages of windowed token attention with a spatial
merge between stages; the frequency block is applied after the third
stage.  The encoder reports a shallow tap (after stage 1), a deep tap
(after the last stage) and h_v, the per-time-slot pooled token features
resampled to k rows.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionError, InputError
from .ops import (adaptive_avg_pool, conv_nd, fc, linear_resample,
                  multi_head_attention, layer_norm, same_padding)
from .tensor import (Tensor, add, crop, gelu, pad_zeros, relu, reshape,
                     transpose)
from .ufm import FrequencyBlock, make_attn_params


def hanning_window(wave: np.ndarray) -> np.ndarray:
    """Apply a raised-cosine taper over the whole waveform.

    w[n] = 0.5 * (1 - cos(2*pi*n / (N-1))), endpoints exactly zero.
    """
    wave = np.asarray(wave)
    n = wave.shape[0]
    if wave.ndim != 1 or n < 2:
        raise InputError(f"window needs a 1-D waveform of length >= 2, got {wave.shape}")
    return wave * np.hanning(n).astype(wave.dtype)


class AudioEncoder:
    def __init__(self, cfg, pset, channels):
        self.k = cfg.k
        self.kernels = tuple(cfg.audio_kernels)
        self.strides = tuple(cfg.audio_strides)
        self.channels = tuple(channels)
        if not (len(self.channels) == len(self.kernels) == len(self.strides) == 7):
            raise ConfigError("audio encoder needs exactly 7 blocks")
        self.weights = []
        c_in = 1
        for i, (c, k) in enumerate(zip(self.channels, self.kernels)):
            w = pset.weight(f"audio.block{i + 1}.conv.weight", (c, c_in, k),
                            fan_in=c_in * k)
            b = pset.zeros(f"audio.block{i + 1}.conv.bias", (c,))
            self.weights.append((w, b))
            c_in = c
        self.ufm = None
        if not cfg.no_ufm:
            self.ufm = FrequencyBlock(pset, "ufm.audio", d=self.channels[4],
                                      heads=cfg.heads,
                                      kernel=(cfg.audio_ufm_kernel,),
                                      branches=cfg.ufm_branches)
        factor = 1
        for s in self.strides:
            factor *= s
        self.min_samples = factor * (self.k - 1) + 1

    def forward(self, wave: Tensor) -> Tensor:
        """Windowed waveform (S,) -> h_a (k, d_a)."""
        if wave.ndim != 1:
            raise DimensionError(f"audio encoder wants (S,), got {wave.shape}")
        if wave.shape[0] < self.min_samples:
            raise InputError(
                f"waveform too short for the downsampling stack: got "
                f"{wave.shape[0]} samples, need at least {self.min_samples}")
        x = reshape(wave, (1, wave.shape[0]))
        for i, ((w, b), k, s) in enumerate(zip(self.weights, self.kernels,
                                               self.strides)):
            x = relu(conv_nd(x, w, b, stride=s, padding=same_padding((k,))))
            if i == 4 and self.ufm is not None:
                length = x.shape[1]
                tokens = transpose(x, (1, 0))
                tokens = self.ufm(tokens, layout=(length,))
                x = transpose(tokens, (1, 0))
        x = adaptive_avg_pool(x, (self.k,))      # (d_a, k)
        return transpose(x, (1, 0))

    __call__ = forward


def _window_partition(lattice: Tensor, window) -> tuple[Tensor, tuple, tuple]:
    """(T, H, W, C) -> (n_windows, prod(window), C), zero-padding ragged edges."""
    t, h, w, c = lattice.shape
    wt, wh, ww = window
    pt, ph, pw = (-t) % wt, (-h) % wh, (-w) % ww
    if pt or ph or pw:
        lattice = pad_zeros(lattice, ((0, pt), (0, ph), (0, pw), (0, 0)))
    tp, hp, wp = t + pt, h + ph, w + pw
    x = reshape(lattice, (tp // wt, wt, hp // wh, wh, wp // ww, ww, c))
    x = transpose(x, (0, 2, 4, 1, 3, 5, 6))
    x = reshape(x, (-1, wt * wh * ww, c))
    return x, (tp, hp, wp), (t, h, w)


def _window_reverse(x: Tensor, window, padded, orig, c: int) -> Tensor:
    wt, wh, ww = window
    tp, hp, wp = padded
    x = reshape(x, (tp // wt, hp // wh, wp // ww, wt, wh, ww, c))
    x = transpose(x, (0, 3, 1, 4, 2, 5, 6))
    x = reshape(x, (tp, hp, wp, c))
    if padded != orig:
        t, h, w = orig
        x = crop(x, (0, 0, 0, 0), (t, h, w, c))
    return x


@dataclass
class StageBlock:
    ln1_g: Tensor
    ln1_b: Tensor
    attn: object
    ln2_g: Tensor
    ln2_b: Tensor
    mlp_w1: Tensor
    mlp_b1: Tensor
    mlp_w2: Tensor
    mlp_b2: Tensor


@dataclass
class EncoderTaps:
    shallow: Tensor   # (C1, T1, H1, W1)
    deep: Tensor      # (C4, T4, H4, W4)
    h_v: Tensor       # (k, d_v)


class VideoEncoder:
    def __init__(self, cfg, pset, channels):
        self.k = cfg.k
        self.patch = tuple(cfg.patch_size)
        self.window = tuple(cfg.window_size)
        self.heads = cfg.heads
        self.channels = tuple(channels)
        self.depths = tuple(cfg.stage_depths)
        if len(self.channels) != len(self.depths):
            raise ConfigError("stage_channels and stage_depths must align")
        c1 = self.channels[0]
        fan = 3 * self.patch[0] * self.patch[1] * self.patch[2]
        self.patch_w = pset.weight("video.patch.weight", (c1, 3) + self.patch,
                                   fan_in=fan)
        self.patch_b = pset.zeros("video.patch.bias", (c1,))
        ratio = cfg.mlp_ratio
        self.stages: list[list[StageBlock]] = []
        for si, (c, depth) in enumerate(zip(self.channels, self.depths)):
            if c % cfg.heads != 0:
                raise ConfigError(f"stage {si + 1} width {c} not divisible by "
                                  f"heads={cfg.heads}")
            blocks = []
            for bi in range(depth):
                p = f"video.stage{si + 1}.block{bi + 1}"
                hidden = int(round(c * ratio))
                blocks.append(StageBlock(
                    ln1_g=pset.ones(f"{p}.norm1.gain", (c,)),
                    ln1_b=pset.zeros(f"{p}.norm1.bias", (c,)),
                    attn=make_attn_params(pset, f"{p}.attn", c, c, c, c),
                    ln2_g=pset.ones(f"{p}.norm2.gain", (c,)),
                    ln2_b=pset.zeros(f"{p}.norm2.bias", (c,)),
                    mlp_w1=pset.weight(f"{p}.mlp.fc1.weight", (c, hidden), fan_in=c),
                    mlp_b1=pset.zeros(f"{p}.mlp.fc1.bias", (hidden,)),
                    mlp_w2=pset.weight(f"{p}.mlp.fc2.weight", (hidden, c),
                                       fan_in=hidden),
                    mlp_b2=pset.zeros(f"{p}.mlp.fc2.bias", (c,)),
                ))
            self.stages.append(blocks)
        self.merges = []
        for si in range(len(self.channels) - 1):
            c_in, c_out = self.channels[si], self.channels[si + 1]
            w = pset.weight(f"video.merge{si + 1}.weight", (c_out, c_in, 1, 3, 3),
                            fan_in=c_in * 9)
            b = pset.zeros(f"video.merge{si + 1}.bias", (c_out,))
            self.merges.append((w, b))
        self.ufm = None
        self.ufm_stage = 3
        if not cfg.no_ufm:
            self.ufm = FrequencyBlock(pset, "ufm.video",
                                      d=self.channels[self.ufm_stage - 1],
                                      heads=cfg.heads,
                                      kernel=cfg.video_ufm_kernel,
                                      branches=cfg.ufm_branches)

    def _block(self, lattice: Tensor, blk: StageBlock) -> Tensor:
        c = lattice.shape[-1]
        y = layer_norm(lattice, blk.ln1_g, blk.ln1_b)
        win, padded, orig = _window_partition(y, self.window)
        att = multi_head_attention(win, win, win, blk.attn, self.heads)
        att = _window_reverse(att, self.window, padded, orig, c)
        x = add(lattice, att)
        y = layer_norm(x, blk.ln2_g, blk.ln2_b)
        y = fc(gelu(fc(y, blk.mlp_w1, blk.mlp_b1)), blk.mlp_w2, blk.mlp_b2)
        return add(x, y)

    def forward(self, clip: Tensor) -> EncoderTaps:
        """Clip (3, T, H, W) -> taps and pooled features."""
        if clip.ndim != 4 or clip.shape[0] != 3:
            raise DimensionError(f"video encoder wants (3, T, H, W), got {clip.shape}")
        _, t, h, w = clip.shape
        pt, ph, pw = self.patch
        if t % pt or h % ph or w % pw:
            raise ConfigError(
                f"clip extents (T={t}, H={h}, W={w}) must be divisible by the "
                f"patch size {self.patch}")
        x = conv_nd(clip, self.patch_w, self.patch_b, stride=self.patch, padding=0)
        lattice = transpose(x, (1, 2, 3, 0))      # (T', H', W', C)
        shallow = deep = None
        for si, blocks in enumerate(self.stages):
            for blk in blocks:
                lattice = self._block(lattice, blk)
            if si + 1 == self.ufm_stage and self.ufm is not None:
                lt, lh, lw, lc = lattice.shape
                tokens = reshape(lattice, (lt * lh * lw, lc))
                tokens = self.ufm(tokens, layout=(lt, lh, lw))
                lattice = reshape(tokens, (lt, lh, lw, lc))
            if si == 0:
                shallow = transpose(lattice, (3, 0, 1, 2))
            if si < len(self.merges):
                fm = transpose(lattice, (3, 0, 1, 2))
                w_m, b_m = self.merges[si]
                fm = relu(conv_nd(fm, w_m, b_m, stride=(1, 2, 2), padding=(0, 1, 1)))
                lattice = transpose(fm, (1, 2, 3, 0))
        deep = transpose(lattice, (3, 0, 1, 2))   # (C, T', H', W')
        pooled = adaptive_avg_pool(deep, (deep.shape[1], 1, 1))
        pooled = reshape(pooled, (deep.shape[0], deep.shape[1]))
        h_v = transpose(pooled, (1, 0))           # (T', d_v)
        if h_v.shape[0] != self.k:
            h_v = linear_resample(h_v, 0, self.k)
        return EncoderTaps(shallow=shallow, deep=deep, h_v=h_v)

    __call__ = forward
