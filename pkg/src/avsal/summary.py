"""Parameter and compute summaries for the ``params`` report.

Multiply-accumulate (MAC) counts are analytic, derived from the same
shape arithmetic the layers use; FLOPs are reported as 2 x MACs.  The
formulas per layer type:

* conv:           out_positions x c_out x (c_in / groups) x prod(kernel)
* depthwise conv: positions x channels x prod(kernel)
* linear map:     tokens x d_in x d_out
* attention:      token projections (as linear maps) + 2 x groups x
                  m^2 x d_inner for scores and the weighted sum, with m
                  tokens per group
* bilinear:       k x d_a x d_out x d_v

Pooling, resampling, norms, and activations are not counted: they carry
no trained weights and are a rounding error next to the conv stacks.
"""

from __future__ import annotations

import math

from .config import ModelConfig


def _conv_macs(out_positions: int, c_out: int, c_in: int, kernel,
               groups: int = 1) -> int:
    k = 1
    for v in kernel:
        k *= v
    return out_positions * c_out * (c_in // groups) * k


def _fc_macs(tokens: int, d_in: int, d_out: int) -> int:
    return tokens * d_in * d_out


def _attn_macs(m: int, groups: int, d_q: int, d_kv: int, d_inner: int,
               d_out: int) -> int:
    tokens = m * groups
    proj = (_fc_macs(tokens, d_q, d_inner) + 2 * _fc_macs(tokens, d_kv, d_inner)
            + _fc_macs(tokens, d_inner, d_out))
    scores = 2 * groups * m * m * d_inner
    return proj + scores


def _conv_out_len(n: int, k: int, s: int, p: int) -> int:
    return (n + 2 * p - k) // s + 1


def _ufm_macs(tokens: int, d: int, kernel, branches) -> list:
    rows = []
    if "high" in branches:
        k = 1
        for v in kernel:
            k *= v
        rows.append(("high", _fc_macs(tokens, d, d) + tokens * d * k))
    if "low" in branches:
        rows.append(("low", _attn_macs(tokens, 1, d, d, d, d)))
    if "channel" in branches:
        rows.append(("channel", _fc_macs(1, d, d)))
    return rows


def mac_table(cfg: ModelConfig) -> list:
    """[(layer name, MACs)] for one forward pass, in execution order."""
    cfg.validate()
    rows = []
    branches = () if cfg.no_ufm else tuple(cfg.ufm_branches)

    # video encoder ------------------------------------------------------
    pt, ph, pw = cfg.patch_size
    t, h, w = cfg.k // pt, cfg.frame_height // ph, cfg.frame_width // pw
    plan = cfg.stage_plan()
    rows.append(("video.patch", _conv_macs(t * h * w, plan[0], 3,
                                           cfg.patch_size)))
    wt, wh, ww = cfg.window_size
    for si, (c, depth) in enumerate(zip(plan, cfg.stage_depths), start=1):
        m = wt * wh * ww
        n_win = math.ceil(t / wt) * math.ceil(h / wh) * math.ceil(w / ww)
        tokens = t * h * w
        hidden = int(round(c * cfg.mlp_ratio))
        for bi in range(1, depth + 1):
            p = f"video.stage{si}.block{bi}"
            rows.append((f"{p}.attn", _attn_macs(m, n_win, c, c, c, c)))
            rows.append((f"{p}.mlp", _fc_macs(tokens, c, hidden)
                         + _fc_macs(tokens, hidden, c)))
        if si == 3:
            for name, macs in _ufm_macs(tokens, c, cfg.video_ufm_kernel,
                                        branches):
                rows.append((f"ufm.video.{name}", macs))
        if si < len(plan):
            h2, w2 = (h - 1) // 2 + 1, (w - 1) // 2 + 1
            rows.append((f"video.merge{si}",
                         _conv_macs(t * h2 * w2, plan[si], c, (1, 3, 3))))
            h, w = h2, w2

    # audio encoder ------------------------------------------------------
    if not cfg.no_inter:
        length = cfg.samples_per_clip()
        aplan = cfg.audio_plan()
        c_in = 1
        for i, (c, k, s) in enumerate(zip(aplan, cfg.audio_kernels,
                                          cfg.audio_strides), start=1):
            length = _conv_out_len(length, k, s, (k - 1) // 2)
            rows.append((f"audio.block{i}.conv",
                         _conv_macs(length, c, c_in, (k,))))
            if i == 5:
                for name, macs in _ufm_macs(length, c,
                                            (cfg.audio_ufm_kernel,),
                                            branches):
                    rows.append((f"ufm.audio.{name}", macs))
            c_in = c

    # fusion ---------------------------------------------------------------
    d_o = cfg.d_o
    if cfg.no_inter:
        rows.append(("fusion.video_proj", _fc_macs(cfg.k, cfg.d_v, d_o)))
    else:
        rows.append(("fusion.bilinear", cfg.k * cfg.d_a * d_o * cfg.d_v))
        rows.append(("fusion.mca", _attn_macs(cfg.k, 1, cfg.d_v, cfg.d_a,
                                              d_o, d_o)))
    hidden = int(round(d_o * cfg.mlp_ratio))
    for i in range(1, cfg.fusion_blocks + 1):
        rows.append((f"fusion.block{i}.attn",
                     _attn_macs(cfg.k, 1, d_o, d_o, d_o, d_o)))
        rows.append((f"fusion.block{i}.mlp",
                     _fc_macs(cfg.k, d_o, hidden) + _fc_macs(cfg.k, hidden, d_o)))
    h0, w0 = cfg.fusion_tile
    rows.append(("fusion.conv", _conv_macs(cfg.k * h0 * w0,
                                           cfg.fusion_channels, d_o, (3, 3, 3))))

    # decoder ----------------------------------------------------------------
    tf, hf, wf = cfg.fusion_pool
    plan_v = cfg.stage_plan()
    taps = {"shallow": plan_v[0], "deep": plan_v[-1]}
    c_in = cfg.fusion_channels
    dplan = cfg.decoder_plan()
    for i, (c_out, (fh, fw)) in enumerate(zip(dplan, cfg.decoder_upsample),
                                          start=1):
        rows.append((f"decoder.layer{i}.conv",
                     _conv_macs(tf * hf * wf, c_out, c_in, cfg.decoder_kernel)))
        hf, wf = hf * fh, wf * fw
        c_in = c_out
        if i == cfg.skip_deep_layer:
            c_in += taps["deep"]
        if i == cfg.skip_shallow_layer:
            c_in += taps["shallow"]
    return rows


def format_param_table(arrays) -> str:
    """Aligned name/shape/count table over {name: ndarray}."""
    rows = [(name, "x".join(str(d) for d in a.shape) if a.shape else "scalar",
             a.size) for name, a in arrays.items()]
    name_w = max(len(r[0]) for r in rows)
    shape_w = max(len(r[1]) for r in rows)
    lines = [f"{'parameter'.ljust(name_w)}  {'shape'.ljust(shape_w)}  {'count':>12}"]
    lines.append("-" * len(lines[0]))
    total = 0
    for name, shape, count in rows:
        lines.append(f"{name.ljust(name_w)}  {shape.ljust(shape_w)}  {count:>12,}")
        total += count
    lines.append("-" * len(lines[0]))
    lines.append(f"total parameters: {total:,}  ({total / 1e6:.3f} M)")
    return "\n".join(lines) + "\n"


def format_mac_table(cfg: ModelConfig) -> str:
    rows = mac_table(cfg)
    name_w = max(len(r[0]) for r in rows)
    lines = [f"{'layer'.ljust(name_w)}  {'MACs':>16}"]
    lines.append("-" * len(lines[0]))
    total = 0
    for name, macs in rows:
        lines.append(f"{name.ljust(name_w)}  {macs:>16,}")
        total += macs
    lines.append("-" * len(lines[0]))
    lines.append(f"{'total'.ljust(name_w)}  {total:>16,}")
    lines.append(f"estimated compute per forward pass: {total:,} MACs "
                 f"= {2 * total / 1e9:.4f} GFLOPs")
    return "\n".join(lines) + "\n"
