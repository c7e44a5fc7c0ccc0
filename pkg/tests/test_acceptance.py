"""Acceptance gate: seven checks, one printed verdict line each.

Every test prints ``criterion N/7 [name]: PASS|FAIL (detail)`` directly on
the real stdout (bypassing pytest's capture) so a plain ``pytest`` run
always shows the seven verdicts, green or red.

The seven checks:

1. gradient suite        — every differentiable op and every composed
                           module matches central finite differences at
                           f64, rel err < 1e-4, >= 20 seeded shapes each,
                           under 60 s.
2. metric oracles        — auc_judd and s_auc agree with brute-force
                           oracles to <= 1e-12 on 1,000 seeded 3x3/4x4
                           cases; CC/SIM/NSS hit closed forms to 1e-10.
3. overfit               — one 16-frame 32x56 clip, 500 Adam steps at
                           lr 1e-4: KLD < 0.05 and NSS > 1.0, < 10 min.
4. ablation ordering     — full model beats both the no-frequency-block
                           and the video-only variants on final KLD over
                           the 5-clip fixture, >= 4 of 5 seeds.
5. branch ablation       — each single frequency branch beats the
                           no-branch baseline on fixture KLD.
6. pipeline round-trip   — gaze -> fixation tables -> rendered maps ->
                           evaluation scores AUC-J > 0.95 and CC == 1.0
                           with ground truth as predictions; a 200-video
                           tree splits 82/18 per domain exactly.
7. determinism           — two same-seed train + eval command runs give
                           byte-identical machine-readable reports.
"""

import json
import math
import subprocess
import sys
import time

import numpy as np
import pytest

from avsal.config import fixture_config
from avsal.data import (FixtureSpec, VideoData, build_manifest, load_clip,
                        load_manifest, synth_fixture)
from avsal.decoder import Decoder, kld_loss
from avsal.evaluate import evaluate_split, map_dir_loader
from avsal.fileio import write_f32_map, write_frame, write_wav
from avsal.fixations import (RenderConfig, ingest_gaze, render_saliency,
                             save_fixation_csv)
from avsal.metrics import aggregate, auc_judd, cc, nss, s_auc, sim
from avsal.model import SaliencyModel
from avsal.ops import (adaptive_avg_pool, bilinear_form, conv_nd,
                       depthwise_conv, fc, layer_norm, linear_resample,
                       multi_head_attention, pool, same_padding,
                       trilinear_upsample)
from avsal.params import ParamSet
from avsal.tensor import Tensor, add, matmul, mul, relu, sigmoid, tsum
from avsal.train import train
from avsal.ufm import AttnParams, FrequencyBlock, make_attn_params
from avsal.fusion import FusionModule

from _util import check_grads, check_op, tiny_config
from oracles import auc_judd_oracle, s_auc_oracle

SEEDED_SHAPES = 20          # random cases per op / per module (criterion 1)
ORACLE_CASES = 1000         # random maps for the metric oracles (criterion 2)

# training regime shared by the two ablation criteria: every variant sees
# the same data, the same batch schedule seed, and the same step budget
ABL_STEPS = 300
ABL_BATCH = 1
ABL_LR = 1e-4
ABL_MODE = "all"
ABL_SEEDS = (0, 1, 2, 3, 4)
BRANCH_SEEDS = (0, 1, 2)


def _verdict(num: int, name: str, passed: bool, detail: str = ""):
    line = f"criterion {num}/7 [{name}]: {'PASS' if passed else 'FAIL'}"
    if detail:
        line += f" ({detail})"
    print(line, file=sys.__stdout__, flush=True)
    assert passed, line


# ---------------------------------------------------------------------------
# criterion 1: gradient suite
# ---------------------------------------------------------------------------

def _conv1d_case(rng):
    cin, cout = int(rng.integers(1, 4)), int(rng.integers(1, 4))
    kk, n = int(rng.choice([1, 3])), int(rng.integers(4, 8))
    x = rng.normal(size=(cin, n))
    w = rng.normal(size=(cout, cin, kk))
    b = rng.normal(size=(cout,))
    stride = int(rng.integers(1, 3))
    return (lambda X, W, B: conv_nd(X, W, B, stride=stride,
                                    padding=same_padding((kk,))),
            [x, w, b])


def _conv2d_case(rng):
    cin, cout = int(rng.integers(1, 3)), int(rng.integers(1, 3))
    x = rng.normal(size=(cin, int(rng.integers(4, 7)), int(rng.integers(4, 7))))
    w = rng.normal(size=(cout, cin, 3, 3))
    b = rng.normal(size=(cout,))
    stride = (int(rng.integers(1, 3)), int(rng.integers(1, 3)))
    return (lambda X, W, B: conv_nd(X, W, B, stride=stride,
                                    padding=same_padding((3, 3))),
            [x, w, b])


def _conv3d_case(rng):
    cin, cout = int(rng.integers(1, 3)), int(rng.integers(1, 3))
    x = rng.normal(size=(cin, 3, int(rng.integers(3, 5)), int(rng.integers(3, 5))))
    w = rng.normal(size=(cout, cin, 3, 1, 3))
    b = rng.normal(size=(cout,))
    return (lambda X, W, B: conv_nd(X, W, B, padding=same_padding((3, 1, 3))),
            [x, w, b])


def _grouped_conv_case(rng):
    groups = int(rng.choice([2, 3]))
    cin, cout = groups * int(rng.integers(1, 3)), groups
    x = rng.normal(size=(cin, 5, 5))
    w = rng.normal(size=(cout, cin // groups, 3, 3))
    return (lambda X, W: conv_nd(X, W, None, padding=same_padding((3, 3)),
                                 groups=groups),
            [x, w])


def _depthwise_case(rng):
    c = int(rng.integers(2, 5))
    rank = int(rng.integers(1, 3))
    spatial = tuple(int(rng.integers(4, 7)) for _ in range(rank))
    x = rng.normal(size=(c,) + spatial)
    w = rng.normal(size=(c,) + (3,) * rank)
    return (lambda X, W: depthwise_conv(X, W), [x, w])


def _fc_case(rng):
    n, din, dout = (int(rng.integers(1, 5)), int(rng.integers(2, 5)),
                    int(rng.integers(1, 5)))
    return (lambda X, W, B: fc(X, W, B),
            [rng.normal(size=(n, din)), rng.normal(size=(din, dout)),
             rng.normal(size=(dout,))])


def _adaptive_pool_case(rng):
    rank = int(rng.integers(1, 4))
    c = int(rng.integers(1, 3))
    spatial = tuple(int(rng.integers(3, 7)) for _ in range(rank))
    target = tuple(int(rng.integers(1, s + 1)) for s in spatial)
    x = rng.normal(size=(c,) + spatial)
    return (lambda X: adaptive_avg_pool(X, target), [x])


def _global_max_pool_case(rng):
    c, h, w = int(rng.integers(1, 3)), 4, 5
    x = rng.normal(size=(c, h, w))
    # keep the argmax stable under the finite-difference probe
    x += np.arange(x.size).reshape(x.shape) * 1e-3
    return (lambda X: pool(X, mode="global_max"), [x])


def _resample_case(rng):
    n = int(rng.integers(2, 6))
    new = int(rng.integers(1, 8))
    x = rng.normal(size=(2, n, 3))
    return (lambda X: linear_resample(X, axis=1, new_size=new), [x])


def _trilinear_case(rng):
    c, t, h, w = 2, 2, int(rng.integers(2, 4)), int(rng.integers(2, 4))
    x = rng.normal(size=(c, t, h, w))
    return (lambda X: trilinear_upsample(X, (t, h * 2, w * 2)), [x])


def _attn_arrays(rng, dq, dkv, di, do):
    return [rng.normal(size=(dq, di)), rng.normal(size=(di,)),
            rng.normal(size=(dkv, di)), rng.normal(size=(di,)),
            rng.normal(size=(dkv, di)), rng.normal(size=(di,)),
            rng.normal(size=(di, do)), rng.normal(size=(do,))]


def _self_attention_case(rng):
    heads = int(rng.choice([1, 2]))
    d = 2 * heads
    n = int(rng.integers(2, 5))
    x = rng.normal(size=(n, d))

    def op(X, *ps):
        return multi_head_attention(X, X, X, AttnParams(*ps), heads)

    return op, [x] + _attn_arrays(rng, d, d, d, d)


def _cross_attention_case(rng):
    # distinct query stream (video tokens) and key/value stream (audio)
    heads = int(rng.choice([1, 2]))
    dq, dkv, d = 3, 2, 2 * heads
    n = int(rng.integers(2, 5))
    q = rng.normal(size=(n, dq))
    kv = rng.normal(size=(n, dkv))

    def op(Q, KV, *ps):
        return multi_head_attention(Q, KV, KV, AttnParams(*ps), heads)

    return op, [q, kv] + _attn_arrays(rng, dq, dkv, d, d)


def _layer_norm_case(rng):
    n, d = int(rng.integers(1, 5)), int(rng.integers(2, 6))
    return (lambda X, G, B: layer_norm(X, G, B),
            [rng.normal(size=(n, d)), rng.normal(size=(d,)),
             rng.normal(size=(d,))])


def _bilinear_case(rng):
    k = int(rng.integers(1, 4))
    da, do, dv = (int(rng.integers(1, 4)), int(rng.integers(1, 4)),
                  int(rng.integers(1, 4)))
    return (lambda A, W, V, B: add(bilinear_form(A, W, V), B),
            [rng.normal(size=(k, da)), rng.normal(size=(da, do, dv)),
             rng.normal(size=(k, dv)), rng.normal(size=(do,))])


def _activation_chain_case(rng):
    # relu/sigmoid/matmul/mul/add composition used throughout the model
    n, d = int(rng.integers(2, 5)), int(rng.integers(2, 5))
    x = rng.normal(size=(n, d))
    w = rng.normal(size=(d, d))
    return (lambda X, W: mul(sigmoid(matmul(X, W)), relu(add(X, X))), [x, w])


def _ufm_case(rng):
    def build():
        ps = ParamSet(0)
        blk = FrequencyBlock(ps, "u", d=4, heads=2, kernel=(3,))
        return blk, ps

    blk0, ps0 = build()
    arrays = [rng.normal(size=(6, 4))] + \
        [rng.normal(size=t.data.shape) for t in ps0.tensors()]

    def op(x, *pts):
        blk, _ = build()
        (blk.high_fc_w, blk.high_fc_b, blk.high_conv,
         wq, bq, wk, bk, wv, bv, wo, bo, blk.gate_w, blk.gate_b) = pts
        blk.low_attn = AttnParams(wq, bq, wk, bk, wv, bv, wo, bo)
        return blk(x, (6,))

    return op, arrays


def _fusion_cfg():
    return fixture_config(k=3, d_o=2, heads=1, fusion_blocks=1,
                          mlp_ratio=1.0, fusion_tile=(2, 3),
                          fusion_pool=(2, 2, 3), fusion_channels=1)


def _fusion_encoder_case(rng):
    cfg = _fusion_cfg()

    def build():
        ps = ParamSet(0)
        return FusionModule(cfg, ps, d_a=2, d_v=3), ps

    _, ps0 = build()
    names = [t.name for t in ps0.tensors()]
    arrays = [rng.normal(size=(3, 2)), rng.normal(size=(3, 3))] + \
        [rng.normal(size=t.data.shape) for t in ps0.tensors()]

    def op(h_a, h_v, *pts):
        fus, ps = build()
        for t, arr in zip(ps.tensors(), pts):
            t.data = arr.data
            lookup = dict(zip(names, pts))
        fus.bi_w = lookup["fusion.bilinear.weight"]
        fus.bi_b = lookup["fusion.bilinear.bias"]
        fus.mca = AttnParams(*(lookup[f"fusion.mca.{n}"]
                               for n in ("wq", "bq", "wk", "bk", "wv", "bv",
                                         "wo", "bo")))
        blk = fus.blocks[0]
        blk["ln1_g"] = lookup["fusion.block1.norm1.gain"]
        blk["ln1_b"] = lookup["fusion.block1.norm1.bias"]
        blk["attn"] = AttnParams(*(lookup[f"fusion.block1.attn.{n}"]
                                   for n in ("wq", "bq", "wk", "bk", "wv",
                                             "bv", "wo", "bo")))
        blk["ln2_g"] = lookup["fusion.block1.norm2.gain"]
        blk["ln2_b"] = lookup["fusion.block1.norm2.bias"]
        blk["mlp_w1"] = lookup["fusion.block1.mlp.fc1.weight"]
        blk["mlp_b1"] = lookup["fusion.block1.mlp.fc1.bias"]
        blk["mlp_w2"] = lookup["fusion.block1.mlp.fc2.weight"]
        blk["mlp_b2"] = lookup["fusion.block1.mlp.fc2.bias"]
        fus.conv_w = lookup["fusion.conv.weight"]
        fus.conv_b = lookup["fusion.conv.bias"]
        return fus.encode(fus.affinity(h_a, h_v))

    return op, arrays


def _decoder_case(rng):
    cfg = fixture_config(fusion_channels=2, decoder_channels=(2, 1),
                         decoder_upsample=((1, 1), (2, 2)),
                         decoder_kernel=(1, 3, 3), skip_deep_layer=1,
                         skip_shallow_layer=None)

    def build():
        ps = ParamSet(0)
        return Decoder(cfg, ps, {"deep": 2}), ps

    _, ps0 = build()
    feats = rng.normal(size=(2, 2, 3, 4))
    tap = rng.normal(size=(2, 2, 3, 4))
    arrays = [feats, tap] + [rng.normal(size=t.data.shape)
                             for t in ps0.tensors()]

    def op(F, T, *pts):
        dec, _ = build()
        dec.weights = [(pts[0], pts[1]), (pts[2], pts[3])]
        return dec(F, {"deep": T})

    return op, arrays


def _kld_case(rng):
    h, w = int(rng.integers(2, 5)), int(rng.integers(2, 5))
    pred = rng.uniform(0.05, 1.0, size=(h, w))
    gt = rng.uniform(0.0, 1.0, size=(h, w))
    gt[int(rng.integers(h)), int(rng.integers(w))] = 1.0
    return (lambda P: kld_loss(P, gt), [pred])


GRAD_CASES = [
    ("conv1d", _conv1d_case),
    ("conv2d", _conv2d_case),
    ("conv3d", _conv3d_case),
    ("grouped_conv", _grouped_conv_case),
    ("depthwise_conv", _depthwise_case),
    ("fc", _fc_case),
    ("adaptive_avg_pool", _adaptive_pool_case),
    ("global_max_pool", _global_max_pool_case),
    ("linear_resample", _resample_case),
    ("trilinear_upsample", _trilinear_case),
    ("self_attention", _self_attention_case),
    ("cross_attention", _cross_attention_case),
    ("layer_norm", _layer_norm_case),
    ("bilinear_affinity", _bilinear_case),
    ("activation_chain", _activation_chain_case),
    ("ufm_block", _ufm_case),
    ("fusion_encoder", _fusion_encoder_case),
    ("decoder", _decoder_case),
    ("kld_loss", _kld_case),
]


def test_criterion_1_gradient_suite():
    t0 = time.monotonic()
    worst = 0.0
    worst_name = ""
    for name, builder in GRAD_CASES:
        for seed in range(SEEDED_SHAPES):
            rng = np.random.default_rng(10_000 + 613 * seed + hash(name) % 97)
            op, arrays = builder(rng)
            err = check_op(op, arrays, rng)
            if err > worst:
                worst, worst_name = err, f"{name}/seed{seed}"
    elapsed = time.monotonic() - t0
    _verdict(1, "gradient suite",
             worst < 1e-4 and elapsed < 60.0,
             f"{len(GRAD_CASES)} ops/modules x {SEEDED_SHAPES} shapes, "
             f"max rel err {worst:.2e} at {worst_name}, {elapsed:.1f}s")


# ---------------------------------------------------------------------------
# criterion 2: metric oracle agreement + closed forms
# ---------------------------------------------------------------------------

def _oracle_case(i):
    rng = np.random.default_rng(40_000 + i)
    side = 3 if i % 2 == 0 else 4
    sal = rng.integers(0, 5, size=(side, side)).astype(np.float64)
    cells = [(x, y) for y in range(side) for x in range(side)]
    n_fix = int(rng.integers(1, side * side))
    idx = rng.choice(len(cells), size=n_fix, replace=False)
    fix = np.array([cells[j] for j in idx])
    n_pool = int(rng.integers(2, 8))
    pool_idx = rng.choice(len(cells), size=n_pool, replace=False)
    pool_pts = np.array([cells[j] for j in pool_idx])
    if not (set(map(tuple, pool_pts)) - set(map(tuple, fix))):
        spare = [c for c in cells if c not in set(map(tuple, fix))]
        pool_pts = np.vstack([pool_pts, [spare[0]]])
    return sal, fix, pool_pts


def test_criterion_2_metric_oracles():
    t0 = time.monotonic()
    worst_judd = worst_sauc = 0.0
    for i in range(ORACLE_CASES):
        sal, fix, pool_pts = _oracle_case(i)
        got = auc_judd(sal, fix)
        want = auc_judd_oracle(sal.tolist(), [tuple(p) for p in fix])
        worst_judd = max(worst_judd, abs(got - want))
        got = s_auc(sal, fix, pool_pts, trials=5, seed=i)
        want = s_auc_oracle(sal.tolist(), [tuple(p) for p in fix],
                            [tuple(p) for p in pool_pts], trials=5, seed=i)
        worst_sauc = max(worst_sauc, abs(got - want))

    # closed-form hand values
    p = np.array([1.0, 2.0, 3.0, 4.0]).reshape(2, 2)
    closed = [
        (cc(p, np.array([1.0, 2.0, 2.0, 4.0]).reshape(2, 2)), 9 / math.sqrt(95)),
        (cc(p, np.array([1.0, 2.0, 2.0, 3.0]).reshape(2, 2)), 3 / math.sqrt(10)),
        (sim(np.array([[0.5, 0.5]]), np.array([[0.8, 0.2]])), 0.7),
        (nss(np.array([[1.0, 0.0], [0.0, 0.0]]), [(0, 0)]), math.sqrt(3)),
        (aggregate({"a": (100, {m: 0.8537 for m in
                                ("auc_judd", "sim", "s_auc", "cc", "nss")}),
                    "b": (300, {m: 0.8913 for m in
                                ("auc_judd", "sim", "s_auc", "cc", "nss")})}
                   )["cc"], 0.8819),
    ]
    worst_closed = max(abs(got - want) for got, want in closed)
    elapsed = time.monotonic() - t0
    _verdict(2, "metric oracles",
             worst_judd <= 1e-12 and worst_sauc <= 1e-12
             and worst_closed <= 1e-10,
             f"{ORACLE_CASES} cases: auc_judd diff {worst_judd:.1e}, "
             f"s_auc diff {worst_sauc:.1e}, closed forms {worst_closed:.1e}, "
             f"{elapsed:.1f}s")


# ---------------------------------------------------------------------------
# criterion 3: single-clip overfit
# ---------------------------------------------------------------------------

def test_criterion_3_overfit(tmp_path):
    t0 = time.monotonic()
    root = tmp_path / "clip"
    synth_fixture(FixtureSpec(videos=1, frames=16, height=32, width=56,
                              observers=4, scatter=1.5, sigma=2.0, seed=3),
                  root)
    man = build_manifest(root, seed=3)
    cfg = fixture_config(steps=500, lr=1e-4, seed=3, target_mode="last",
                         batch_size=1)
    run_dir = tmp_path / "run"
    train(cfg, man, run_dir, progress=None)

    model = SaliencyModel(cfg)
    model.load(run_dir / "checkpoint.ckpt")
    vd = VideoData.for_entry(man, man.videos[0])
    t = man.videos[0].frames - 1
    clip = load_clip(vd, t, cfg.k, man.sample_rate, man.fps, None)
    pred = model.forward(clip.frames, clip.wave).data
    fix = vd.fixations()[t]
    gt = render_saliency(fix, (32, 56), RenderConfig(sigma=man.render_sigma))
    kld = float(kld_loss(Tensor(pred), gt).data)
    score = nss(pred, fix)
    elapsed = time.monotonic() - t0
    _verdict(3, "overfit",
             kld < 0.05 and score > 1.0 and elapsed < 600.0,
             f"500 steps lr 1e-4: KLD {kld:.4f} (< 0.05), "
             f"NSS {score:.2f} (> 1.0), {elapsed:.0f}s (< 600s)")


# ---------------------------------------------------------------------------
# criteria 4 + 5: ablation orderings on the shared 5-clip fixture
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def five_clip_manifest(tmp_path_factory):
    root = tmp_path_factory.mktemp("five_clips")
    synth_fixture(FixtureSpec(videos=5, frames=16, height=32, width=56,
                              observers=4, scatter=1.5, sigma=2.0, seed=77),
                  root)
    man = build_manifest(root, seed=77)
    for v in man.videos:
        v.split = "train"          # all five clips are supervision
    return man


def _variant_config(variant, seed):
    over = dict(steps=ABL_STEPS, lr=ABL_LR, seed=seed, batch_size=ABL_BATCH,
                target_mode=ABL_MODE)
    if variant == "no_ufm":
        over["no_ufm"] = True
    elif variant == "no_inter":
        over["no_inter"] = True
    elif variant.startswith("branch:"):
        names = variant.split(":", 1)[1]
        over["ufm_branches"] = tuple(n for n in names.split("+") if n)
    elif variant != "full":
        raise ValueError(variant)
    return fixture_config(**over)


def _train_eval_kld(man, variant, seed, tmp_dir):
    """Train one variant and return its mean KLD over every supervised
    clip of the fixture (a deterministic measure, unlike the last noisy
    batch loss)."""
    cfg = _variant_config(variant, seed)
    run_dir = tmp_dir / f"{variant.replace(':', '_')}_{seed}"
    train(cfg, man, run_dir, progress=None)
    model = SaliencyModel(cfg)
    model.load(run_dir / "checkpoint.ckpt")
    rc = RenderConfig(sigma=man.render_sigma)
    klds = []
    for e in man.videos:
        vd = VideoData.for_entry(man, e)
        targets = [e.frames - 1] if ABL_MODE == "last" else range(e.frames)
        for t in targets:
            clip = load_clip(vd, t, cfg.k, man.sample_rate, man.fps, None)
            pred = model.forward(clip.frames, clip.wave).data
            gt = render_saliency(vd.fixations()[t], (man.height, man.width),
                                 rc)
            klds.append(float(kld_loss(Tensor(pred), gt).data))
    return float(np.mean(klds))


@pytest.fixture(scope="module")
def ablation_klds(five_clip_manifest, tmp_path_factory):
    tmp = tmp_path_factory.mktemp("ablation_runs")
    out = {}
    for seed in ABL_SEEDS:
        for variant in ("full", "no_ufm", "no_inter"):
            out[(variant, seed)] = _train_eval_kld(five_clip_manifest,
                                                   variant, seed, tmp)
    return out


def test_criterion_4_ablation_ordering(ablation_klds):
    wins = 0
    rows = []
    for seed in ABL_SEEDS:
        f = ablation_klds[("full", seed)]
        u = ablation_klds[("no_ufm", seed)]
        i = ablation_klds[("no_inter", seed)]
        ok = f < u and f < i
        wins += ok
        rows.append(f"s{seed}: full {f:.3f} vs no_ufm {u:.3f} "
                    f"vs no_inter {i:.3f}{' *' if not ok else ''}")
    _verdict(4, "ablation ordering", wins >= 4,
             f"full model best on {wins}/5 seeds; " + "; ".join(rows))


def test_criterion_5_branch_ablation(five_clip_manifest, tmp_path_factory):
    tmp = tmp_path_factory.mktemp("branch_runs")
    means = {}
    for variant in ("branch:", "branch:high", "branch:low", "branch:channel"):
        vals = [_train_eval_kld(five_clip_manifest, variant, seed, tmp)
                for seed in BRANCH_SEEDS]
        means[variant] = float(np.mean(vals))
    base = means["branch:"]
    ok = all(means[f"branch:{b}"] < base for b in ("high", "low", "channel"))
    _verdict(5, "branch ablation", ok,
             f"mean KLD over {len(BRANCH_SEEDS)} seeds — none: {base:.3f}, "
             f"high: {means['branch:high']:.3f}, "
             f"low: {means['branch:low']:.3f}, "
             f"channel: {means['branch:channel']:.3f}")


# ---------------------------------------------------------------------------
# criterion 6: pipeline round-trip + split counts
# ---------------------------------------------------------------------------

def test_criterion_6_pipeline_round_trip(tmp_path):
    # gaze logs -> fixation tables -> rendered maps -> evaluation
    root = tmp_path / "data"
    synth_fixture(FixtureSpec(videos=6, frames=4, height=16, width=24,
                              observers=4, scatter=1.5, sigma=2.0, seed=9),
                  root)
    for gaze in sorted(root.glob("*/*/*/gaze.csv")):
        frames, _ = ingest_gaze(gaze, fps=30.0, width=24, height=16)
        save_fixation_csv(gaze.parent / "fixations.csv", frames)
    man = build_manifest(root, seed=9)

    pred_root = tmp_path / "pred"
    rc = RenderConfig(sigma=man.render_sigma)
    for e in man.split("test"):
        vd = VideoData.for_entry(man, e)
        fixmap = vd.fixations()
        for t in range(e.frames):
            if fixmap.get(t) is None or len(fixmap[t]) == 0:
                continue
            gt = render_saliency(fixmap[t], (16, 24), rc)
            out = pred_root / e.id / f"frame_{t:05d}.f32"
            out.parent.mkdir(parents=True, exist_ok=True)
            write_f32_map(out, gt)
    res = evaluate_split(man, map_dir_loader(pred_root), seed=9, trials=16)
    auc_ok = res.overall["auc_judd"] > 0.95
    cc_ok = res.overall["cc"] == 1.0

    # split counts: 100 videos per domain -> 82/18 exactly
    dummy = tmp_path / "dummy"
    frame = np.full((4, 4, 3), 0.5)
    for domain in ("cartoon", "game"):
        for i in range(100):
            vdir = dummy / domain / f"{domain}_c0" / f"v{i:03d}"
            (vdir / "frames").mkdir(parents=True)
            write_frame(vdir / "frames" / "frame_00000.png", frame)
            write_wav(vdir / "audio.wav", np.zeros(16), 8000)
            save_fixation_csv(vdir / "fixations.csv",
                              {0: np.array([[1, 1]])})
    counts = build_manifest(dummy, seed=0).counts()
    split_ok = counts == {"cartoon": {"train": 82, "test": 18},
                          "game": {"train": 82, "test": 18}}
    _verdict(6, "pipeline round-trip",
             auc_ok and cc_ok and split_ok,
             f"AUC-J {res.overall['auc_judd']:.4f} (> 0.95), "
             f"CC {res.overall['cc']} (== 1.0), 200-video split "
             f"{'82/82/18/18' if split_ok else counts}")


# ---------------------------------------------------------------------------
# criterion 7: command-level determinism
# ---------------------------------------------------------------------------

def _cli(*args):
    proc = subprocess.run(["avsal"] + [str(a) for a in args],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr or proc.stdout
    return proc


def test_criterion_7_determinism(tmp_path):
    data = tmp_path / "data"
    _cli("synth", "--videos", 12, "--frames", 4, "--height", 16,
         "--width", 24, "--observers", 3, "--scatter", 0.0, "--seed", 21,
         "--out", data)
    manifest = data / "manifest.json"
    _cli("manifest", data, "--seed", 21, "--out", manifest)
    cfg = tmp_path / "cfg.json"
    tiny_config(seed=21).to_json(cfg)

    reports = []
    for tag in ("a", "b"):
        run = tmp_path / f"run_{tag}"
        _cli("train", "--manifest", manifest, "--config", cfg, "--quiet",
             "--out", run)
        pred = tmp_path / f"pred_{tag}"
        _cli("predict", "--checkpoint", run / "checkpoint.ckpt",
             "--manifest", manifest, "--out", pred)
        rep = tmp_path / f"report_{tag}"
        _cli("eval", "--pred", pred, "--manifest", manifest, "--seed", 21,
             "--out", rep)
        reports.append(rep)

    same_json = (reports[0] / "report.json").read_bytes() == \
        (reports[1] / "report.json").read_bytes()
    same_csv = (reports[0] / "report.csv").read_bytes() == \
        (reports[1] / "report.csv").read_bytes()
    _verdict(7, "determinism", same_json and same_csv,
             "two train+eval runs, report.json and report.csv byte-identical"
             if same_json and same_csv else
             f"report.json identical: {same_json}, "
             f"report.csv identical: {same_csv}")
