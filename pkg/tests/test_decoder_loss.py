"""Saliency decoder output contract and the divergence loss."""

import math

import numpy as np
import pytest

from avsal.config import fixture_config
from avsal.decoder import Decoder, kld_loss
from avsal.errors import ConfigError, DimensionError, InputError
from avsal.model import SaliencyModel
from avsal.optim import Adam
from avsal.params import ParamSet
from avsal.tensor import Tape, Tensor, precision, sigmoid


def _decoder(cfg=None, seed=0):
    cfg = cfg or fixture_config()
    ps = ParamSet(seed)
    taps = {"shallow": cfg.stage_plan()[0], "deep": cfg.d_v}
    return Decoder(cfg, ps, taps), ps, cfg


def _tap_tensors(cfg, rng):
    return {
        "shallow": Tensor(rng.normal(size=(cfg.stage_plan()[0], 8, 4, 7))
                          .astype(np.float32)),
        "deep": Tensor(rng.normal(size=(cfg.d_v, 8, 1, 1)).astype(np.float32)),
    }


def test_decoder_emits_frame_sized_map():
    dec, _, cfg = _decoder()
    rng = np.random.default_rng(0)
    feats = Tensor(rng.normal(size=(cfg.fusion_channels,)
                              + tuple(cfg.fusion_pool)).astype(np.float32))
    out = dec(feats, _tap_tensors(cfg, rng))
    assert out.shape == (cfg.frame_height, cfg.frame_width)
    assert np.all(out.data > 0.0) and np.all(out.data < 1.0)


def test_zero_weights_give_uniform_half_map():
    dec, ps, cfg = _decoder()
    for t in ps.tensors():
        t.data[:] = 0.0
    rng = np.random.default_rng(1)
    feats = Tensor(rng.normal(size=(cfg.fusion_channels,)
                              + tuple(cfg.fusion_pool)).astype(np.float32))
    out = dec(feats, _tap_tensors(cfg, rng))
    assert np.all(out.data == 0.5)


def test_decoder_config_errors():
    cfg = fixture_config()
    ps = ParamSet(0)
    taps = {"shallow": 16, "deep": 32}
    bad = fixture_config()
    bad.skip_deep_layer = 6            # out of 1..n-1
    with pytest.raises(ConfigError):
        Decoder(bad, ps, taps)
    bad = fixture_config()
    bad.skip_deep_layer = bad.skip_shallow_layer = 3
    with pytest.raises(ConfigError):
        Decoder(bad, ParamSet(0), taps)
    bad = fixture_config()
    bad.decoder_channels = (8, 4)      # must end in one channel
    bad.decoder_upsample = ((1, 1), (1, 1))
    with pytest.raises(ConfigError):
        Decoder(bad, ParamSet(0), taps)
    bad = fixture_config()
    bad.decoder_upsample = ((1, 1),)   # one factor pair per layer
    with pytest.raises(ConfigError):
        Decoder(bad, ParamSet(0), taps)
    assert cfg is not bad


def test_model_forward_end_to_end_shapes():
    cfg = fixture_config()
    model = SaliencyModel(cfg)
    rng = np.random.default_rng(2)
    frames = rng.uniform(size=(cfg.k, 3, 32, 56)).astype(np.float32)
    wave = rng.uniform(-1, 1, cfg.samples_per_clip()).astype(np.float32)
    out = model(frames, wave)
    assert out.shape == (32, 56)
    assert np.all(np.isfinite(out.data))
    assert np.all((out.data > 0.0) & (out.data < 1.0))
    with pytest.raises(DimensionError):
        model(frames, None)            # this model wants audio
    with pytest.raises(DimensionError):
        model(frames[:8], wave)        # clip length must equal k


def test_video_only_model_ignores_audio():
    cfg = fixture_config(no_inter=True)
    model = SaliencyModel(cfg)
    rng = np.random.default_rng(3)
    frames = rng.uniform(size=(cfg.k, 3, 32, 56)).astype(np.float32)
    out = model(frames, None)
    assert out.shape == (32, 56)


# ---------------------------------------------------------------------------
# divergence loss
# ---------------------------------------------------------------------------

def test_kld_log_two_hand_value():
    with precision("float64"):
        loss = kld_loss(Tensor([1.0, 1.0]), np.array([2.0, 0.0]))
        assert abs(loss.data - math.log(2.0)) < 1e-6


def test_kld_matching_maps_is_almost_zero():
    with precision("float64"):
        rng = np.random.default_rng(4)
        m = rng.uniform(0.1, 1.0, size=(6, 9))
        loss = kld_loss(Tensor(3.0 * m), m)   # scale cancels on normalization
        assert abs(loss.data) < 1e-6


def test_kld_is_nonnegative_and_separates():
    with precision("float64"):
        for seed in range(10):
            rng = np.random.default_rng(seed)
            p = rng.uniform(0.01, 1.0, size=(5, 7))
            q = rng.uniform(0.01, 1.0, size=(5, 7))
            loss = float(kld_loss(Tensor(p), q).data)
            assert loss > -1e-9
        peaked = np.zeros((5, 7))
        peaked[2, 3] = 1.0
        flat = np.full((5, 7), 1.0 / 35.0)
        assert float(kld_loss(Tensor(flat), peaked).data) > 1.0


def test_kld_input_validation():
    good = np.full((2, 2), 0.25)
    with pytest.raises(DimensionError):
        kld_loss(Tensor(np.ones((2, 3))), good)
    with pytest.raises(InputError):
        kld_loss(Tensor(np.ones((2, 2))), np.zeros((2, 2)))
    with pytest.raises(InputError):
        kld_loss(Tensor(np.ones((2, 2))), np.array([[1.0, -0.1], [0.5, 0.5]]))
    with pytest.raises(InputError):
        kld_loss(Tensor(np.ones((2, 2))), np.array([[np.nan, 1.0], [1.0, 1.0]]))
    with pytest.raises(InputError):
        kld_loss(Tensor(-np.ones((2, 2))), good)


def test_one_optimizer_step_reduces_divergence():
    for seed in range(5):
        rng = np.random.default_rng(seed)
        target = rng.uniform(0.05, 1.0, size=(8, 10))
        w = Tensor(rng.normal(scale=0.5, size=(8, 10)), requires_grad=True)
        opt = Adam([w], lr=0.05)
        with Tape() as tape:
            before = kld_loss(sigmoid(w), target)
            tape.backward(before)
        opt.step()
        w.grad = None
        after = kld_loss(sigmoid(w), target)
        assert float(after.data) < float(before.data), f"seed {seed}"
