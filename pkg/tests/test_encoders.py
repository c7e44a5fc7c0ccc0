"""Audio and video encoders: shapes, windowing, determinism, gradients."""

import numpy as np
import pytest

from avsal.config import fixture_config
from avsal.encoders import AudioEncoder, VideoEncoder, hanning_window
from avsal.errors import ConfigError, DimensionError, InputError
from avsal.params import ParamSet
from avsal.tensor import Tape, Tensor, tsum


def _audio(cfg=None, seed=0):
    cfg = cfg or fixture_config()
    ps = ParamSet(seed)
    return AudioEncoder(cfg, ps, cfg.audio_plan()), ps, cfg


def _video(cfg=None, seed=0):
    cfg = cfg or fixture_config()
    ps = ParamSet(seed)
    return VideoEncoder(cfg, ps, cfg.stage_plan()), ps, cfg


def test_hanning_window_values():
    w = hanning_window(np.ones(5))
    assert np.allclose(w, [0.0, 0.5, 1.0, 0.5, 0.0])
    assert w[0] == 0.0 and w[-1] == 0.0
    loud = hanning_window(np.full(101, 0.8))
    assert loud.max() <= 0.8 + 1e-12
    with pytest.raises(InputError):
        hanning_window(np.ones((4, 2)))
    with pytest.raises(InputError):
        hanning_window(np.ones(1))


def test_audio_encoder_output_shape():
    enc, _, cfg = _audio()
    wave = np.random.default_rng(0).uniform(-1, 1, cfg.samples_per_clip())
    h_a = enc(Tensor(hanning_window(wave)))
    assert h_a.shape == (cfg.k, cfg.d_a)
    assert np.all(np.isfinite(h_a.data))


def test_audio_encoder_rejects_short_waveforms():
    enc, _, _ = _audio()
    # seven stride-2 blocks need 128 * (k - 1) + 1 samples to keep k slots
    assert enc.min_samples == 128 * 15 + 1
    with pytest.raises(InputError):
        enc(Tensor(np.zeros(enc.min_samples - 1)))
    out = enc(Tensor(np.zeros(enc.min_samples)))
    assert out.shape == (16, 32)


def test_audio_encoder_silence_maps_to_zero():
    # freshly initialized biases are zero, so silence stays zero through
    # every conv/relu block and the frequency filter
    enc, _, cfg = _audio()
    h_a = enc(Tensor(np.zeros(cfg.samples_per_clip())))
    assert np.all(h_a.data == 0.0)


def test_audio_encoder_needs_seven_blocks():
    cfg = fixture_config()
    with pytest.raises(ConfigError):
        AudioEncoder(cfg, ParamSet(0), cfg.audio_plan()[:6])


def test_audio_encoder_rank_check():
    enc, _, _ = _audio()
    with pytest.raises(DimensionError):
        enc(Tensor(np.zeros((2, 4267))))


def test_video_encoder_tap_shapes():
    enc, _, cfg = _video()
    clip = np.random.default_rng(1).uniform(size=(3, cfg.k, 32, 56))
    taps = enc(Tensor(clip.astype(np.float32)))
    # patch (2, 8, 8) maps (16, 32, 56) onto an (8, 4, 7) token lattice;
    # each merge halves H and W with a ceiling
    assert taps.shallow.shape == (cfg.stage_plan()[0], 8, 4, 7)
    assert taps.deep.shape == (cfg.d_v, 8, 1, 1)
    assert taps.h_v.shape == (cfg.k, cfg.d_v)


def test_video_encoder_patch_divisibility():
    enc, _, _ = _video()
    with pytest.raises(ConfigError):
        enc(Tensor(np.zeros((3, 15, 32, 56))))
    with pytest.raises(ConfigError):
        enc(Tensor(np.zeros((3, 16, 32, 57))))
    with pytest.raises(DimensionError):
        enc(Tensor(np.zeros((4, 16, 32, 56))))


def test_encoders_are_deterministic_per_seed():
    cfg = fixture_config()
    rng = np.random.default_rng(2)
    clip = rng.uniform(size=(3, cfg.k, 32, 56)).astype(np.float32)
    wave = rng.uniform(-1, 1, cfg.samples_per_clip()).astype(np.float32)

    v1, _, _ = _video(cfg, seed=5)
    v2, _, _ = _video(cfg, seed=5)
    assert np.array_equal(v1(Tensor(clip)).h_v.data, v2(Tensor(clip)).h_v.data)

    a1, _, _ = _audio(cfg, seed=5)
    a2, _, _ = _audio(cfg, seed=5)
    assert np.array_equal(a1(Tensor(wave)).data, a2(Tensor(wave)).data)

    v3, _, _ = _video(cfg, seed=6)
    assert not np.array_equal(v1(Tensor(clip)).h_v.data,
                              v3(Tensor(clip)).h_v.data)


def test_no_ufm_flag_drops_filter_parameters():
    _, with_ps, _ = _video(fixture_config())
    _, without_ps, _ = _video(fixture_config(no_ufm=True))
    assert any(n.startswith("ufm.video") for n in with_ps.names())
    assert not any(n.startswith("ufm.") for n in without_ps.names())
    _, aps, _ = _audio(fixture_config())
    assert any(n.startswith("ufm.audio") for n in aps.names())


def test_gradient_reaches_patch_embedding():
    enc, ps, cfg = _video()
    clip = np.random.default_rng(3).uniform(size=(3, cfg.k, 32, 56))
    with Tape() as tape:
        taps = enc(Tensor(clip.astype(np.float32)))
        loss = tsum(taps.h_v)
        tape.backward(loss)
    g = ps["video.patch.weight"].grad
    assert g is not None and np.any(g != 0.0)
    assert ps["video.stage1.block1.attn.wq"].grad is not None
