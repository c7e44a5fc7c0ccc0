"""Full audio-visual saliency model: encoders -> fusion -> decoder.

Construction order (video, audio, fusion, decoder) fixes the parameter
registration order and therefore the init stream, so a (config, seed)
pair reproduces identical initial weights.  Ablations:

* ``no_inter`` drops the audio encoder and both affinity routes; the
  fusion encoder consumes projected video tokens instead.
* ``no_ufm`` drops both frequency blocks (bit-exact identity paths), so
  the checkpoint carries no ``ufm.*`` parameters.
* ``ufm_branches`` enables a subset of the frequency branches.
"""

from __future__ import annotations

import numpy as np

from .config import ModelConfig
from .decoder import Decoder, kld_loss
from .encoders import AudioEncoder, VideoEncoder, hanning_window
from .errors import DimensionError
from .fusion import FusionModule
from .params import ParamSet, load_checkpoint, save_checkpoint
from .tensor import Tensor


class SaliencyModel:
    def __init__(self, cfg: ModelConfig):
        cfg.validate()
        self.cfg = cfg
        self.pset = ParamSet(cfg.seed)
        stage_plan = cfg.stage_plan()
        self.video = VideoEncoder(cfg, self.pset, stage_plan)
        self.audio = None
        if not cfg.no_inter:
            self.audio = AudioEncoder(cfg, self.pset, cfg.audio_plan())
        self.fusion = FusionModule(cfg, self.pset, d_a=cfg.d_a, d_v=cfg.d_v)
        taps = {"shallow": stage_plan[0], "deep": stage_plan[-1]}
        self.decoder = Decoder(cfg, self.pset, taps)

    # ---- forward ---------------------------------------------------------
    def forward(self, frames: np.ndarray, wave: np.ndarray | None) -> Tensor:
        """frames (k, 3, H, W) in [0,1]; wave (S,) mono in [-1,1] -> map (H, W)."""
        frames = np.asarray(frames)
        if frames.ndim != 4 or frames.shape[1] != 3:
            raise DimensionError(f"frames must be (k, 3, H, W), got {frames.shape}")
        if frames.shape[0] != self.cfg.k:
            raise DimensionError(
                f"clip length {frames.shape[0]} != configured k={self.cfg.k}")
        clip = Tensor(np.transpose(frames, (1, 0, 2, 3)))
        taps = self.video(clip)
        if self.cfg.no_inter:
            feats = self.fusion(None, taps.h_v)
        else:
            if wave is None:
                raise DimensionError("this model needs a waveform; got None")
            h_a = self.audio(Tensor(hanning_window(np.asarray(wave))))
            feats = self.fusion(h_a, taps.h_v)
        return self.decoder(feats, {"shallow": taps.shallow, "deep": taps.deep})

    __call__ = forward

    def loss(self, pred: Tensor, target: np.ndarray) -> Tensor:
        return kld_loss(pred, target, eps=self.cfg.kld_eps)

    # ---- parameters -------------------------------------------------------
    def param_count(self) -> int:
        return self.pset.count()

    def save(self, path) -> None:
        save_checkpoint(path, self.pset.state_arrays())

    def load(self, path) -> None:
        self.pset.load_state(load_checkpoint(path))
