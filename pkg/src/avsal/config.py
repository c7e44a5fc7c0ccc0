"""Model/run configuration: defaults, validation, JSON round-trip.

The config file is a flat JSON object whose keys are the field names of
ModelConfig.  Unknown keys and inconsistent geometry are reported as one
itemized error.  ``width_mult`` scales the channel plan; widths that
feed attention are rounded to the nearest multiple of ``heads``.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass

from .errors import ConfigError

SCHEMA_VERSION = 1


@dataclass
class ModelConfig:
    schema_version: int = SCHEMA_VERSION
    seed: int = 0

    # clip geometry
    k: int = 16
    frame_height: int = 224
    frame_width: int = 384
    fps: float = 30.0
    sample_rate: int = 8000

    # widths
    width_mult: float = 1.0
    heads: int = 4

    # audio encoder
    audio_channels: tuple = (8, 16, 16, 32, 32, 32, 32)
    audio_kernels: tuple = (15, 7, 5, 5, 3, 3, 3)
    audio_strides: tuple = (2, 2, 2, 2, 2, 2, 2)
    audio_ufm_kernel: int = 3

    # video encoder
    patch_size: tuple = (2, 8, 8)
    stage_channels: tuple = (16, 24, 32, 32)
    stage_depths: tuple = (1, 1, 1, 1)
    window_size: tuple = (2, 4, 4)
    video_ufm_kernel: tuple = (3, 3, 3)
    mlp_ratio: float = 2.0

    # fusion
    d_o: int = 32
    fusion_blocks: int = 2
    fusion_tile: tuple = (7, 12)
    fusion_channels: int = 32
    fusion_pool: tuple = (4, 7, 12)
    use_pe: bool = True

    # decoder
    decoder_channels: tuple = (32, 32, 16, 16, 8, 1)
    decoder_kernel: tuple = (3, 3, 3)
    decoder_upsample: tuple = ((2, 2), (2, 2), (2, 2), (2, 2), (2, 2), (1, 1))
    skip_deep_layer: int = 2
    skip_shallow_layer: int = 4

    # ablations
    no_ufm: bool = False
    no_inter: bool = False
    ufm_branches: tuple = ("high", "low", "channel")

    # loss / training
    kld_eps: float = 1e-8
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    batch_size: int = 8
    steps: int = 500
    prefetch: int = 2
    target_mode: str = "all"      # "all": every frame is a clip target; "last"

    # informational full-scale parameter budget (millions), printed by the
    # params report when present; never asserted.
    reference_param_m: float | None = None

    # ---- derived widths -------------------------------------------------
    def _scale_attn(self, c: int) -> int:
        """width_mult-scaled channel count, snapped to a heads multiple."""
        return max(self.heads, self.heads * round(c * self.width_mult / self.heads))

    def _scale(self, c: int) -> int:
        return max(1, round(c * self.width_mult))

    def audio_plan(self) -> tuple:
        return tuple(self._scale_attn(c) for c in self.audio_channels)

    def stage_plan(self) -> tuple:
        return tuple(self._scale_attn(c) for c in self.stage_channels)

    def decoder_plan(self) -> tuple:
        body = tuple(self._scale(c) for c in self.decoder_channels[:-1])
        return body + (1,)

    @property
    def d_a(self) -> int:
        return self.audio_plan()[-1]

    @property
    def d_v(self) -> int:
        return self.stage_plan()[-1]

    def samples_per_clip(self) -> int:
        return int(round(self.k * self.sample_rate / self.fps))

    # ---- validation -----------------------------------------------------
    def _check_types(self) -> list:
        """Field-type pass so geometry checks can assume sane values."""
        errs = []

        def ints(v):
            return isinstance(v, tuple) and all(
                isinstance(x, int) and not isinstance(x, bool) for x in v)

        specs = {
            "schema_version": int, "seed": int, "k": int,
            "frame_height": int, "frame_width": int, "sample_rate": int,
            "heads": int, "audio_ufm_kernel": int, "d_o": int,
            "fusion_blocks": int, "fusion_channels": int, "batch_size": int,
            "steps": int, "prefetch": int,
            "fps": (int, float), "width_mult": (int, float),
            "mlp_ratio": (int, float), "kld_eps": (int, float),
            "lr": (int, float), "beta1": (int, float), "beta2": (int, float),
            "adam_eps": (int, float),
            "no_ufm": bool, "no_inter": bool, "use_pe": bool,
            "target_mode": str,
        }
        for name, want in specs.items():
            v = getattr(self, name)
            if isinstance(v, bool) and want is not bool:
                errs.append(f"{name} must be {want}, got a bool")
            elif not isinstance(v, want):
                errs.append(f"{name} must be "
                            f"{getattr(want, '__name__', 'numeric')}, "
                            f"got {type(v).__name__} {v!r}")
        for name in ("audio_channels", "audio_kernels", "audio_strides",
                     "patch_size", "stage_channels", "stage_depths",
                     "window_size", "video_ufm_kernel", "fusion_tile",
                     "fusion_pool", "decoder_channels", "decoder_kernel"):
            if not ints(getattr(self, name)):
                errs.append(f"{name} must be a list of ints, "
                            f"got {getattr(self, name)!r}")
        if not (isinstance(self.decoder_upsample, tuple)
                and all(ints(u) and len(u) == 2 for u in self.decoder_upsample)):
            errs.append("decoder_upsample must be a list of (fh, fw) int pairs")
        for name in ("skip_deep_layer", "skip_shallow_layer"):
            v = getattr(self, name)
            if v is not None and not (isinstance(v, int)
                                      and not isinstance(v, bool)):
                errs.append(f"{name} must be an int or null, got {v!r}")
        if not (isinstance(self.ufm_branches, tuple)
                and all(isinstance(b, str) for b in self.ufm_branches)):
            errs.append(f"ufm_branches must be a list of names, "
                        f"got {self.ufm_branches!r}")
        v = self.reference_param_m
        if v is not None and (isinstance(v, bool)
                              or not isinstance(v, (int, float))):
            errs.append(f"reference_param_m must be numeric or null, got {v!r}")
        return errs

    def validate(self) -> None:
        errs = self._check_types()
        if errs:
            raise ConfigError("invalid configuration:\n  - " +
                              "\n  - ".join(errs))
        if self.schema_version != SCHEMA_VERSION:
            errs.append(f"schema_version must be {SCHEMA_VERSION}, "
                        f"got {self.schema_version}")
        if self.k < 1:
            errs.append(f"k must be >= 1, got {self.k}")
        if not (len(self.audio_channels) == len(self.audio_kernels)
                == len(self.audio_strides) == 7):
            errs.append("audio_channels/audio_kernels/audio_strides must each "
                        "list 7 blocks")
        if any(k % 2 == 0 for k in self.audio_kernels):
            errs.append(f"audio_kernels must be odd, got {self.audio_kernels}")
        if len(self.stage_channels) != len(self.stage_depths):
            errs.append("stage_channels and stage_depths must align")
        if len(self.stage_channels) < 3:
            errs.append("the video encoder needs at least 3 stages")
        pt, ph, pw = self.patch_size
        if self.k % pt:
            errs.append(f"k={self.k} must be divisible by temporal patch {pt}")
        if self.frame_height % ph:
            errs.append(f"frame_height={self.frame_height} must be divisible "
                        f"by patch height {ph}")
        if self.frame_width % pw:
            errs.append(f"frame_width={self.frame_width} must be divisible "
                        f"by patch width {pw}")
        for label, c in (("audio block 5", self.audio_plan()[4]),
                         ("video stage 3", self.stage_plan()[2]),
                         ("d_o", self.d_o)):
            if c % self.heads:
                errs.append(f"{label} width {c} must be divisible by "
                            f"heads={self.heads}")
        for c in self.stage_plan():
            if c % self.heads:
                errs.append(f"stage width {c} must be divisible by "
                            f"heads={self.heads}")
                break
        if len(self.decoder_channels) != 6:
            errs.append(f"decoder_channels must list exactly 6 layers, "
                        f"got {len(self.decoder_channels)}")
        if self.decoder_channels and self.decoder_channels[-1] != 1:
            errs.append("the last decoder layer must emit 1 channel")
        if len(self.decoder_upsample) != len(self.decoder_channels):
            errs.append("decoder_upsample must list one (fh, fw) per layer")
        else:
            t_f, h_f, w_f = self.fusion_pool
            fh = fw = 1
            for a, b in self.decoder_upsample:
                fh *= a
                fw *= b
            if h_f * fh != self.frame_height or w_f * fw != self.frame_width:
                errs.append(
                    f"decoder output extents ({h_f * fh}, {w_f * fw}) do not "
                    f"match frame extents ({self.frame_height}, "
                    f"{self.frame_width}); adjust fusion_pool or "
                    f"decoder_upsample")
        h0, w0 = self.fusion_tile
        t_f, h_f, w_f = self.fusion_pool
        if t_f > self.k or h_f > h0 or w_f > w0:
            errs.append(f"fusion_pool {self.fusion_pool} exceeds the fused "
                        f"lattice extents ({self.k}, {h0}, {w0})")
        for b in self.ufm_branches:
            if b not in ("high", "low", "channel"):
                errs.append(f"unknown frequency branch {b!r}")
        if self.target_mode not in ("all", "last"):
            errs.append(f"target_mode must be 'all' or 'last', "
                        f"got {self.target_mode!r}")
        if self.batch_size < 1 or self.steps < 0 or self.prefetch < 1:
            errs.append("batch_size/prefetch must be >= 1 and steps >= 0")
        if self.lr <= 0 or self.width_mult <= 0:
            errs.append("lr and width_mult must be positive")
        if errs:
            raise ConfigError("invalid configuration:\n  - " +
                              "\n  - ".join(errs))

    # ---- serialization --------------------------------------------------
    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)

        def listify(v):
            if isinstance(v, tuple):
                return [listify(x) for x in v]
            return v

        return {k: listify(v) for k, v in d.items()}

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - names)
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")

        def tuplify(v):
            if isinstance(v, list):
                return tuple(tuplify(x) for x in v)
            return v

        cfg = cls(**{k: tuplify(v) for k, v in d.items()})
        cfg.validate()
        return cfg

    @classmethod
    def from_json(cls, path) -> "ModelConfig":
        with open(path) as fh:
            try:
                d = json.load(fh)
            except json.JSONDecodeError as e:
                raise ConfigError(f"{path}: not valid JSON ({e})") from e
        if not isinstance(d, dict):
            raise ConfigError(f"{path}: config must be a JSON object")
        return cls.from_dict(d)


def fixture_config(**overrides) -> ModelConfig:
    """Desk-scale config matched to the synthetic 56x32 fixture."""
    base = dict(
        k=16, frame_height=32, frame_width=56,
        fusion_tile=(4, 7), fusion_pool=(4, 4, 7),
        decoder_upsample=((1, 1), (1, 1), (2, 2), (2, 2), (2, 2), (1, 1)),
        batch_size=4, steps=300,
    )
    base.update(overrides)
    cfg = ModelConfig(**base)
    cfg.validate()
    return cfg


def full_scale_config(**overrides) -> ModelConfig:
    """Full-scale geometry (384x224 frames); widths stay desk-scale unless
    width_mult raises them.  reference_param_m is the published full-size
    budget, reported for comparison only."""
    base = dict(
        k=16, frame_height=224, frame_width=384,
        fusion_tile=(7, 12), fusion_pool=(4, 7, 12),
        decoder_upsample=((2, 2), (2, 2), (2, 2), (2, 2), (2, 2), (1, 1)),
        reference_param_m=122.5,
    )
    base.update(overrides)
    cfg = ModelConfig(**base)
    cfg.validate()
    return cfg
