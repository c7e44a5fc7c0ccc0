"""On-disk formats for maps, frames and audio.

Saliency maps travel in two forms:

* 8-bit binary PGM — header ``P5\\n{W} {H}\\n255\\n`` followed by H*W
  bytes, row-major; values are ``round(v * 255)`` of the [0, 1] map.
* raw float32 — magic ``SMAP``, then little-endian u32 version (1),
  u32 height, u32 width, followed by H*W little-endian f32, row-major.

Frames are 8-bit RGB PNG (or binary PPM); audio is 16-bit PCM WAV, with
multi-channel input downmixed by the channel mean on read.
"""

from __future__ import annotations

import struct
import wave as wave_mod

import numpy as np
from PIL import Image

from .errors import InputError

_MAP_MAGIC = b"SMAP"
_MAP_VERSION = 1


def write_pgm(path, arr: np.ndarray) -> None:
    a = np.asarray(arr, dtype=np.float64)
    if a.ndim != 2:
        raise InputError(f"pgm wants a 2-D map, got {a.shape}")
    scaled = np.clip(np.round(a * 255.0), 0, 255).astype(np.uint8)
    h, w = a.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(scaled.tobytes())


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        blob = fh.read()
    parts = blob.split(b"\n", 3)
    if len(parts) != 4 or parts[0] != b"P5" or parts[2] != b"255":
        raise InputError(f"{path}: not an 8-bit binary PGM")
    w, h = (int(x) for x in parts[1].split())
    data = np.frombuffer(parts[3][:w * h], dtype=np.uint8)
    if data.size != w * h:
        raise InputError(f"{path}: truncated PGM payload")
    return data.reshape(h, w).astype(np.float64) / 255.0


def write_f32_map(path, arr: np.ndarray) -> None:
    a = np.asarray(arr)
    if a.ndim != 2:
        raise InputError(f"map file wants a 2-D map, got {a.shape}")
    h, w = a.shape
    with open(path, "wb") as fh:
        fh.write(_MAP_MAGIC)
        fh.write(struct.pack("<III", _MAP_VERSION, h, w))
        fh.write(np.ascontiguousarray(a, dtype="<f4").tobytes())


def read_f32_map(path) -> np.ndarray:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != _MAP_MAGIC:
        raise InputError(f"{path}: not a raw map file (bad magic)")
    version, h, w = struct.unpack_from("<III", blob, 4)
    if version != _MAP_VERSION:
        raise InputError(f"{path}: unsupported map version {version}")
    data = np.frombuffer(blob, dtype="<f4", count=h * w, offset=16)
    if data.size != h * w:
        raise InputError(f"{path}: truncated map payload")
    return data.reshape(h, w).astype(np.float64)


def write_frame(path, rgb: np.ndarray) -> None:
    """rgb float array (H, W, 3) in [0, 1] -> 8-bit image file."""
    a = np.clip(np.round(np.asarray(rgb) * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(a, mode="RGB").save(path)


def read_frame(path) -> np.ndarray:
    """Image file -> float (H, W, 3) in [0, 1]."""
    with Image.open(path) as img:
        a = np.asarray(img.convert("RGB"), dtype=np.float32)
    return a / 255.0


def write_wav(path, samples: np.ndarray, sample_rate: int) -> None:
    """Mono float samples in [-1, 1] -> 16-bit PCM WAV."""
    s = np.clip(np.asarray(samples, dtype=np.float64), -1.0, 1.0)
    pcm = np.round(s * 32767.0).astype("<i2")
    with wave_mod.open(str(path), "wb") as fh:
        fh.setnchannels(1)
        fh.setsampwidth(2)
        fh.setframerate(int(sample_rate))
        fh.writeframes(pcm.tobytes())


def read_wav(path) -> tuple[np.ndarray, int]:
    """WAV -> (mono float32 samples in [-1, 1], sample_rate).

    16-bit PCM only; stereo (or more) is downmixed by the channel mean.
    """
    with wave_mod.open(str(path), "rb") as fh:
        if fh.getsampwidth() != 2:
            raise InputError(f"{path}: expected 16-bit PCM")
        n_ch = fh.getnchannels()
        rate = fh.getframerate()
        raw = fh.readframes(fh.getnframes())
    data = np.frombuffer(raw, dtype="<i2").astype(np.float32) / 32767.0
    if n_ch > 1:
        data = data.reshape(-1, n_ch).mean(axis=1)
    return data, rate
