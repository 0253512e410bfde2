"""Mono 16-bit PCM WAV reading and magnitude spectrogram extraction.

The spectrogram convention: frames start at offsets 0, hop, 2*hop, ...
for as long as a full window fits (no padding, no centering), each frame
is multiplied by a symmetric Hamming window, and a row holds the DFT
magnitudes for bins 0..window/2. At the 16 kHz protocol rate the default
512/256 sample window and hop correspond to 32 ms and 16 ms.
"""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import SqaLabError

PROTOCOL_SAMPLE_RATE = 16000


@dataclass(frozen=True)
class WaveBuffer:
    """Mono waveform with samples scaled to [-1, 1]."""

    samples: np.ndarray
    sample_rate: int

    @property
    def n_samples(self) -> int:
        return int(self.samples.size)


@dataclass(frozen=True)
class StftConfig:
    window_length: int = 512
    hop_length: int = 256

    def __post_init__(self):
        if self.window_length < 2:
            raise SqaLabError(
                f"window_length must be >= 2, got {self.window_length}", code="stft_config"
            )
        if not 0 < self.hop_length <= self.window_length:
            raise SqaLabError(
                f"hop_length must be in 1..window_length, got {self.hop_length}",
                code="stft_config",
            )

    @property
    def n_bins(self) -> int:
        return self.window_length // 2 + 1


def read_wav(source) -> WaveBuffer:
    """Parse a RIFF/WAVE file: PCM, 16-bit, mono only.

    ``source`` may be raw bytes, a path, or a binary file object.
    Unsupported header fields are reported by name; truncated files are
    rejected. Samples are scaled by 1/32768, so -32768 maps to -1.0.
    A sample rate other than 16000 Hz is accepted with a warning.
    """
    data = _as_bytes(source)
    if len(data) < 12 or data[0:4] != b"RIFF":
        raise SqaLabError("not a RIFF file (missing 'RIFF' magic)", code="wav_format")
    if data[8:12] != b"WAVE":
        raise SqaLabError("RIFF file is not WAVE format", code="wav_format")

    fmt = None
    payload = None
    offset = 12
    while offset + 8 <= len(data):
        chunk_id = data[offset : offset + 4]
        (chunk_size,) = struct.unpack_from("<I", data, offset + 4)
        body_start = offset + 8
        body_end = body_start + chunk_size
        if body_end > len(data):
            raise SqaLabError(
                f"truncated file: chunk {chunk_id!r} declares {chunk_size} bytes "
                f"but only {len(data) - body_start} remain",
                code="wav_truncated",
            )
        if chunk_id == b"fmt ":
            if chunk_size < 16:
                raise SqaLabError("fmt chunk shorter than 16 bytes", code="wav_format")
            fmt = struct.unpack_from("<HHIIHH", data, body_start)
        elif chunk_id == b"data":
            payload = data[body_start:body_end]
        offset = body_end + (chunk_size & 1)  # chunks are padded to even size

    if fmt is None:
        raise SqaLabError("missing fmt chunk", code="wav_format")
    audio_format, channels, sample_rate, _byte_rate, _block_align, bits = fmt
    if audio_format != 1:
        raise SqaLabError(
            f"audio_format={audio_format} unsupported (PCM required)", code="wav_unsupported"
        )
    if channels != 1:
        raise SqaLabError(f"channels={channels} unsupported (mono required)",
                          code="wav_unsupported")
    if bits != 16:
        raise SqaLabError(
            f"bits_per_sample={bits} unsupported (16-bit required)", code="wav_unsupported"
        )
    if payload is None:
        raise SqaLabError("missing data chunk", code="wav_format")
    if len(payload) % 2 != 0:
        raise SqaLabError("data chunk has an odd byte count", code="wav_truncated")
    if sample_rate != PROTOCOL_SAMPLE_RATE:
        warnings.warn(
            f"sample rate {sample_rate} Hz differs from the {PROTOCOL_SAMPLE_RATE} Hz protocol",
            stacklevel=2,
        )
    samples = np.frombuffer(payload, dtype="<i2").astype(np.float64) / 32768.0
    return WaveBuffer(samples=samples, sample_rate=int(sample_rate))


def write_wav(path, samples, sample_rate: int) -> None:
    """Write a mono 16-bit PCM WAV file (values clipped to [-1, 1])."""
    x = np.clip(np.asarray(samples, dtype=np.float64), -1.0, 1.0)
    pcm = np.round(x * 32767.0).astype("<i2").tobytes()
    header = b"RIFF" + struct.pack("<I", 36 + len(pcm)) + b"WAVE"
    fmt = b"fmt " + struct.pack("<IHHIIHH", 16, 1, 1, sample_rate, sample_rate * 2, 2, 16)
    data = b"data" + struct.pack("<I", len(pcm)) + pcm
    Path(path).write_bytes(header + fmt + data)


def _as_bytes(source) -> bytes:
    if isinstance(source, (bytes, bytearray)):
        return bytes(source)
    if hasattr(source, "read"):
        return source.read()
    return Path(source).read_bytes()


def hamming_window(n: int) -> np.ndarray:
    """Symmetric Hamming window: 0.54 - 0.46*cos(2*pi*k/(n-1)), k = 0..n-1."""
    if n < 2:
        raise SqaLabError(f"window length must be >= 2, got {n}", code="stft_config")
    k = np.arange(n)
    return 0.54 - 0.46 * np.cos(2.0 * np.pi * k / (n - 1))


def frame_count(n_samples: int, window_length: int, hop_length: int) -> int:
    """Number of full windows at offsets 0, hop, 2*hop, ... within n_samples."""
    if n_samples < window_length:
        raise SqaLabError(
            f"signal of {n_samples} samples is shorter than one window ({window_length})",
            code="signal_too_short",
        )
    return (n_samples - window_length) // hop_length + 1


def stft_magnitude(wave, cfg: StftConfig | None = None) -> np.ndarray:
    """Magnitude spectrogram, shape (frames, window/2 + 1).

    ``wave`` is a WaveBuffer or a bare 1-D sample array.
    """
    cfg = cfg or StftConfig()
    samples = wave.samples if isinstance(wave, WaveBuffer) else wave
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 1:
        raise SqaLabError("waveform must be 1-D", code="wav_format")
    n_frames = frame_count(x.size, cfg.window_length, cfg.hop_length)
    offsets = np.arange(n_frames) * cfg.hop_length
    frames = x[offsets[:, None] + np.arange(cfg.window_length)[None, :]]
    return np.abs(np.fft.rfft(frames * hamming_window(cfg.window_length), axis=1))
