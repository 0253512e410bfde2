import io
import struct

import numpy as np
import pytest

from sqalab.audio import (
    StftConfig,
    WaveBuffer,
    frame_count,
    hamming_window,
    read_wav,
    stft_magnitude,
    write_wav,
)
from sqalab.errors import SqaLabError


def pcm_wav_bytes(samples_i16, sample_rate=16000, channels=1, bits=16, audio_format=1):
    pcm = struct.pack(f"<{len(samples_i16)}h", *samples_i16)
    fmt = b"fmt " + struct.pack(
        "<IHHIIHH", 16, audio_format, channels, sample_rate,
        sample_rate * channels * bits // 8, channels * bits // 8, bits,
    )
    data = b"data" + struct.pack("<I", len(pcm)) + pcm
    return b"RIFF" + struct.pack("<I", 4 + len(fmt) + len(data)) + b"WAVE" + fmt + data


class TestHamming:
    def test_endpoints(self):
        w = hamming_window(8)
        assert abs(w[0] - 0.08) <= 1e-12
        assert abs(w[-1] - 0.08) <= 1e-12

    def test_odd_midpoint(self):
        w = hamming_window(9)
        assert abs(w[4] - 1.0) <= 1e-12

    def test_n4(self):
        w = hamming_window(4)
        assert np.allclose(w, [0.08, 0.77, 0.77, 0.08], atol=1e-12)

    def test_too_short(self):
        with pytest.raises(SqaLabError):
            hamming_window(1)


class TestFrameCount:
    def test_formula_vs_naive_loop(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            window = int(rng.integers(2, 64))
            hop = int(rng.integers(1, window + 1))
            length = int(rng.integers(window, 600))
            naive = 0
            offset = 0
            while offset + window <= length:
                naive += 1
                offset += hop
            assert frame_count(length, window, hop) == naive

    def test_protocol_example(self):
        assert frame_count(16000, 512, 256) == 61

    def test_too_short(self):
        with pytest.raises(SqaLabError) as ei:
            frame_count(100, 512, 256)
        assert ei.value.code == "signal_too_short"


class TestStft:
    def test_zero_signal(self):
        wave = WaveBuffer(samples=np.zeros(2048), sample_rate=16000)
        m = stft_magnitude(wave)
        assert m.shape == (7, 257)
        assert np.all(m == 0)

    def test_one_second_framing(self):
        wave = WaveBuffer(samples=np.zeros(16000), sample_rate=16000)
        assert stft_magnitude(wave).shape == (61, 257)

    def test_1khz_tone_peak_bin(self):
        t = np.arange(16000) / 16000.0
        tone = 0.5 * np.sin(2 * np.pi * 1000.0 * t)
        m = stft_magnitude(WaveBuffer(samples=tone, sample_rate=16000))
        for row in m:
            assert int(np.argmax(row)) == 32
            energy = row**2
            assert energy[31:34].sum() / energy.sum() >= 0.90

    def test_sign_flip_invariance(self):
        rng = np.random.default_rng(5)
        x = rng.standard_normal(1500)
        cfg = StftConfig(window_length=256, hop_length=128)
        a = stft_magnitude(x, cfg)
        b = stft_magnitude(-x, cfg)
        assert np.allclose(a, b, atol=1e-12)

    def test_accepts_bare_array(self):
        m = stft_magnitude(np.zeros(1024), StftConfig(512, 256))
        assert m.shape == (3, 257)

    def test_short_signal_error(self):
        with pytest.raises(SqaLabError):
            stft_magnitude(np.zeros(100), StftConfig(512, 256))

    def test_config_validation(self):
        with pytest.raises(SqaLabError):
            StftConfig(window_length=512, hop_length=0)
        with pytest.raises(SqaLabError):
            StftConfig(window_length=128, hop_length=256)
        assert StftConfig(512, 256).n_bins == 257


class TestReadWav:
    def test_silence_second(self):
        wave = read_wav(pcm_wav_bytes([0] * 16000))
        assert wave.n_samples == 16000
        assert wave.sample_rate == 16000
        assert np.all(wave.samples == 0)

    def test_scale_convention(self):
        wave = read_wav(pcm_wav_bytes([-32768, 32767, 0]))
        assert wave.samples[0] == -1.0
        assert abs(wave.samples[1] - 32767 / 32768) <= 1e-12
        assert wave.samples[2] == 0.0

    def test_stereo_rejected(self):
        data = pcm_wav_bytes([0, 0], channels=2)
        with pytest.raises(SqaLabError, match="channels=2 unsupported") as ei:
            read_wav(data)
        assert ei.value.code == "wav_unsupported"

    def test_non_pcm_rejected(self):
        with pytest.raises(SqaLabError, match="audio_format=3"):
            read_wav(pcm_wav_bytes([0], audio_format=3))

    def test_wrong_bits_rejected(self):
        with pytest.raises(SqaLabError, match="bits_per_sample=8"):
            read_wav(pcm_wav_bytes([0], bits=8))

    def test_truncated(self):
        data = pcm_wav_bytes([1, 2, 3, 4])
        with pytest.raises(SqaLabError) as ei:
            read_wav(data[:-3])
        assert ei.value.code == "wav_truncated"

    def test_not_riff(self):
        with pytest.raises(SqaLabError):
            read_wav(b"OggS" + b"\x00" * 40)
        with pytest.raises(SqaLabError):
            read_wav(b"RIFF\x04\x00\x00\x00AIFF")

    def test_missing_chunks(self):
        header_only = b"RIFF" + struct.pack("<I", 4) + b"WAVE"
        with pytest.raises(SqaLabError, match="fmt"):
            read_wav(header_only)

    def test_non_protocol_rate_warns(self):
        with pytest.warns(UserWarning, match="8000"):
            wave = read_wav(pcm_wav_bytes([0, 0], sample_rate=8000))
        assert wave.sample_rate == 8000

    def test_sources_path_and_fileobj(self, tmp_path):
        data = pcm_wav_bytes([100, -100, 2000])
        path = tmp_path / "x.wav"
        path.write_bytes(data)
        from_path = read_wav(path)
        from_obj = read_wav(io.BytesIO(data))
        assert np.array_equal(from_path.samples, from_obj.samples)

    def test_write_read_roundtrip(self, tmp_path):
        rng = np.random.default_rng(1)
        x = rng.uniform(-0.9, 0.9, 500)
        path = tmp_path / "rt.wav"
        write_wav(path, x, 16000)
        back = read_wav(path)
        assert back.sample_rate == 16000
        # encode scales by 32767, decode divides by 32768: error <= (|x| + 0.5) / 32768
        assert np.max(np.abs(back.samples - x)) <= 1.5 / 32768
