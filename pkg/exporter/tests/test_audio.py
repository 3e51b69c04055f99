"""WAV decoding and clip shaping."""

from __future__ import annotations

import numpy as np
import pytest

from clap_exporter import (
    BadAudioError,
    MissingDatasetError,
    crop_or_pad,
    load_clip,
    read_wav,
    to_mono,
)

from wav_helpers import sine, write_wav


class TestReadWav:
    def test_int16_round_trip(self, tmp_path):
        values = np.array([0.0, 0.5, -0.5, 1.0 - 1.0 / 32768.0, -1.0])
        path = tmp_path / "mono16.wav"
        write_wav(path, values, rate=8000, sampwidth=2)
        samples, rate = read_wav(path)
        assert rate == 8000
        assert samples.shape == (5, 1)
        np.testing.assert_allclose(samples[:, 0], values, atol=1.0 / 32768.0)

    def test_int16_values_are_exact_quantization_levels(self, tmp_path):
        path = tmp_path / "exact.wav"
        write_wav(path, np.array([1.0 / 32768.0, -2.0 / 32768.0]), rate=44100)
        samples, _ = read_wav(path)
        assert samples[0, 0] == 1.0 / 32768.0
        assert samples[1, 0] == -2.0 / 32768.0

    def test_stereo_shape(self, tmp_path):
        stereo = np.stack([sine(8000, 0.01, 100.0), sine(8000, 0.01, 200.0)], axis=1)
        path = tmp_path / "stereo.wav"
        write_wav(path, stereo, rate=8000)
        samples, _ = read_wav(path)
        assert samples.shape == (80, 2)

    @pytest.mark.parametrize("sampwidth", [1, 3, 4])
    def test_other_pcm_widths(self, tmp_path, sampwidth):
        values = np.array([0.0, 0.25, -0.25, 0.9, -0.9])
        path = tmp_path / f"w{sampwidth}.wav"
        write_wav(path, values, rate=16000, sampwidth=sampwidth)
        samples, rate = read_wav(path)
        assert rate == 16000
        tol = 1.0 / {1: 128.0, 3: 8388608.0, 4: 2147483648.0}[sampwidth]
        np.testing.assert_allclose(samples[:, 0], values, atol=tol)

    def test_missing_file(self, tmp_path):
        with pytest.raises(MissingDatasetError):
            read_wav(tmp_path / "absent.wav")

    def test_garbage_file(self, tmp_path):
        path = tmp_path / "noise.wav"
        path.write_bytes(b"this is not audio at all")
        with pytest.raises(BadAudioError):
            read_wav(path)


class TestToMono:
    def test_averages_channels(self):
        samples = np.array([[1.0, -1.0], [0.5, 0.5], [0.0, 1.0]])
        np.testing.assert_array_equal(to_mono(samples), [0.0, 0.5, 0.5])

    def test_mono_passthrough(self):
        track = np.array([0.1, 0.2])
        np.testing.assert_array_equal(to_mono(track), track)


class TestCropOrPad:
    def test_crop_keeps_leading_samples(self):
        mono = np.arange(100, dtype=np.float64)
        out = crop_or_pad(mono, rate=10, seconds=4.0)
        np.testing.assert_array_equal(out, np.arange(40, dtype=np.float64))

    def test_pad_appends_zeros(self):
        mono = np.array([1.0, 2.0])
        out = crop_or_pad(mono, rate=5, seconds=1.0)
        np.testing.assert_array_equal(out, [1.0, 2.0, 0.0, 0.0, 0.0])

    def test_exact_length_is_copied(self):
        mono = np.array([1.0, 2.0, 3.0])
        out = crop_or_pad(mono, rate=3, seconds=1.0)
        np.testing.assert_array_equal(out, mono)
        out[0] = 99.0
        assert mono[0] == 1.0

    def test_fractional_duration_rounds(self):
        assert crop_or_pad(np.zeros(5), rate=3, seconds=0.5).size == 2  # round(1.5)

    def test_rejects_nonpositive_duration(self):
        with pytest.raises(BadAudioError):
            crop_or_pad(np.zeros(5), rate=10, seconds=0.0)


class TestLoadClip:
    def test_pads_short_stereo_to_target(self, tmp_path):
        stereo = np.stack([sine(1000, 0.5, 50.0), -sine(1000, 0.5, 50.0)], axis=1)
        path = tmp_path / "clip.wav"
        write_wav(path, stereo, rate=1000)
        mono, rate = load_clip(path, seconds=2.0)
        assert rate == 1000
        assert mono.shape == (2000,)
        # opposite channels cancel, then zero padding
        np.testing.assert_allclose(mono, 0.0, atol=1.0 / 32768.0)

    def test_crops_long_clip(self, tmp_path):
        path = tmp_path / "clip.wav"
        write_wav(path, sine(1000, 3.0, 50.0), rate=1000)
        mono, _ = load_clip(path, seconds=1.0)
        assert mono.shape == (1000,)
