import struct
import wave

import numpy as np
import pytest

from tsex.audio_io import Waveform, read_wav, write_wav
from tsex.errors import CorruptHeaderError, UnsupportedFormatError


def _write_pcm16(path, samples_int16, rate=8000, channels=1):
    with wave.open(str(path), "wb") as f:
        f.setnchannels(channels)
        f.setsampwidth(2)
        f.setframerate(rate)
        f.writeframes(np.asarray(samples_int16, dtype="<i2").tobytes())


def test_read_scales_by_32768(tmp_path):
    p = tmp_path / "one.wav"
    _write_pcm16(p, [16384])
    w = read_wav(p)
    assert w.samples.tolist() == [0.5]
    assert w.sample_rate_hz == 8000


def test_read_range_endpoints(tmp_path):
    p = tmp_path / "ends.wav"
    _write_pcm16(p, [0, -32768])
    w = read_wav(p)
    assert w.samples.tolist() == [0.0, -1.0]


def test_read_rejects_stereo(tmp_path):
    p = tmp_path / "stereo.wav"
    _write_pcm16(p, [0, 0, 0, 0], channels=2)
    with pytest.raises(UnsupportedFormatError):
        read_wav(p)


def test_read_rejects_8bit(tmp_path):
    p = tmp_path / "8bit.wav"
    with wave.open(str(p), "wb") as f:
        f.setnchannels(1)
        f.setsampwidth(1)
        f.setframerate(8000)
        f.writeframes(b"\x80\x80")
    with pytest.raises(UnsupportedFormatError):
        read_wav(p)


def test_read_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        read_wav(tmp_path / "nope.wav")


def test_read_corrupt_header(tmp_path):
    p = tmp_path / "garbage.wav"
    p.write_bytes(b"not a riff file at all" + struct.pack("<I", 0))
    with pytest.raises(CorruptHeaderError):
        read_wav(p)


def test_write_read_roundtrip_single_sample(tmp_path):
    p = tmp_path / "half.wav"
    write_wav(p, Waveform(np.array([0.5]), 8000))
    back = read_wav(p)
    assert abs(back.samples[0] - 0.5) <= 2 ** -15


def test_write_clamps_above_one(tmp_path):
    p = tmp_path / "clamp.wav"
    write_wav(p, Waveform(np.array([1.7]), 8000))
    assert read_wav(p).samples[0] == 1.0 - 2 ** -15


def test_write_missing_directory(tmp_path):
    with pytest.raises(OSError):
        write_wav(tmp_path / "no_such_dir" / "x.wav", Waveform(np.array([0.1]), 8000))


def test_random_roundtrip_quantization_bound(tmp_path, rng):
    for i in range(5):
        x = rng.uniform(-1.0, 1.0, size=777)
        p = tmp_path / f"r{i}.wav"
        write_wav(p, Waveform(x, 8000))
        back = read_wav(p)
        assert np.max(np.abs(back.samples - np.clip(x, -1, 1 - 2 ** -15))) <= 2 ** -15


def test_clamping_idempotent(tmp_path):
    x = np.array([-2.0, -1.0, 0.0, 0.3, 1.0, 2.0])
    p1, p2 = tmp_path / "a.wav", tmp_path / "b.wav"
    write_wav(p1, Waveform(x, 8000))
    once = read_wav(p1)
    write_wav(p2, once)
    assert np.array_equal(read_wav(p2).samples, once.samples)


def test_waveform_rejects_empty_and_nonfinite():
    with pytest.raises(ValueError):
        Waveform(np.array([]), 8000)
    with pytest.raises(ValueError):
        Waveform(np.array([np.nan]), 8000)
    with pytest.raises(ValueError):
        Waveform(np.array([0.0]), 0)
