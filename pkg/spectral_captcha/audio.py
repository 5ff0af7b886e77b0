"""Time and frequency domain signal types, WAV I/O and distortion metrics.

Everything here is a pure function over immutable values: buffers are never
mutated in place, so they can be shared between worker threads.
"""
import io
import os
import struct
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.io import wavfile

from spectral_captcha.exceptions import (
    EmptyInput, IoError, LengthMismatch, MalformedWav, UnsupportedFormat
)
from spectral_captcha.utils import setup_logger

logger = setup_logger('audio_logger')

CANONICAL_RATE = 16000
PCM_SCALE = 32768.0


@dataclass(frozen=True, eq=False)
class AudioBuffer:
    samples: np.ndarray
    sample_rate: int = CANONICAL_RATE

    def __post_init__(self):
        samples = np.array(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise UnsupportedFormat("AudioBuffer holds mono samples only")
        if not np.all(np.isfinite(samples)):
            raise ValueError("AudioBuffer samples must be finite")
        if int(self.sample_rate) <= 0:
            raise ValueError("sample_rate must be positive")
        samples.setflags(write=False)
        object.__setattr__(self, 'samples', samples)
        object.__setattr__(self, 'sample_rate', int(self.sample_rate))

    def __len__(self):
        return len(self.samples)

    @property
    def peak(self):
        return float(np.max(np.abs(self.samples))) if len(self.samples) else 0.0

    def __repr__(self):
        return f"<AudioBuffer {len(self)} samples @ {self.sample_rate} Hz>"


@dataclass(frozen=True, eq=False)
class Spectrum:
    bins: np.ndarray
    sample_rate: int = CANONICAL_RATE

    def __post_init__(self):
        bins = np.array(self.bins, dtype=np.complex128)
        bins.setflags(write=False)
        object.__setattr__(self, 'bins', bins)

    def __len__(self):
        return len(self.bins)

    @property
    def magnitudes(self):
        return np.abs(self.bins)

    @property
    def pair_magnitudes(self):
        """Per-bin magnitude shared by the mirror pair (k, N-k).

        Thresholding on this value perturbs both halves of a real signal's
        spectrum identically.
        """
        magnitudes = self.magnitudes
        mirror = magnitudes[(-np.arange(len(magnitudes))) % len(magnitudes)]
        return np.maximum(magnitudes, mirror)

    @property
    def max_magnitude(self):
        return float(np.max(self.magnitudes)) if len(self.bins) else 0.0

    def __repr__(self):
        return f"<Spectrum {len(self)} bins @ {self.sample_rate} Hz>"


def silence(duration_ms, sample_rate=CANONICAL_RATE):
    return AudioBuffer(np.zeros(int(round(duration_ms * sample_rate / 1000))), sample_rate)


def decode_wav(source):
    """Reads a 16-bit mono PCM WAV from a path or a binary file object."""
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter('always', wavfile.WavFileWarning)
        try:
            sample_rate, data = wavfile.read(source, mmap=False)
        except FileNotFoundError:
            raise IoError(f"No such file: {source}")
        except ValueError as e:
            message = str(e)
            if 'Unknown wave file format' in message or 'Unsupported' in message:
                raise UnsupportedFormat(message)
            raise MalformedWav(message)
        except (EOFError, struct.error) as e:
            raise MalformedWav(f"truncated file: {e}")

    for warning in caught:
        text = str(warning.message)
        if 'EOF' in text or 'ncomplete' in text:
            raise MalformedWav(text)

    if data.ndim != 1:
        raise UnsupportedFormat(f"expected mono audio, found {data.shape[1]} channels")
    if data.dtype != np.int16:
        raise UnsupportedFormat(f"expected 16-bit PCM samples, found {data.dtype}")
    if len(data) == 0:
        raise MalformedWav("data chunk holds no samples")

    return AudioBuffer(data.astype(np.float64) / PCM_SCALE, int(sample_rate))


def load_wav(path):
    return decode_wav(path)


def encode_wav(buffer):
    """Canonical WAV bytes of a buffer; also the content-hash input for caches."""
    quantized = np.clip(np.round(buffer.samples * PCM_SCALE), -PCM_SCALE, PCM_SCALE - 1)
    out = io.BytesIO()
    wavfile.write(out, buffer.sample_rate, quantized.astype(np.int16))
    return out.getvalue()


def save_wav(buffer, path):
    try:
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        with open(path, 'wb') as f:
            f.write(encode_wav(buffer))
    except OSError as e:
        raise IoError(f"Could not write {path}: {e}")


def dft(buffer):
    if len(buffer) == 0:
        raise EmptyInput("cannot take the DFT of an empty buffer")
    return Spectrum(np.fft.fft(buffer.samples), buffer.sample_rate)


def idft(spectrum):
    if len(spectrum) == 0:
        raise EmptyInput("cannot invert an empty spectrum")

    samples = np.real(np.fft.ifft(spectrum.bins))
    clamped = np.count_nonzero(np.abs(samples) > 1.0)
    if clamped:
        logger.warning(f"idft clamped {clamped} of {len(samples)} samples to [-1, 1]")
        samples = np.clip(samples, -1.0, 1.0)

    return AudioBuffer(samples, spectrum.sample_rate)


def rmse(a, b):
    if len(a) != len(b) or a.sample_rate != b.sample_rate:
        raise LengthMismatch(
            f"cannot compare {len(a)} samples @ {a.sample_rate} Hz "
            f"with {len(b)} samples @ {b.sample_rate} Hz")
    if len(a) == 0:
        raise EmptyInput("rmse of empty buffers is undefined")
    return float(np.sqrt(np.mean((a.samples - b.samples) ** 2)))


def concatenate(buffers, gap_ms=0):
    """Joins buffers with ``gap_ms`` of silence between consecutive ones.

    Returns the joined buffer and the (start, end) sample range of each input.
    """
    sample_rate = buffers[0].sample_rate
    gap = np.zeros(int(round(gap_ms * sample_rate / 1000)))
    pieces, bounds, cursor = [], [], 0
    for i, buffer in enumerate(buffers):
        if i:
            pieces.append(gap)
            cursor += len(gap)
        pieces.append(buffer.samples)
        bounds.append((cursor, cursor + len(buffer)))
        cursor += len(buffer)
    return AudioBuffer(np.concatenate(pieces), sample_rate), bounds
