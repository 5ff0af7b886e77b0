"""Spectral perturbations: decimation, clipping and Gaussian noising.

Thresholds are evaluated on bin magnitude |X_k|. Decimation keeps a bin whose
magnitude equals T_d; clipping leaves a bin whose magnitude equals T_c alone.
Both decide per mirror pair (k, N-k) so reconstructed signals stay real.
"""
import numpy as np

from spectral_captcha.audio import AudioBuffer, Spectrum, dft, idft
from spectral_captcha.exceptions import AlphaOutOfRange, InvalidFraction
from spectral_captcha.utils import derive_seed

MASK64 = 0xFFFFFFFFFFFFFFFF


def _check_fraction(value, name):
    if not (0.0 <= value <= 1.0):
        raise InvalidFraction(f"{name} must lie in [0, 1], got {value}")


def decimate(spectrum, t_d_frac):
    _check_fraction(t_d_frac, "T_d fraction")

    magnitudes = spectrum.pair_magnitudes
    threshold = t_d_frac * spectrum.max_magnitude
    bins = np.array(spectrum.bins)
    bins[magnitudes < threshold] = 0
    return Spectrum(bins, spectrum.sample_rate)


def clip(spectrum, alpha):
    """Caps every bin at T_c = max|X| - alpha, keeping its phase."""
    peak = spectrum.max_magnitude
    if not (0.0 <= alpha <= peak):
        raise AlphaOutOfRange(f"alpha must lie in [0, {peak}], got {alpha}")

    t_c = peak - alpha
    magnitudes = spectrum.pair_magnitudes
    bins = np.array(spectrum.bins)
    over = magnitudes > t_c
    if t_c == 0:
        bins[over] = 0
    else:
        bins[over] = t_c * np.exp(1j * np.angle(bins[over]))
    return Spectrum(bins, spectrum.sample_rate)


def noise_generator(seed):
    return np.random.default_rng(int(seed) & MASK64)


def add_gaussian_noise(buffer, noise_std_fraction, seed):
    if noise_std_fraction < 0:
        raise InvalidFraction(f"noise fraction must be >= 0, got {noise_std_fraction}")
    if noise_std_fraction == 0:
        return buffer

    std = noise_std_fraction * buffer.peak
    noise = noise_generator(seed).normal(0.0, std, len(buffer))
    return AudioBuffer(np.clip(buffer.samples + noise, -1.0, 1.0), buffer.sample_rate)


def sweep_variants(buffer, sweep):
    """Yields ``(amplitude_index, realization, fraction, seed, noised)`` in sweep order.

    Seeds depend only on (base_seed, amplitude_index, realization), so a
    crafting run and an adversary using the same sweep see the same noise.
    """
    for amplitude_index, fraction in enumerate(sweep.amplitudes()):
        for realization in range(sweep.realizations_per_amplitude):
            seed = derive_seed(sweep.base_seed, amplitude_index, realization)
            noised = add_gaussian_noise(buffer, float(fraction), seed)
            yield amplitude_index, realization, float(fraction), seed, noised


def _framewise(buffer, frame_size, perturb_spectrum):
    if not frame_size or frame_size >= len(buffer):
        return idft(perturb_spectrum(dft(buffer)))

    pieces = []
    for start in range(0, len(buffer), frame_size):
        frame = AudioBuffer(buffer.samples[start:start + frame_size], buffer.sample_rate)
        pieces.append(idft(perturb_spectrum(dft(frame))).samples)
    return AudioBuffer(np.concatenate(pieces), buffer.sample_rate)


def perturb_kenansville(buffer, t_d_frac, frame_size=None):
    """Decimation only."""
    return _framewise(buffer, frame_size, lambda spectrum: decimate(spectrum, t_d_frac))


def perturb_yeehaw(buffer, t_d_frac, alpha, frame_size=None):
    """Decimate, then clip, then reconstruct.

    ``alpha`` is checked against the decimated spectrum's maximum. In
    framewise mode each frame clips with min(alpha, frame maximum).
    """
    def transform(spectrum):
        decimated = decimate(spectrum, t_d_frac)
        if frame_size:
            return clip(decimated, min(alpha, decimated.max_magnitude))
        return clip(decimated, alpha)

    return _framewise(buffer, frame_size, transform)


def alpha_ceiling(buffer, t_d_frac):
    """Largest admissible alpha: the decimated spectrum's maximum magnitude."""
    return decimate(dft(buffer), t_d_frac).max_magnitude
