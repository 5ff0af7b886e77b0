"""Recognizer-side detection of crafted CAPTCHA audio.

Inputs that transcribe as empty are compared against a center computed from
benign noise, one distance per activation layer. An input is suspect when its
transcript is empty and at least one layer lies further than that layer's
calibrated threshold tau.

The default activation provider is a deterministic stand-in for a real
recognizer's hidden layers: spectral statistics at three frame sizes. Any
object with ``activations(buffer) -> list of ActivationVector`` can replace it.
"""
import enum
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np
from scipy.spatial.distance import cdist
from sklearn.metrics import f1_score, precision_score, recall_score

from spectral_captcha.exceptions import DegenerateClasses, DimensionMismatch, EmptyInput
from spectral_captcha.utils import setup_logger

logger = setup_logger('detect_logger')


@dataclass(frozen=True, eq=False)
class ActivationVector:
    layer_index: int
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 1 or not np.all(np.isfinite(values)):
            raise ValueError("activation values must be a finite 1-d vector")
        values.setflags(write=False)
        object.__setattr__(self, 'values', values)

    def __len__(self):
        return len(self.values)

    @property
    def serialize(self):
        return {'layer_index': self.layer_index, 'values': [float(v) for v in self.values]}


class SpectralStatsProvider:
    """Per-band statistics of framed magnitude spectra, one layer per frame size.

    Each layer holds, for every band: the mean and standard deviation of
    log(1 + |X|), the spectral flatness of |X| (0 where undefined) and the
    fraction of bins that are numerically zero.
    """

    def __init__(self, frame_sizes=(256, 512, 1024), bands=32, zero_tolerance=1e-9):
        self.frame_sizes = tuple(frame_sizes)
        self.bands = bands
        self.zero_tolerance = zero_tolerance
        for size in self.frame_sizes:
            if size // 2 + 1 < bands:
                raise ValueError(f"frame size {size} has fewer bins than {bands} bands")

    @property
    def dimensions(self):
        return 4 * self.bands

    def _frames(self, samples, size):
        count = -(-len(samples) // size)
        padded = np.zeros(count * size)
        padded[:len(samples)] = samples
        return padded.reshape(count, size)

    def _layer(self, samples, size):
        magnitudes = np.abs(np.fft.rfft(self._frames(samples, size), axis=1))
        peak = magnitudes.max()

        means, stds, flatness, zeros = [], [], [], []
        for band in np.array_split(np.arange(magnitudes.shape[1]), self.bands):
            m = magnitudes[:, band]
            log_m = np.log1p(m)
            means.append(log_m.mean())
            stds.append(log_m.std())

            arithmetic = m.mean(axis=1)
            with np.errstate(divide='ignore'):
                geometric = np.exp(np.log(m).mean(axis=1))
            ratio = np.divide(geometric, arithmetic, out=np.zeros_like(arithmetic),
                              where=arithmetic > 0)
            flatness.append(ratio.mean())
            zeros.append(1.0 if peak == 0 else float(np.mean(m <= self.zero_tolerance * peak)))

        return np.concatenate([means, stds, flatness, zeros])

    def activations(self, buffer):
        if len(buffer) == 0:
            raise EmptyInput("cannot extract activations from an empty buffer")
        return [ActivationVector(index, self._layer(buffer.samples, size))
                for index, size in enumerate(self.frame_sizes)]


def extract_activations(provider, buffer):
    return provider.activations(buffer)


def _stack(vectors, dimensions=None):
    dimensions = dimensions or len(vectors[0])
    if any(len(vector) != dimensions for vector in vectors):
        raise DimensionMismatch(f"expected {dimensions}-dimensional activations")
    return np.vstack([vector.values for vector in vectors])


def compute_center(vectors, rule="medoid"):
    """The input vector with the smallest total (``medoid``) or largest
    (``minimax``) L2 distance to the others. Ties go to the lowest index."""
    if not vectors:
        raise EmptyInput("compute_center needs at least one vector")
    if rule not in ("medoid", "minimax"):
        raise ValueError(f"unknown center rule {rule!r}")

    matrix = _stack(vectors)
    distances = cdist(matrix, matrix)
    scores = distances.sum(axis=1) if rule == "medoid" else distances.max(axis=1)
    return vectors[int(np.argmin(scores))]


def distance_profile(center, vectors):
    if not vectors:
        return []
    matrix = _stack(vectors, len(center))
    return [float(d) for d in np.linalg.norm(matrix - center.values, axis=1)]


@dataclass(frozen=True)
class TauCalibration:
    tau: float
    precision: float
    recall: float
    f1: float

    @property
    def serialize(self):
        return {'tau': self.tau, 'precision': self.precision, 'recall': self.recall, 'f1': self.f1}


def _scores(labels, predictions):
    return (float(precision_score(labels, predictions, zero_division=0)),
            float(recall_score(labels, predictions, zero_division=0)),
            float(f1_score(labels, predictions, zero_division=0)))


def calibrate_tau(noise_distances, captcha_distances):
    """Picks tau so that precision and recall of ``distance > tau`` match.

    Candidates are the midpoints between consecutive distinct distances.
    Among them the smallest |precision - recall| wins, then the highest F1,
    then the smallest tau. CAPTCHA audio is the positive class.
    """
    if not len(noise_distances) or not len(captcha_distances):
        raise DegenerateClasses()

    distances = np.concatenate([np.asarray(noise_distances, dtype=np.float64),
                                np.asarray(captcha_distances, dtype=np.float64)])
    labels = np.concatenate([np.zeros(len(noise_distances), dtype=int),
                             np.ones(len(captcha_distances), dtype=int)])

    unique = np.unique(distances)
    candidates = (unique[:-1] + unique[1:]) / 2 if len(unique) > 1 else unique

    best, best_key = None, None
    for tau in candidates:
        precision, recall, f1 = _scores(labels, (distances > tau).astype(int))
        key = (abs(precision - recall), -f1, tau)
        if best_key is None or key < best_key:
            best, best_key = TauCalibration(float(tau), precision, recall, f1), key
    return best


class Verdict(enum.Enum):
    BENIGN = "benign"
    SUSPECTED_CAPTCHA = "suspected_captcha"


@dataclass
class DetectionProfile:
    centers: List[ActivationVector]
    taus: List[float]
    precision: float
    recall: float
    layers: List[TauCalibration] = field(default_factory=list)
    center_rule: str = "medoid"
    frame_sizes: Tuple[int, ...] = (256, 512, 1024)
    bands: int = 32

    def __post_init__(self):
        if len(self.centers) != len(self.taus):
            raise DimensionMismatch("a profile needs one tau per layer")
        if any(tau <= 0 for tau in self.taus):
            raise ValueError(f"tau must be positive, got {self.taus}")
        if not (0 <= self.precision <= 1 and 0 <= self.recall <= 1):
            raise ValueError("precision and recall must lie in [0, 1]")

    @property
    def layer_count(self):
        return len(self.centers)

    def provider(self):
        return SpectralStatsProvider(self.frame_sizes, self.bands)

    def distances(self, activations):
        if len(activations) != self.layer_count:
            raise DimensionMismatch(f"expected {self.layer_count} layers, got {len(activations)}")
        return [distance_profile(center, [vector])[0]
                for center, vector in zip(self.centers, activations)]

    def exceeds(self, activations):
        return any(d > tau for d, tau in zip(self.distances(activations), self.taus))

    @property
    def serialize(self):
        return {
            'center_rule': self.center_rule,
            'frame_sizes': list(self.frame_sizes),
            'bands': self.bands,
            'precision': self.precision,
            'recall': self.recall,
            'taus': list(self.taus),
            'layers': [layer.serialize for layer in self.layers],
            'centers': [center.serialize for center in self.centers],
        }

    @classmethod
    def from_dict(cls, data):
        return cls(centers=[ActivationVector(c['layer_index'], c['values']) for c in data['centers']],
                   taus=[float(t) for t in data['taus']],
                   precision=data['precision'],
                   recall=data['recall'],
                   layers=[TauCalibration(**layer) for layer in data.get('layers', [])],
                   center_rule=data.get('center_rule', 'medoid'),
                   frame_sizes=tuple(data.get('frame_sizes', (256, 512, 1024))),
                   bands=data.get('bands', 32))

    def __repr__(self):
        return (f"<DetectionProfile {self.layer_count} layers "
                f"P={self.precision:.3f} R={self.recall:.3f}>")


def fit_profile(provider, noise_buffers, captcha_buffers, center_rule="medoid"):
    """Centers from noise activations, one tau per layer, and the achieved
    precision/recall of the any-layer decision on the calibration sets."""
    if not noise_buffers or not captcha_buffers:
        raise DegenerateClasses()

    noise = [provider.activations(buffer) for buffer in noise_buffers]
    captcha = [provider.activations(buffer) for buffer in captcha_buffers]
    layer_count = len(noise[0])

    centers, layers = [], []
    for layer in range(layer_count):
        center = compute_center([acts[layer] for acts in noise], center_rule)
        calibration = calibrate_tau(distance_profile(center, [acts[layer] for acts in noise]),
                                    distance_profile(center, [acts[layer] for acts in captcha]))
        centers.append(center)
        layers.append(calibration)
        logger.info(f"layer {layer}: tau={calibration.tau:.4f} "
                    f"P={calibration.precision:.3f} R={calibration.recall:.3f}")

    profile = DetectionProfile(centers=centers, taus=[layer.tau for layer in layers],
                               precision=0.0, recall=0.0, layers=layers, center_rule=center_rule,
                               frame_sizes=getattr(provider, 'frame_sizes', ()),
                               bands=getattr(provider, 'bands', 0))

    labels = [0] * len(noise) + [1] * len(captcha)
    predictions = [int(profile.exceeds(acts)) for acts in noise + captcha]
    profile.precision, profile.recall, _ = _scores(labels, predictions)
    logger.info(f"fused: P={profile.precision:.3f} R={profile.recall:.3f}")
    return profile


def classify_input(buffer, transcript, profile, provider=None):
    """Flags empty-transcript inputs that are far from benign noise."""
    if not transcript.is_empty:
        return Verdict.BENIGN
    provider = provider or profile.provider()
    if profile.exceeds(provider.activations(buffer)):
        return Verdict.SUSPECTED_CAPTCHA
    return Verdict.BENIGN


def evasion_probability(recall, captcha_length):
    """Chance that no utterance of a challenge is flagged."""
    if not 0.0 <= recall <= 1.0:
        raise ValueError(f"recall must lie in [0, 1], got {recall}")
    if int(captcha_length) != captcha_length or captcha_length < 1:
        raise ValueError(f"captcha_length must be a positive integer, got {captcha_length}")
    return (1.0 - recall) ** captcha_length


def cdf_rows(profile, provider, noise_buffers, captcha_buffers):
    """``(layer, distance, class)`` rows for distance CDF plots, sorted per layer."""
    rows = []
    for kind, buffers in (("noise", noise_buffers), ("captcha", captcha_buffers)):
        for buffer in buffers:
            for layer, distance in enumerate(profile.distances(provider.activations(buffer))):
                rows.append((layer, distance, kind))
    return sorted(rows, key=lambda row: (row[0], row[1], row[2]))
