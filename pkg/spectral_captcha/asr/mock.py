"""A deterministic, offline stand-in for a speech recognizer.

Each label is represented by the mean log-magnitude of its training audio in
a fixed number of spectral bands. Audio is transcribed as the nearest label,
or as the empty string when it is too far from every template or when too
many of its frequency bins are empty: natural recordings have energy in
almost every bin, so spectra that are mostly zero are rejected outright.
"""
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from configs import MockOracleConfig
from spectral_captcha.asr import TranscriptionOracle, Transcript
from spectral_captcha.exceptions import EmptyCorpus, EmptyInput
from spectral_captcha.utils import read_json, setup_logger, write_json

logger = setup_logger('mock_oracle_logger')

LOG_FLOOR = 1e-8


def band_features(buffer, bands=64):
    """Log mean magnitude in ``bands`` equal-width bands of the one-sided spectrum."""
    magnitudes = np.abs(np.fft.rfft(buffer.samples)) / max(len(buffer), 1)
    if len(magnitudes) < bands:
        raise EmptyInput(f"need at least {2 * bands} samples for {bands} bands")
    return np.array([np.log(chunk.mean() + LOG_FLOOR)
                     for chunk in np.array_split(magnitudes, bands)])


def zero_bin_fraction(buffer, tolerance=1e-9):
    magnitudes = np.abs(np.fft.rfft(buffer.samples))
    peak = magnitudes.max() if len(magnitudes) else 0.0
    if peak == 0:
        return 1.0
    return float(np.count_nonzero(magnitudes <= tolerance * peak)) / len(magnitudes)


@dataclass
class MockOracleModel:
    templates: dict
    rejection_distance: float
    zero_bin_rejection: float = 0.5
    zero_bin_tolerance: float = 1e-9
    bands: int = 64
    labels: list = field(init=False)

    def __post_init__(self):
        if not self.templates or not all(len(t) for t in self.templates.values()):
            raise EmptyCorpus("every label needs at least one template")
        if self.rejection_distance <= 0:
            raise ValueError("rejection_distance must be positive")
        self.templates = {label: [np.asarray(t, dtype=np.float64) for t in vectors]
                          for label, vectors in self.templates.items()}
        self.labels = sorted(self.templates)
        self._matrix = np.vstack([v for label in self.labels for v in self.templates[label]])
        self._owners = [label for label in self.labels for _ in self.templates[label]]

    def nearest(self, features):
        """Returns ``(label, distance)`` of the closest template."""
        distances = cdist(features[np.newaxis, :], self._matrix)[0]
        index = int(np.argmin(distances))
        return self._owners[index], float(distances[index])

    @property
    def serialize(self):
        return {
            'bands': self.bands,
            'rejection_distance': self.rejection_distance,
            'zero_bin_rejection': self.zero_bin_rejection,
            'zero_bin_tolerance': self.zero_bin_tolerance,
            'templates': {label: [[float(x) for x in v] for v in self.templates[label]]
                          for label in self.labels},
        }

    @classmethod
    def from_dict(cls, data):
        return cls(templates=data['templates'],
                   rejection_distance=data['rejection_distance'],
                   zero_bin_rejection=data.get('zero_bin_rejection', 0.5),
                   zero_bin_tolerance=data.get('zero_bin_tolerance', 1e-9),
                   bands=data.get('bands', 64))

    def save(self, path):
        write_json(path, self.serialize)

    @classmethod
    def load(cls, path):
        return cls.from_dict(read_json(path))

    def __repr__(self):
        return f"<MockOracleModel {len(self.labels)} labels, rejection {self.rejection_distance:.4f}>"


def fit_mock(corpus, config=None):
    """Fits templates on ``(AudioBuffer, label)`` pairs.

    The rejection distance is the configured percentile of the training
    files' nearest-template distances, floored at ``min_rejection_distance``.
    """
    config = config or MockOracleConfig()

    features = defaultdict(list)
    for buffer, label in corpus:
        features[label].append(band_features(buffer, config.bands))
    if not features:
        raise EmptyCorpus()

    templates = {label: [np.mean(vectors, axis=0)] for label, vectors in features.items()}
    model = MockOracleModel(templates, rejection_distance=1.0,
                            zero_bin_rejection=config.zero_bin_rejection,
                            zero_bin_tolerance=config.zero_bin_tolerance,
                            bands=config.bands)

    distances = [model.nearest(vector)[1] for vectors in features.values() for vector in vectors]
    model.rejection_distance = max(float(np.percentile(distances, config.percentile)),
                                   config.min_rejection_distance)

    logger.info(f"Fitted mock oracle on {len(distances)} files, {len(templates)} labels, "
                f"rejection distance {model.rejection_distance:.4f}")
    return model


class MockOracle(TranscriptionOracle):
    def __init__(self, model, name="mock"):
        self.model = model
        self.name = name

    def transcribe(self, buffer):
        model = self.model
        if zero_bin_fraction(buffer, model.zero_bin_tolerance) > model.zero_bin_rejection:
            return Transcript("")

        label, distance = model.nearest(band_features(buffer, model.bands))
        if distance > model.rejection_distance:
            return Transcript("")
        return Transcript(label)
