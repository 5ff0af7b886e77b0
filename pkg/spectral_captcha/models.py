from dataclasses import dataclass, field
from typing import List, Optional, Tuple

from spectral_captcha.audio import AudioBuffer


@dataclass
class TraceEntry:
    parameter: float
    transcript: str
    passed: bool
    queries: int = 1
    # Sweep position of the first variant that was not transcribed as empty.
    failing_variant: Optional[Tuple[int, int]] = None

    @property
    def serialize(self):
        return {
            'parameter': self.parameter,
            'transcript': self.transcript,
            'passed': self.passed,
            'queries': self.queries,
            'failing_variant': list(self.failing_variant) if self.failing_variant else None,
        }

    @classmethod
    def from_dict(cls, data):
        failing = data.get('failing_variant')
        return cls(data['parameter'], data['transcript'], data['passed'],
                   data.get('queries', 1), tuple(failing) if failing else None)


@dataclass
class CraftResult:
    perturbed: AudioBuffer
    t_d_frac: float
    alpha: float
    distortion_rmse: float
    oracle_queries: int
    success: bool
    trace: List[TraceEntry] = field(default_factory=list)
    algorithm: str = "yeehaw"
    label: Optional[str] = None
    alpha_fraction: float = 0.0
    oracle: str = "mock"
    sweep: Optional[dict] = None
    seed: Optional[int] = None
    file: Optional[str] = None

    @property
    def serialize(self):
        """Return object data in easily serializeable format"""
        return {
            'file': self.file,
            'seed': self.seed,
            'algorithm': self.algorithm,
            'label': self.label,
            'oracle': self.oracle,
            't_d_frac': self.t_d_frac,
            'alpha': self.alpha,
            'alpha_fraction': self.alpha_fraction,
            'distortion_rmse': self.distortion_rmse,
            'oracle_queries': self.oracle_queries,
            'success': self.success,
            'sample_rate': self.perturbed.sample_rate,
            'samples': len(self.perturbed),
            'sweep': self.sweep,
            'trace': [entry.serialize for entry in self.trace],
        }

    @classmethod
    def from_dict(cls, data, perturbed):
        return cls(perturbed=perturbed,
                   t_d_frac=data['t_d_frac'],
                   alpha=data['alpha'],
                   distortion_rmse=data['distortion_rmse'],
                   oracle_queries=data['oracle_queries'],
                   success=data['success'],
                   trace=[TraceEntry.from_dict(entry) for entry in data.get('trace', [])],
                   algorithm=data.get('algorithm', 'yeehaw'),
                   label=data.get('label'),
                   alpha_fraction=data.get('alpha_fraction', 0.0),
                   oracle=data.get('oracle', 'mock'),
                   sweep=data.get('sweep'),
                   seed=data.get('seed'),
                   file=data.get('file'))

    def __repr__(self):
        return (f"<CraftResult {self.algorithm} label={self.label} success={self.success} "
                f"T_d={self.t_d_frac:.4f} alpha={self.alpha:.4f} rmse={self.distortion_rmse:.5f}>")


@dataclass
class CaptchaChallenge:
    audio: AudioBuffer
    answer: List[str]
    boundaries: List[Tuple[int, int]]
    seed: int = 0
    sources: List[str] = field(default_factory=list)

    def __post_init__(self):
        if len(self.answer) != len(self.boundaries):
            raise ValueError("a challenge needs exactly one answer token per segment")
        previous_end = 0
        for start, end in self.boundaries:
            if not (previous_end <= start < end <= len(self.audio)):
                raise ValueError(f"segment boundaries out of order: {self.boundaries}")
            previous_end = end

    @property
    def serialize(self):
        return {
            'answer': list(self.answer),
            'boundaries': [[start, end] for start, end in self.boundaries],
            'sample_rate': self.audio.sample_rate,
            'samples': len(self.audio),
            'seed': self.seed,
            'sources': list(self.sources),
        }

    @classmethod
    def from_dict(cls, data, audio):
        return cls(audio=audio,
                   answer=list(data['answer']),
                   boundaries=[tuple(bounds) for bounds in data['boundaries']],
                   seed=data.get('seed', 0),
                   sources=list(data.get('sources', [])))


@dataclass
class SegmentReport:
    index: int
    bounds: Tuple[int, int]
    transcript: str
    mapped: Optional[str]
    mapping: str
    phonetic_distance: Optional[int] = None
    error: Optional[str] = None

    @property
    def serialize(self):
        return {
            'index': self.index,
            'bounds': list(self.bounds),
            'transcript': self.transcript,
            'mapped': self.mapped,
            'mapping': self.mapping,
            'phonetic_distance': self.phonetic_distance,
            'error': self.error,
        }


@dataclass
class BreakerReport:
    segments: List[SegmentReport]
    answer: str
    success: bool
    oracle_queries: int
    expected: List[str] = field(default_factory=list)
    errors: List[str] = field(default_factory=list)

    @property
    def mapped_labels(self):
        return [segment.mapped for segment in self.segments]

    @property
    def serialize(self):
        return {
            'answer': self.answer,
            'expected': list(self.expected),
            'success': self.success,
            'oracle_queries': self.oracle_queries,
            'segments': [segment.serialize for segment in self.segments],
            'errors': list(self.errors),
        }
