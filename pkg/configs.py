import dataclasses
import os
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
import yaml

from spectral_captcha.exceptions import UsageError


asr_api_token = os.environ.get('ASR_API_TOKEN')
oracle_api_key = os.environ.get('ORACLE_API_KEY')
mock_oracle_model = os.environ.get('MOCK_ORACLE_MODEL')

DIGITS = ["zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine"]


@dataclass
class SearchConfig:
    # Bounds are fractions: of the maximum bin magnitude for T_d, and of the
    # decimated spectrum's maximum for alpha.
    lo: float = 0.0
    hi: float = 1.0
    tolerance: float = 1 / 256
    max_iterations: int = 32

    def validate(self):
        if not self.lo < self.hi:
            raise UsageError("search.lo must be smaller than search.hi")
        if self.tolerance <= 0:
            raise UsageError("search.tolerance must be positive")
        if self.max_iterations < 1:
            raise UsageError("search.max_iterations must be at least 1")


@dataclass
class NoiseSweepConfig:
    min_fraction: float = 0.00001
    max_fraction: float = 0.20
    amplitude_count: int = 46
    realizations_per_amplitude: int = 5
    base_seed: int = 0

    @property
    def total(self):
        return self.amplitude_count * self.realizations_per_amplitude

    def amplitudes(self):
        if self.amplitude_count == 1:
            return np.array([self.min_fraction], dtype=np.float64)
        return np.geomspace(self.min_fraction, self.max_fraction, self.amplitude_count)

    def validate(self):
        if self.amplitude_count < 1 or self.realizations_per_amplitude < 1:
            raise UsageError("sweep counts must be at least 1")
        if self.min_fraction < 0 or self.max_fraction < self.min_fraction:
            raise UsageError("sweep fractions must satisfy 0 <= min_fraction <= max_fraction")
        if self.amplitude_count > 1 and self.min_fraction == 0:
            raise UsageError("a log-spaced sweep needs sweep.min_fraction > 0")


@dataclass
class PerturbationParams:
    decimation_fraction: float = 0.02
    clip_alpha: float = 0.0
    noise_std_fraction: float = 0.0
    rng_seed: int = 0
    randomize_decimation: bool = False
    decimation_range: Tuple[float, float] = (0.0, 0.05)

    def validate(self):
        if not 0.0 <= self.decimation_fraction <= 1.0:
            raise UsageError("perturbation.decimation_fraction must lie in [0, 1]")
        if self.clip_alpha < 0 or self.noise_std_fraction < 0:
            raise UsageError("perturbation.clip_alpha and noise_std_fraction must be >= 0")
        lo, hi = self.decimation_range
        if not 0.0 <= lo <= hi <= 1.0:
            raise UsageError("perturbation.decimation_range must be an ordered pair in [0, 1]")


@dataclass
class SegmentationConfig:
    frame_ms: float = 25.0
    hop_ms: float = 10.0
    voiced_ratio: float = 0.05
    min_gap_ms: float = 200.0
    min_segment_ms: float = 100.0


@dataclass
class MockOracleConfig:
    bands: int = 64
    percentile: float = 99.0
    min_rejection_distance: float = 1.0
    zero_bin_rejection: float = 0.5
    zero_bin_tolerance: float = 1e-9
    model_path: Optional[str] = None


@dataclass
class RemoteOracleConfig:
    endpoint: Optional[str] = None
    token: Optional[str] = asr_api_token
    timeout_ms: int = 10000
    max_retries: int = 3
    min_interval_ms: int = 0
    backoff_ms: int = 500
    cache_path: Optional[str] = None
    content_type: str = "audio/wav"
    transcript_key: str = "data.transcript"

    def validate(self):
        if not self.endpoint:
            raise UsageError("oracle.remote.endpoint is required for a remote oracle")
        if self.timeout_ms <= 0:
            raise UsageError("oracle.remote.timeout_ms must be positive")
        if self.max_retries < 0:
            raise UsageError("oracle.remote.max_retries must be >= 0")


@dataclass
class OracleConfig:
    name: str = "mock"
    kind: str = "mock"
    mock: MockOracleConfig = field(default_factory=MockOracleConfig)
    remote: RemoteOracleConfig = field(default_factory=RemoteOracleConfig)

    def validate(self):
        if self.kind not in ("mock", "remote"):
            raise UsageError(f"oracle.kind must be 'mock' or 'remote', not {self.kind!r}")
        if self.kind == "remote":
            self.remote.validate()


@dataclass
class DetectConfig:
    frame_sizes: Tuple[int, ...] = (256, 512, 1024)
    bands: int = 32
    center_rule: str = "medoid"
    noise_dir: Optional[str] = None
    captcha_dir: Optional[str] = None
    eval_dir: Optional[str] = None

    def validate(self):
        if self.center_rule not in ("medoid", "minimax"):
            raise UsageError("detect.center_rule must be 'medoid' or 'minimax'")


@dataclass
class ServerConfig:
    api_key: Optional[str] = oracle_api_key
    model_path: Optional[str] = mock_oracle_model
    default_limits: List[str] = field(default_factory=lambda: ["6000 per hour", "300 per minute"])
    max_content_length: int = 16 * 1024 * 1024


@dataclass
class RunConfig:
    corpus_dir: Optional[str] = None
    manifest: Optional[str] = None
    output_dir: str = "results"
    dictionary: Optional[str] = None
    vocabulary: List[str] = field(default_factory=lambda: list(DIGITS))
    seed: int = 0
    workers: int = 1
    gap_ms: int = 500
    captcha_length: int = 6
    min_support: int = 3
    oracle: OracleConfig = field(default_factory=OracleConfig)
    # Extra oracles the report evaluates crafted audio against.
    oracles: List[OracleConfig] = field(default_factory=list)
    perturbation: PerturbationParams = field(default_factory=PerturbationParams)
    search: SearchConfig = field(default_factory=SearchConfig)
    sweep: NoiseSweepConfig = field(default_factory=NoiseSweepConfig)
    segmentation: SegmentationConfig = field(default_factory=SegmentationConfig)
    detect: DetectConfig = field(default_factory=DetectConfig)
    server: ServerConfig = field(default_factory=ServerConfig)

    def validate(self):
        for path in (self.corpus_dir, self.manifest, self.dictionary):
            if path and not os.path.exists(path):
                raise UsageError(f"configured path does not exist: {path}")
        if self.workers < 1:
            raise UsageError("workers must be at least 1")
        if self.captcha_length < 1:
            raise UsageError("captcha_length must be at least 1")
        for oracle in [self.oracle, *self.oracles]:
            oracle.validate()
        self.perturbation.validate()
        self.search.validate()
        self.sweep.validate()
        self.detect.validate()
        return self


def build(cls, data):
    """Builds dataclass ``cls`` from a nested dict, rejecting unknown keys."""
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise UsageError(f"expected a mapping for {cls.__name__}, got {data!r}")

    known = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(data) - set(known)
    if unknown:
        raise UsageError(f"unknown {cls.__name__} keys: {', '.join(sorted(unknown))}")

    kwargs = {}
    for name, value in data.items():
        default = known[name].default_factory() if known[name].default_factory \
            is not dataclasses.MISSING else known[name].default
        if dataclasses.is_dataclass(default):
            kwargs[name] = build(type(default), value)
        elif name == "oracles":
            kwargs[name] = [build(OracleConfig, item) for item in value or []]
        elif isinstance(default, tuple) and value is not None:
            kwargs[name] = tuple(value)
        else:
            kwargs[name] = value
    return cls(**kwargs)


def apply_overrides(raw, overrides):
    """Sets dotted keys (``search.tolerance``) on a raw config mapping.

    Values are parsed as YAML scalars, so ``--workers 4`` yields an int.
    """
    for dotted, value in overrides.items():
        keys = dotted.split('.')
        node = raw
        for key in keys[:-1]:
            node = node.setdefault(key, {})
            if not isinstance(node, dict):
                raise UsageError(f"cannot override {dotted}: {key} is not a section")
        node[keys[-1]] = yaml.safe_load(value) if isinstance(value, str) else value
    return raw


def load_run_config(path=None, overrides=None):
    raw = {}
    if path:
        if not os.path.exists(path):
            raise UsageError(f"config file not found: {path}")
        with open(path, encoding='utf-8') as f:
            try:
                raw = yaml.safe_load(f) or {}
            except yaml.YAMLError as e:
                raise UsageError(f"config file is not valid YAML: {e}")
    apply_overrides(raw, overrides or {})
    return build(RunConfig, raw).validate()
