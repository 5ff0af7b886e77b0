"""Transcription oracles.

An oracle is any object with ``name`` and ``transcribe(buffer) -> Transcript``.
Call oracles through :func:`transcribe` so queries are counted in one place.
"""
from dataclasses import dataclass, field
from typing import Optional

from prometheus_client import Counter, Summary

from spectral_captcha.exceptions import EmptyInput, OracleError, UsageError
from spectral_captcha.utils import setup_logger

logger = setup_logger('asr_logger')

# Metrics
queries_counter = Counter('oracle_queries_total', 'Number of oracle transcriptions', ['oracle'])
failures_counter = Counter('oracle_failures_total', 'Number of failed oracle transcriptions', ['oracle'])
latency_summary = Summary('oracle_request_latency_seconds', 'Time spent waiting on an oracle')


@dataclass(frozen=True)
class Transcript:
    text: str = ""
    error: Optional[str] = None
    is_empty: bool = field(init=False)

    def __post_init__(self):
        text = " ".join((self.text or "").split())
        object.__setattr__(self, 'text', text)
        object.__setattr__(self, 'is_empty', text == "")

    @property
    def serialize(self):
        payload = {'text': self.text, 'is_empty': self.is_empty}
        if self.error:
            payload['error'] = self.error
        return payload


class TranscriptionOracle:
    name = "oracle"

    def transcribe(self, buffer):  # pragma: no cover
        raise NotImplementedError


def transcribe(oracle, buffer):
    name = getattr(oracle, 'name', type(oracle).__name__)
    queries_counter.labels(oracle=name).inc()
    with latency_summary.time():
        try:
            transcript = oracle.transcribe(buffer)
        except OracleError:
            failures_counter.labels(oracle=name).inc()
            raise

    if isinstance(transcript, str):
        transcript = Transcript(transcript)
    return transcript


def transcribe_segmented(oracle, segments):
    """One transcript per segment, in order.

    A failing segment yields an empty transcript carrying the error code
    rather than aborting the rest of the batch.
    """
    if not segments:
        raise EmptyInput("transcribe_segmented needs at least one segment")

    transcripts = []
    for index, segment in enumerate(segments):
        try:
            transcripts.append(transcribe(oracle, segment))
        except OracleError as e:
            logger.error(f"segment {index}: {e.code}: {e.message}")
            transcripts.append(Transcript("", error=e.code))
    return transcripts


def load_oracle(config, corpus=None):
    """Builds the oracle an :class:`configs.OracleConfig` describes.

    A mock oracle is loaded from ``mock.model_path`` when set, otherwise fit
    on ``corpus`` (an iterable of ``(AudioBuffer, label)``).
    """
    from spectral_captcha.asr.mock import MockOracle, MockOracleModel, fit_mock
    from spectral_captcha.asr.remote import RemoteOracle

    if config.kind == "remote":
        return RemoteOracle(config.remote, name=config.name)

    if config.mock.model_path:
        return MockOracle(MockOracleModel.load(config.mock.model_path), name=config.name)
    if corpus is None:
        raise UsageError("a mock oracle needs either oracle.mock.model_path or a corpus")
    return MockOracle(fit_mock(corpus, config.mock), name=config.name)
