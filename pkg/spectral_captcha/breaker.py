"""The adaptive adversary: an attacker who knows how challenges are made.

Spectral zeroing is partly undone by adding a little noise back, so every
segment is transcribed clean and under a full noise sweep, and the most
common non-empty transcript wins. Wrong transcripts are then resolved to
vocabulary labels, first through a learned table of recurring mistakes and
then by phonetic similarity.
"""
import threading
from collections import Counter, defaultdict
from dataclasses import dataclass, field

import numpy as np

from configs import DIGITS, NoiseSweepConfig, SegmentationConfig
from spectral_captcha.asr import Transcript, transcribe
from spectral_captcha.audio import AudioBuffer, rmse
from spectral_captcha.craft import verify_answer
from spectral_captcha.exceptions import NoSegmentsFound, OracleError, OutOfVocabulary
from spectral_captcha.models import BreakerReport, SegmentReport
from spectral_captcha.perturb import sweep_variants
from spectral_captcha.phonetics import phonetic_distance, to_phonemes
from spectral_captcha.utils import normalize_text, setup_logger

logger = setup_logger('breaker_logger')

# Answer token for a segment nothing could be mapped to.
UNMAPPED = "_"

NUMERALS = {str(i): word for i, word in enumerate(DIGITS)}


def noise_sweep_variants(buffer, sweep):
    return [noised for _, _, _, _, noised in sweep_variants(buffer, sweep)]


def adaptive_transcribe(oracle, buffer, sweep, rows=None):
    """Modal non-empty transcript over the clean buffer and every sweep variant.

    Ties go to the transcript first seen, i.e. the one at the smallest noise
    amplitude and then the lowest realization; the clean buffer counts as
    amplitude zero. ``rows``, when given, collects one dict per query.
    Oracle failures are tolerated as long as at least one query succeeds.
    """
    candidates = [(0.0, 0, buffer)]
    candidates += [(fraction, realization, noised)
                   for _, realization, fraction, _, noised in sweep_variants(buffer, sweep)]

    counts, first_seen, failures = Counter(), {}, []
    for order, (fraction, realization, audio) in enumerate(candidates):
        try:
            transcript = transcribe(oracle, audio)
        except OracleError as e:
            failures.append(e)
            transcript = Transcript("", error=e.code)

        if rows is not None:
            rows.append({'noise_fraction': fraction, 'realization': realization,
                         'rmse': rmse(buffer, audio), 'transcript': transcript.text,
                         'error': transcript.error})
        if not transcript.is_empty:
            counts[transcript.text] += 1
            first_seen.setdefault(transcript.text, order)

    if len(failures) == len(candidates):
        raise failures[0]

    error = failures[0].code if failures else None
    if not counts:
        return Transcript("", error=error)
    text = max(counts, key=lambda t: (counts[t], -first_seen[t]))
    return Transcript(text, error=error)


def segment_bounds(audio, config=None):
    """Energy-based voice activity segmentation.

    A frame is voiced when its RMS reaches ``voiced_ratio`` of the loudest
    frame. Voiced runs closer than ``min_gap_ms`` are merged and segments
    shorter than ``min_segment_ms`` dropped. Returns ``(start, end)`` sample
    ranges.
    """
    config = config or SegmentationConfig()
    if len(audio) == 0:
        raise NoSegmentsFound("cannot segment an empty buffer")

    rate = audio.sample_rate
    frame = max(1, int(round(config.frame_ms * rate / 1000)))
    hop = max(1, int(round(config.hop_ms * rate / 1000)))
    min_gap = config.min_gap_ms * rate / 1000
    min_length = config.min_segment_ms * rate / 1000

    starts = np.arange(0, max(len(audio) - frame, 0) + 1, hop)
    energy = np.array([np.sqrt(np.mean(audio.samples[s:s + frame] ** 2)) for s in starts])
    if energy.max() == 0:
        raise NoSegmentsFound("the audio is silent")
    voiced = energy >= config.voiced_ratio * energy.max()

    runs = []
    for index in np.flatnonzero(voiced):
        start, end = int(starts[index]), min(int(starts[index]) + frame, len(audio))
        if runs and start - runs[-1][1] < min_gap:
            runs[-1][1] = max(runs[-1][1], end)
        else:
            runs.append([start, end])

    bounds = [(start, end) for start, end in runs if end - start >= min_length]
    if not bounds:
        raise NoSegmentsFound(f"no voiced run reaches {config.min_segment_ms} ms")
    return bounds


def segment_challenge(audio, config=None):
    return [AudioBuffer(audio.samples[start:end], audio.sample_rate)
            for start, end in segment_bounds(audio, config)]


@dataclass(frozen=True)
class PhoneticMatch:
    label: str
    distance: int


def phonetic_map(transcript, vocabulary, dictionary):
    """The vocabulary label that sounds closest to ``transcript``.

    Returns a :class:`PhoneticMatch`, or None for an empty or out-of-vocabulary
    transcript. Ties go to the label listed first.
    """
    if not vocabulary:
        raise ValueError("phonetic_map needs a non-empty vocabulary")

    words = [NUMERALS.get(word, word) for word in normalize_text(transcript)]
    if not words:
        return None
    text = " ".join(words)
    try:
        to_phonemes(dictionary, text)
    except OutOfVocabulary:
        return None

    best = None
    for label in vocabulary:
        try:
            distance = phonetic_distance(text, label, dictionary)
        except OutOfVocabulary:
            logger.warning(f"vocabulary label {label!r} is not in the dictionary")
            continue
        if best is None or distance < best.distance:
            best = PhoneticMatch(label, distance)
    return best


@dataclass
class StatMap:
    """Learned table of recurring transcripts and the labels they stand for."""
    min_support: int = 3
    counts: dict = field(default_factory=lambda: defaultdict(Counter))

    def __post_init__(self):
        self._lock = threading.Lock()
        self.counts = defaultdict(Counter, {key: Counter(value) for key, value in self.counts.items()})

    @staticmethod
    def key(observed):
        return " ".join(normalize_text(observed))

    def update(self, observed, truth):
        key = self.key(observed)
        if not key:
            return
        with self._lock:
            self.counts[key][truth] += 1

    def lookup(self, observed):
        with self._lock:
            ranked = self.counts.get(self.key(observed), Counter()).most_common(2)
        if not ranked or ranked[0][1] < self.min_support:
            return None
        if len(ranked) == 2 and ranked[1][1] == ranked[0][1]:
            return None
        return ranked[0][0]

    @property
    def serialize(self):
        return {
            'min_support': self.min_support,
            'counts': {key: dict(sorted(labels.items())) for key, labels in sorted(self.counts.items())},
        }

    @classmethod
    def from_dict(cls, data):
        return cls(min_support=data.get('min_support', 3), counts=data.get('counts', {}))


def statistical_map_update(stat_map, observed, truth):
    stat_map.update(observed, truth)
    return stat_map


def _check_probability(value, name):
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {value}")


def _check_length(length):
    if int(length) != length or length < 1:
        raise ValueError(f"captcha_length must be a positive integer, got {length}")


def break_probability(per_label_success, captcha_length):
    """Chance of solving a whole challenge when each label is solved independently."""
    _check_probability(per_label_success, "per_label_success")
    _check_length(captcha_length)
    return per_label_success ** captcha_length


def transfer_failure_probability(per_label_evasion, captcha_length):
    """Chance that no utterance of a challenge evades the adversary's ASR."""
    _check_probability(per_label_evasion, "per_label_evasion")
    _check_length(captcha_length)
    return (1.0 - per_label_evasion) ** captcha_length


def _map_segment(transcript, vocabulary, dictionary, stat_map):
    if transcript.is_empty:
        return None, "none", None
    if stat_map is not None:
        label = stat_map.lookup(transcript.text)
        if label is not None:
            return label, "statistical", None
    match = phonetic_map(transcript.text, vocabulary, dictionary)
    if match is None:
        return None, "none", None
    return match.label, "phonetic", match.distance


def run_breaker(challenge, oracle, dictionary, vocabulary, stat_map=None, sweep=None,
                segmentation=None, feedback=False, rows=None):
    """Segments, transcribes, maps and answers one challenge.

    Per-segment failures are recorded in the report and never abort the
    run. With ``feedback`` the verifier's expected answer is fed back into
    ``stat_map``, the way an attacker learns from solved challenges.
    """
    sweep = sweep or NoiseSweepConfig()
    try:
        bounds = segment_bounds(challenge.audio, segmentation)
    except NoSegmentsFound as e:
        logger.error(f"{e.code}: {e.message}")
        return BreakerReport(segments=[], answer="", success=False, oracle_queries=0,
                             expected=list(challenge.answer), errors=[e.code])

    segments = [AudioBuffer(challenge.audio.samples[start:end], challenge.audio.sample_rate)
                for start, end in bounds]
    reports, errors = [], []
    for index, (segment, span) in enumerate(zip(segments, bounds)):
        segment_rows = [] if rows is not None else None
        try:
            transcript = adaptive_transcribe(oracle, segment, sweep, segment_rows)
        except OracleError as e:
            logger.error(f"segment {index}: {e.code}: {e.message}")
            transcript = Transcript("", error=e.code)
        if transcript.error:
            errors.append(transcript.error)
        if rows is not None:
            rows.extend(dict(row, segment=index) for row in segment_rows)

        mapped, mapping, distance = _map_segment(transcript, vocabulary, dictionary, stat_map)
        reports.append(SegmentReport(index=index, bounds=span, transcript=transcript.text,
                                     mapped=mapped, mapping=mapping, phonetic_distance=distance,
                                     error=transcript.error))

    answer = " ".join(report.mapped or UNMAPPED for report in reports)
    success = verify_answer(challenge, answer)

    if feedback and stat_map is not None and len(reports) == len(challenge.answer):
        for report, truth in zip(reports, challenge.answer):
            statistical_map_update(stat_map, report.transcript, truth)

    logger.info(f"breaker answered {answer!r} for {len(reports)} segments: "
                f"{'solved' if success else 'failed'}")
    return BreakerReport(segments=reports, answer=answer, success=success,
                         oracle_queries=len(segments) * (1 + sweep.total),
                         expected=list(challenge.answer), errors=errors)
