import numpy as np
import pytest

from configs import DIGITS, NoiseSweepConfig, SearchConfig
from spectral_captcha.asr import Transcript, TranscriptionOracle, transcribe
from spectral_captcha.audio import AudioBuffer, concatenate, silence
from spectral_captcha.breaker import (
    UNMAPPED, StatMap, adaptive_transcribe, break_probability, noise_sweep_variants,
    phonetic_map, run_breaker, segment_bounds, segment_challenge, statistical_map_update,
    transfer_failure_probability
)
from spectral_captcha.craft import craft_kenansville, craft_yeehaw
from spectral_captcha.exceptions import NoSegmentsFound, RemoteUnavailable
from spectral_captcha.models import CaptchaChallenge
from tests.conftest import (
    FailingOracle, ScriptedOracle, harmonic_clip, small_sweep, two_tone_clip
)

ATTACK_SWEEP = NoiseSweepConfig(min_fraction=1e-5, max_fraction=0.2, amplitude_count=8,
                                realizations_per_amplitude=2, base_seed=5)


class FlakyOracle(TranscriptionOracle):
    """Fails its first ``failures`` calls, then always answers ``text``."""
    name = "flaky"

    def __init__(self, failures, text):
        self.failures = failures
        self.text = text

    def transcribe(self, buffer):
        if self.failures:
            self.failures -= 1
            raise RemoteUnavailable()
        return Transcript(self.text)


def challenge_of(labels, gap_ms=500):
    clips = [harmonic_clip(DIGITS.index(label), seed=i) for i, label in enumerate(labels)]
    audio, bounds = concatenate([silence(200)] + clips + [silence(200)], gap_ms)
    return CaptchaChallenge(audio, list(labels), bounds[1:-1]), bounds[1:-1]


def test_default_sweep_size():
    variants = noise_sweep_variants(harmonic_clip(0), NoiseSweepConfig())
    assert (len(variants) == 230)


def test_default_sweep_is_log_spaced():
    amplitudes = NoiseSweepConfig().amplitudes()
    ratios = amplitudes[1:] / amplitudes[:-1]

    assert (amplitudes[0] == pytest.approx(1e-5))
    assert (amplitudes[-1] == pytest.approx(0.2))
    assert (np.allclose(ratios, ratios[0]))


def test_sweep_variants_are_deterministic():
    clip = harmonic_clip(1)
    first = noise_sweep_variants(clip, small_sweep())
    second = noise_sweep_variants(clip, small_sweep())
    assert (all(np.array_equal(a.samples, b.samples) for a, b in zip(first, second)))


def test_adaptive_transcribe_ties_go_to_the_first_seen():
    oracle = ScriptedOracle(["", "two", "too", "too", "two"])
    transcript = adaptive_transcribe(oracle, harmonic_clip(2), small_sweep(amplitude_count=2))
    assert (transcript.text == "two")


def test_adaptive_transcribe_takes_the_mode():
    oracle = ScriptedOracle(["", "tree", "three", "three", "three"])
    transcript = adaptive_transcribe(oracle, harmonic_clip(3), small_sweep(amplitude_count=2))
    assert (transcript.text == "three")


def test_adaptive_transcribe_all_empty():
    oracle = ScriptedOracle([""])
    rows = []
    transcript = adaptive_transcribe(oracle, harmonic_clip(3), small_sweep(), rows)

    assert (transcript.is_empty)
    assert (len(rows) == 1 + small_sweep().total)
    assert (rows[0]['noise_fraction'] == 0.0)
    assert (rows[0]['rmse'] == 0.0)


def test_adaptive_transcribe_tolerates_some_failures():
    transcript = adaptive_transcribe(FlakyOracle(2, "four"), harmonic_clip(4), small_sweep())
    assert (transcript.text == "four")
    assert (transcript.error == "remote-unavailable")


def test_adaptive_transcribe_all_failing():
    with pytest.raises(RemoteUnavailable):
        adaptive_transcribe(FailingOracle(RemoteUnavailable()), harmonic_clip(4), small_sweep())


def test_noise_undoes_kenansville_but_not_yeehaw(two_tone_oracle):
    cfg = SearchConfig(tolerance=1 / 256)
    recovered = {"kenansville": 0, "yeehaw": 0}

    for index, label in enumerate(DIGITS):
        clip = two_tone_clip(index, seed=index)
        kenansville = craft_kenansville(clip, label, two_tone_oracle, cfg)
        yeehaw = craft_yeehaw(clip, two_tone_oracle, 0.1, ATTACK_SWEEP, cfg, original_label=label)
        assert (kenansville.success and yeehaw.success)
        assert (transcribe(two_tone_oracle, kenansville.perturbed).is_empty)

        for name, result in (("kenansville", kenansville), ("yeehaw", yeehaw)):
            if adaptive_transcribe(two_tone_oracle, result.perturbed, ATTACK_SWEEP).text == label:
                recovered[name] += 1

    assert (recovered["kenansville"] >= 9)
    assert (recovered["yeehaw"] == 0)


def test_segmentation_finds_every_utterance():
    challenge, truth = challenge_of(["one", "five", "nine", "two", "two", "seven"])
    bounds = segment_bounds(challenge.audio)
    tolerance = 800  # 50 ms

    assert (len(bounds) == 6)
    for (start, end), (want_start, want_end) in zip(bounds, truth):
        assert (abs(start - want_start) <= tolerance)
        assert (abs(end - want_end) <= tolerance)
    assert (len(segment_challenge(challenge.audio)) == 6)


def test_segmentation_merges_short_gaps():
    challenge, _ = challenge_of(["one", "two"], gap_ms=100)
    assert (len(segment_bounds(challenge.audio)) == 1)


def test_segmentation_of_silence():
    with pytest.raises(NoSegmentsFound):
        segment_bounds(silence(1000))
    with pytest.raises(NoSegmentsFound):
        segment_bounds(AudioBuffer(np.zeros(0)))


def test_segmentation_drops_short_blips():
    t = np.arange(640) / 16000
    blip = AudioBuffer(0.5 * np.sin(2 * np.pi * 440 * t))
    audio, _ = concatenate([silence(300), blip, silence(300)])
    with pytest.raises(NoSegmentsFound):
        segment_bounds(audio)


@pytest.mark.parametrize("transcript, label, distance", [
    ("too", "two", 0),
    ("to", "two", 0),
    ("won", "one", 0),
    ("ate", "eight", 0),
    ("free", "three", 1),
    ("tree", "three", 1),
    ("2", "two", 0),
    ("FOR", "four", 0),
])
def test_phonetic_map(dictionary, transcript, label, distance):
    match = phonetic_map(transcript, DIGITS, dictionary)
    assert (match.label == label)
    assert (match.distance == distance)


@pytest.mark.parametrize("numeral", range(10))
def test_phonetic_map_reads_numerals(dictionary, numeral):
    match = phonetic_map(str(numeral), DIGITS, dictionary)
    assert (match.label == DIGITS[numeral])
    assert (match.distance == 0)


def test_phonetic_map_unmappable(dictionary):
    assert (phonetic_map("", DIGITS, dictionary) is None)
    assert (phonetic_map("xyzzy", DIGITS, dictionary) is None)


def test_phonetic_map_ties_go_to_the_first_label(dictionary):
    assert (phonetic_map("too", ["to", "two"], dictionary).label == "to")
    assert (phonetic_map("too", ["two", "to"], dictionary).label == "two")
    assert (phonetic_map("bed", ["cat", "bat"], dictionary).label == "bat")


def test_phonetic_map_skips_unknown_labels(dictionary):
    assert (phonetic_map("too", ["xyzzy", "two"], dictionary).label == "two")


def test_phonetic_map_needs_a_vocabulary(dictionary):
    with pytest.raises(ValueError):
        phonetic_map("two", [], dictionary)


def test_stat_map_needs_support():
    stat_map = StatMap(min_support=3)
    for _ in range(2):
        statistical_map_update(stat_map, "free", "three")
    assert (stat_map.lookup("free") is None)

    statistical_map_update(stat_map, "Free ", "three")
    assert (stat_map.lookup("free") == "three")


def test_stat_map_ties_are_ambiguous():
    stat_map = StatMap(min_support=1)
    stat_map.update("tree", "three")
    stat_map.update("tree", "two")
    assert (stat_map.lookup("tree") is None)


def test_stat_map_ignores_empty_observations():
    stat_map = StatMap(min_support=1)
    stat_map.update("  ", "one")
    assert (len(stat_map.counts) == 0)


def test_stat_map_survives_serialization():
    stat_map = StatMap(min_support=2)
    stat_map.update("won", "one")
    stat_map.update("won", "one")
    restored = StatMap.from_dict(stat_map.serialize)

    assert (restored.lookup("won") == "one")
    restored.update("won", "one")
    assert (restored.counts["won"]["one"] == 3)


def test_break_probabilities():
    assert (break_probability(0.51, 6) == pytest.approx(0.51 ** 6))
    assert (break_probability(0.41, 6) == pytest.approx(0.41 ** 6))
    assert (transfer_failure_probability(0.81, 6) == pytest.approx(0.19 ** 6))
    assert (break_probability(1.0, 10) == 1.0)


@pytest.mark.parametrize("rate, length", [(1.2, 6), (-0.1, 6), (0.5, 0), (0.5, 2.5)])
def test_break_probability_rejects_bad_input(rate, length):
    with pytest.raises(ValueError):
        break_probability(rate, length)
    with pytest.raises(ValueError):
        transfer_failure_probability(rate, length)


def test_run_breaker_maps_homophones(dictionary):
    challenge, _ = challenge_of(["two", "two", "two"])
    sweep = small_sweep()
    report = run_breaker(challenge, ScriptedOracle(["too"]), dictionary, DIGITS, sweep=sweep)

    assert (report.success)
    assert (report.answer == "two two two")
    assert ([s.mapping for s in report.segments] == ["phonetic"] * 3)
    assert (report.oracle_queries == 3 * (1 + sweep.total))
    assert (report.errors == [])


def test_run_breaker_learns_from_feedback(dictionary):
    challenge, _ = challenge_of(["three", "three", "three"])
    stat_map = StatMap(min_support=3)
    oracle = ScriptedOracle(["cat"])

    first = run_breaker(challenge, oracle, dictionary, DIGITS, stat_map, small_sweep(), feedback=True)
    assert (not first.success)

    second = run_breaker(challenge, oracle, dictionary, DIGITS, stat_map, small_sweep())
    assert (second.success)
    assert ([s.mapping for s in second.segments] == ["statistical"] * 3)


def test_run_breaker_marks_unmapped_segments(dictionary):
    challenge, _ = challenge_of(["one", "two"])
    report = run_breaker(challenge, ScriptedOracle([""]), dictionary, DIGITS, sweep=small_sweep())

    assert (report.answer == f"{UNMAPPED} {UNMAPPED}")
    assert (not report.success)
    assert (report.mapped_labels == [None, None])


def test_run_breaker_records_oracle_failures(dictionary):
    challenge, _ = challenge_of(["one"])
    report = run_breaker(challenge, FailingOracle(RemoteUnavailable()), dictionary, DIGITS,
                         sweep=small_sweep())

    assert (not report.success)
    assert (report.errors == ["remote-unavailable"])
    assert (report.segments[0].error == "remote-unavailable")


def test_run_breaker_on_silence(dictionary):
    challenge = CaptchaChallenge(silence(1000), ["one"], [(0, 4800)])
    report = run_breaker(challenge, ScriptedOracle(["one"]), dictionary, DIGITS, sweep=small_sweep())

    assert (not report.success)
    assert (report.errors == ["no-segments-found"])
    assert (report.oracle_queries == 0)
