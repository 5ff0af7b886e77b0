import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from configs import NoiseSweepConfig, PerturbationParams, SearchConfig
from spectral_captcha.asr import transcribe
from spectral_captcha.audio import AudioBuffer
from spectral_captcha.craft import (
    assemble_captcha, binary_search, challenge_labels, craft_kenansville, craft_yeehaw,
    decimation_for, load_challenge, load_result, probe_budget, replay_robust_empty, robust_empty,
    save_challenge, save_result, verify_answer
)
from spectral_captcha.exceptions import (
    EmptyInput, InputUnrecognized, MixedSampleRates, UnsuccessfulResult, UsageError
)
from spectral_captcha.models import CaptchaChallenge, CraftResult, TraceEntry
from spectral_captcha.perturb import alpha_ceiling, perturb_kenansville, perturb_yeehaw
from tests.conftest import (
    PLANTED_N, PlantedClippingOracle, PlantedDecimationOracle, ScriptedOracle, cosines,
    harmonic_clip, small_sweep, two_tone_clip
)

STRONG_BIN, WEAK_BIN = 50, 300
QUIET = NoiseSweepConfig(min_fraction=0.0, max_fraction=0.0, amplitude_count=1,
                         realizations_per_amplitude=1)


def threshold_probe(boundary):
    def probe(value):
        return TraceEntry(value, "", value >= boundary)
    return probe


def planted_pair(weak_ratio):
    return cosines(PLANTED_N, [(STRONG_BIN, 0.4), (WEAK_BIN, 0.4 * weak_ratio)])


def test_probe_budget():
    assert (probe_budget(SearchConfig(tolerance=1 / 256)) == 10)
    assert (probe_budget(SearchConfig(tolerance=2.0)) == 3)


def test_binary_search_probes_hi_then_lo():
    outcome = binary_search(threshold_probe(0.3), SearchConfig(tolerance=1 / 64))

    assert (outcome.success)
    assert ([entry.parameter for entry in outcome.trace[:2]] == [1.0, 0.0])
    assert (0.3 <= outcome.value <= 0.3 + 1 / 64)
    assert (outcome.probes <= probe_budget(SearchConfig(tolerance=1 / 64)))


def test_binary_search_infeasible():
    outcome = binary_search(threshold_probe(2.0), SearchConfig())
    assert (not outcome.success)
    assert (outcome.value == 1.0)
    assert (outcome.probes == 1)


def test_binary_search_trivial():
    outcome = binary_search(threshold_probe(0.0), SearchConfig())
    assert (outcome.success)
    assert (outcome.value == 0.0)
    assert (outcome.probes == 2)


def test_binary_search_respects_max_iterations():
    outcome = binary_search(threshold_probe(0.3), SearchConfig(tolerance=1e-9, max_iterations=4))
    assert (outcome.probes == 6)


def test_binary_search_validates_bounds():
    with pytest.raises(UsageError):
        binary_search(threshold_probe(0.3), SearchConfig(lo=0.5, hi=0.5))


@given(st.floats(min_value=0.05, max_value=0.95))
@settings(max_examples=200, deadline=None)
def test_kenansville_finds_the_planted_threshold(weak_ratio):
    cfg = SearchConfig(tolerance=1 / 256)
    oracle = PlantedDecimationOracle("target", WEAK_BIN)
    result = craft_kenansville(planted_pair(weak_ratio), "target", oracle, cfg)

    assert (result.success)
    assert (abs(result.t_d_frac - weak_ratio) <= cfg.tolerance + 1e-9)
    assert (len(result.trace) <= probe_budget(cfg))
    assert (result.oracle_queries == 1 + len(result.trace))
    assert (transcribe(oracle, result.perturbed).text != "target")


@given(st.floats(min_value=0.05, max_value=0.95))
@settings(max_examples=10, deadline=None)
def test_kenansville_agrees_with_a_linear_scan(weak_ratio):
    cfg = SearchConfig(tolerance=1 / 64)
    oracle = PlantedDecimationOracle("target", WEAK_BIN)
    clip = planted_pair(weak_ratio)
    result = craft_kenansville(clip, "target", oracle, cfg)

    grid = np.linspace(0.0, 1.0, 513)
    scanned = next(t for t in grid
                   if transcribe(oracle, perturb_kenansville(clip, t)).text != "target")
    assert (abs(result.t_d_frac - scanned) <= cfg.tolerance)


@given(st.floats(min_value=0.1, max_value=0.45), st.floats(min_value=1.1, max_value=1.9))
@settings(max_examples=200, deadline=None)
def test_yeehaw_finds_the_planted_clipping_value(weak_ratio, rho):
    cfg = SearchConfig(tolerance=1 / 256)
    oracle = PlantedClippingOracle("target", STRONG_BIN, WEAK_BIN, rho)
    result = craft_yeehaw(planted_pair(weak_ratio), oracle, 0.0, QUIET, cfg,
                          original_label="target")
    boundary = 1 - rho * weak_ratio

    assert (result.success)
    assert (abs(result.alpha_fraction - boundary) <= cfg.tolerance + 1e-9)
    assert (result.alpha == pytest.approx(result.alpha_fraction * 0.4 * PLANTED_N / 2))
    assert (len(result.trace) <= probe_budget(cfg))


def test_kenansville_needs_a_recognized_input():
    with pytest.raises(InputUnrecognized):
        craft_kenansville(harmonic_clip(2), "two", ScriptedOracle(["three"]), SearchConfig())


def test_yeehaw_on_silence():
    with pytest.raises(EmptyInput):
        craft_yeehaw(AudioBuffer(np.zeros(1024)), ScriptedOracle([""]), 0.0, QUIET, SearchConfig())


def test_yeehaw_result_is_robustly_empty(two_tone_oracle):
    sweep = small_sweep(max_fraction=0.2, amplitude_count=6)
    clip = two_tone_clip(3)
    result = craft_yeehaw(clip, two_tone_oracle, 0.1, sweep, SearchConfig(tolerance=1 / 64),
                          original_label="three")

    assert (result.success)
    assert (result.label == "three")
    assert (result.sweep['amplitude_count'] == 6)
    assert (replay_robust_empty(result, two_tone_oracle, sweep))
    assert (result.distortion_rmse > 0)


def test_robust_empty_stops_at_first_transcript():
    oracle = ScriptedOracle(["", "", "six"])
    passed, text, queries, failing = robust_empty(oracle, harmonic_clip(6), small_sweep())

    assert (not passed)
    assert (text == "six")
    assert (queries == 3)
    assert (failing == (0, 1))


def test_yeehaw_search_failure_is_reported():
    oracle = ScriptedOracle(["two", "two"])
    result = craft_yeehaw(harmonic_clip(2), oracle, 0.02, small_sweep(), SearchConfig(),
                          original_label="two")
    assert (not result.success)
    assert (result.alpha_fraction == 1.0)


def crafted(label, rate=16000, success=True):
    return CraftResult(perturbed=AudioBuffer(np.full(1600, 0.1), rate), t_d_frac=0.02, alpha=1.0,
                       distortion_rmse=0.01, oracle_queries=5, success=success, label=label)


def test_assemble_captcha():
    challenge = assemble_captcha([(crafted("one"), "one"), (crafted("two"), "two")], gap_ms=500, seed=4)

    assert (challenge.answer == ["one", "two"])
    assert (challenge.boundaries == [(0, 1600), (9600, 11200)])
    assert (len(challenge.audio) == 11200)
    assert (challenge.seed == 4)


def test_assemble_rejects_failed_results():
    with pytest.raises(UnsuccessfulResult):
        assemble_captcha([(crafted("one"), "one"), (crafted("two", success=False), "two")])


def test_assemble_rejects_mixed_rates():
    with pytest.raises(MixedSampleRates):
        assemble_captcha([(crafted("one"), "one"), (crafted("two", rate=8000), "two")])


def test_assemble_needs_results():
    with pytest.raises(EmptyInput):
        assemble_captcha([])


def test_challenge_boundaries_must_be_ordered():
    with pytest.raises(ValueError):
        CaptchaChallenge(AudioBuffer(np.zeros(100)), ["a", "b"], [(50, 80), (10, 20)])


def test_verify_answer():
    challenge = assemble_captcha([(crafted("one"), "One"), (crafted("two"), "two")])

    assert (verify_answer(challenge, "one two"))
    assert (verify_answer(challenge, "  ONE   Two "))
    assert (not verify_answer(challenge, "two one"))
    assert (not verify_answer(challenge, "one"))
    assert (not verify_answer(challenge, "one two three"))


def test_challenge_labels_are_reproducible():
    vocabulary = ["zero", "one", "two"]
    labels = challenge_labels(vocabulary, 6, seed=3)

    assert (len(labels) == 6)
    assert (set(labels) <= set(vocabulary))
    assert (labels == challenge_labels(vocabulary, 6, seed=3))


def test_decimation_for():
    assert (decimation_for(PerturbationParams(decimation_fraction=0.03), 1, 0) == 0.03)

    params = PerturbationParams(randomize_decimation=True, decimation_range=(0.01, 0.04))
    values = [decimation_for(params, 7, index) for index in range(20)]
    assert (all(0.01 <= v <= 0.04 for v in values))
    assert (values == [decimation_for(params, 7, index) for index in range(20)])
    assert (len(set(values)) > 1)


def test_saved_results_load_back(tmp_path):
    result = crafted("five")
    result.trace = [TraceEntry(1.0, "", True, 7), TraceEntry(0.0, "five", False, 2, (0, 1))]
    path = save_result(result, str(tmp_path), "five_00")
    loaded = load_result(path)

    assert (loaded.label == "five")
    assert (loaded.trace[1].failing_variant == (0, 1))
    assert (loaded.serialize == result.serialize)


def test_saved_challenges_load_back(tmp_path):
    challenge = assemble_captcha([(crafted("one"), "one"), (crafted("two"), "two")])
    loaded = load_challenge(save_challenge(challenge, str(tmp_path), "challenge-000"))

    assert (loaded.answer == challenge.answer)
    assert (loaded.boundaries == challenge.boundaries)


def test_missing_challenge(tmp_path):
    with pytest.raises(UsageError):
        load_challenge(str(tmp_path / 'nope.json'))


@given(st.floats(min_value=0.1, max_value=0.45), st.floats(min_value=1.1, max_value=1.9))
@settings(max_examples=100, deadline=None)
def test_yeehaw_alpha_is_minimal_within_tolerance(weak_ratio, rho):
    cfg = SearchConfig(tolerance=1 / 64)
    oracle = PlantedClippingOracle("target", STRONG_BIN, WEAK_BIN, rho)
    clip = planted_pair(weak_ratio)
    result = craft_yeehaw(clip, oracle, 0.0, QUIET, cfg, original_label="target")

    smaller = perturb_yeehaw(clip, 0.0, (result.alpha_fraction - cfg.tolerance) * alpha_ceiling(clip, 0.0))
    passed, text, _, _ = robust_empty(oracle, smaller, QUIET)
    assert (result.success)
    assert (not passed)
    assert (text == "target")


def test_yeehaw_bracket_ends_on_a_failing_value(mock_oracle, digit_corpus, search_config):
    sweep = small_sweep()
    for buffer, label in digit_corpus[::4]:
        result = craft_yeehaw(buffer, mock_oracle, 0.02, sweep, search_config, original_label=label)
        if not result.success or result.alpha_fraction == search_config.lo:
            continue
        below = [entry for entry in result.trace if not entry.passed]
        assert (any(result.alpha_fraction - search_config.tolerance <= entry.parameter
                    < result.alpha_fraction for entry in below))


@pytest.mark.parametrize('label_index', range(10))
def test_noiseless_sweep_needs_no_more_clipping(two_tone_oracle, label_index):
    cfg = SearchConfig(tolerance=1 / 64)
    clip = two_tone_clip(label_index)
    full = craft_yeehaw(clip, two_tone_oracle, 0.1, small_sweep(max_fraction=0.2, amplitude_count=6), cfg)
    quiet = craft_yeehaw(clip, two_tone_oracle, 0.1, QUIET, cfg)

    assert (full.success and quiet.success)
    assert (quiet.alpha <= full.alpha)


def test_every_crafted_digit_replays_as_robustly_empty(mock_oracle, digit_corpus, search_config):
    sweep = small_sweep()
    results = [craft_yeehaw(buffer, mock_oracle, 0.02, sweep, search_config, original_label=label)
               for buffer, label in digit_corpus[::2]]
    successes = [result for result in results if result.success]

    assert (len({result.label for result in successes}) > 1)
    assert (all(replay_robust_empty(result, mock_oracle, sweep) for result in successes))
