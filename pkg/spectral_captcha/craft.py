"""Oracle-driven crafting.

Both algorithms bisect a single perturbation strength for the smallest value
that defeats the oracle:

* Kenansville decimates only and succeeds once the transcript no longer
  matches the label.
* Yeehaw Junction decimates at a fixed T_d, bisects the clipping value alpha,
  and succeeds only when the oracle returns the empty string for the clean
  perturbed audio *and* for every noised variant of the sweep.

The bisection probes ``hi`` first (is the problem feasible?), then ``lo``
(is it trivially solved?), then halves the bracket at least once and until
it is no wider than the tolerance.
"""
import math
import os
from dataclasses import asdict, dataclass, field
from typing import List

from spectral_captcha.asr import transcribe
from spectral_captcha.audio import concatenate, load_wav, rmse, save_wav
from spectral_captcha.exceptions import (
    EmptyInput, InputUnrecognized, MixedSampleRates, UnsuccessfulResult, UsageError
)
from spectral_captcha.models import CaptchaChallenge, CraftResult, TraceEntry
from spectral_captcha.perturb import (
    alpha_ceiling, noise_generator, perturb_kenansville, perturb_yeehaw, sweep_variants
)
from spectral_captcha.utils import derive_seed, normalize_text, read_json, setup_logger, write_json

logger = setup_logger('craft_logger')


@dataclass
class SearchOutcome:
    value: float
    success: bool
    trace: List[TraceEntry] = field(default_factory=list)

    @property
    def probes(self):
        return len(self.trace)


def probe_budget(cfg):
    """Upper bound on the number of parameter evaluations of one search."""
    return max(1, math.ceil(math.log2((cfg.hi - cfg.lo) / cfg.tolerance))) + 2


def binary_search(probe, cfg, algorithm="search"):
    """Finds the smallest passing value of ``probe`` on [cfg.lo, cfg.hi].

    ``probe(value)`` returns a :class:`TraceEntry`. The search assumes the
    probe is monotone (fails below some boundary, passes above it); on a
    non-monotone probe it still returns its final bracket end, and the trace
    shows where the assumption broke.
    """
    cfg.validate()
    trace = []

    def run(value):
        entry = probe(value)
        trace.append(entry)
        logger.info(f"{algorithm} probe {value:.6f}: "
                    f"{'pass' if entry.passed else 'fail'} ({entry.transcript!r})")
        return entry.passed

    if not run(cfg.hi):
        return SearchOutcome(cfg.hi, False, trace)
    if run(cfg.lo):
        return SearchOutcome(cfg.lo, True, trace)

    lo, hi = cfg.lo, cfg.hi
    for _ in range(min(cfg.max_iterations, probe_budget(cfg) - 2)):
        mid = (lo + hi) / 2
        if run(mid):
            hi = mid
        else:
            lo = mid
        if hi - lo <= cfg.tolerance:
            break

    return SearchOutcome(hi, True, trace)


def robust_empty(oracle, perturbed, sweep):
    """Checks the robust-empty criterion for one perturbed sample.

    Returns ``(passed, transcript, queries, failing_variant)``. Evaluation
    stops at the first transcript that is not empty.
    """
    clean = transcribe(oracle, perturbed)
    if not clean.is_empty:
        return False, clean.text, 1, None

    queries = 1
    for amplitude_index, realization, _, _, noised in sweep_variants(perturbed, sweep):
        queries += 1
        transcript = transcribe(oracle, noised)
        if not transcript.is_empty:
            return False, transcript.text, queries, (amplitude_index, realization)
    return True, "", queries, None


def _check_recognized(buffer, original_label, oracle):
    transcript = transcribe(oracle, buffer)
    if normalize_text(transcript.text) != normalize_text(original_label):
        raise InputUnrecognized(
            f"oracle transcribes the clean input as {transcript.text!r}, not {original_label!r}")


def craft_kenansville(buffer, original_label, oracle, cfg):
    """Bisects T_d for the smallest decimation that changes the transcript."""
    _check_recognized(buffer, original_label, oracle)
    audio = {}

    def probe(t_d_frac):
        perturbed = audio[t_d_frac] = perturb_kenansville(buffer, t_d_frac)
        transcript = transcribe(oracle, perturbed)
        passed = normalize_text(transcript.text) != normalize_text(original_label)
        return TraceEntry(t_d_frac, transcript.text, passed)

    outcome = binary_search(probe, cfg, "kenansville")
    perturbed = audio[outcome.value]
    return CraftResult(
        perturbed=perturbed,
        t_d_frac=outcome.value,
        alpha=0.0,
        distortion_rmse=rmse(buffer, perturbed),
        oracle_queries=1 + sum(entry.queries for entry in outcome.trace),
        success=outcome.success,
        trace=outcome.trace,
        algorithm="kenansville",
        label=original_label,
        oracle=getattr(oracle, 'name', 'oracle'),
    )


def craft_yeehaw(buffer, oracle, t_d_frac, sweep, cfg, original_label=None):
    """Bisects alpha (as a fraction of the decimated maximum) for the least
    clipping that makes the sample robustly empty."""
    queries = 0
    if original_label is not None:
        _check_recognized(buffer, original_label, oracle)
        queries += 1

    ceiling = alpha_ceiling(buffer, t_d_frac)
    if ceiling == 0:
        raise EmptyInput("cannot craft from a silent buffer")
    audio = {}

    def probe(fraction):
        perturbed = audio[fraction] = perturb_yeehaw(buffer, t_d_frac, fraction * ceiling)
        passed, text, used, failing = robust_empty(oracle, perturbed, sweep)
        return TraceEntry(fraction, text, passed, used, failing)

    outcome = binary_search(probe, cfg, "yeehaw")
    perturbed = audio[outcome.value]
    return CraftResult(
        perturbed=perturbed,
        t_d_frac=t_d_frac,
        alpha=outcome.value * ceiling,
        distortion_rmse=rmse(buffer, perturbed),
        oracle_queries=queries + sum(entry.queries for entry in outcome.trace),
        success=outcome.success,
        trace=outcome.trace,
        algorithm="yeehaw",
        label=original_label,
        alpha_fraction=outcome.value,
        oracle=getattr(oracle, 'name', 'oracle'),
        sweep=asdict(sweep),
    )


def replay_robust_empty(result, oracle, sweep):
    """Re-runs the full sweep on a crafted sample; True iff all variants stay empty."""
    passed, _, _, _ = robust_empty(oracle, result.perturbed, sweep)
    return passed


def decimation_for(params, seed, index):
    """T_d for the ``index``-th utterance of a run.

    With ``randomize_decimation`` every utterance draws its own value from
    ``decimation_range``, seeded by (seed, index) so reruns agree.
    """
    if not params.randomize_decimation:
        return params.decimation_fraction
    lo, hi = params.decimation_range
    return float(noise_generator(derive_seed(seed, index)).uniform(lo, hi))


def assemble_captcha(results, gap_ms=500, seed=0):
    """Concatenates crafted utterances into one challenge.

    ``results`` is a list of ``(CraftResult, label)`` pairs; the labels in
    order are the expected answer.
    """
    if not results:
        raise EmptyInput("a challenge needs at least one utterance")
    for result, label in results:
        if not result.success:
            raise UnsuccessfulResult(f"crafting failed for {label!r}")
    rates = {result.perturbed.sample_rate for result, _ in results}
    if len(rates) > 1:
        raise MixedSampleRates(f"found sample rates {sorted(rates)}")

    audio, bounds = concatenate([result.perturbed for result, _ in results], gap_ms)
    return CaptchaChallenge(audio=audio,
                            answer=[label for _, label in results],
                            boundaries=bounds,
                            seed=seed)


def verify_answer(challenge, answer):
    expected = [token.casefold() for token in challenge.answer]
    return normalize_text(answer) == expected


def challenge_labels(vocabulary, length, seed):
    """Draws ``length`` labels (with replacement) for a challenge."""
    rng = noise_generator(derive_seed(seed, length))
    return [vocabulary[i] for i in rng.integers(0, len(vocabulary), size=length)]


def save_result(result, directory, stem):
    """Writes ``<stem>.wav`` and ``<stem>.json``; returns the JSON path."""
    save_wav(result.perturbed, os.path.join(directory, f"{stem}.wav"))
    path = os.path.join(directory, f"{stem}.json")
    write_json(path, result.serialize)
    return path


def load_result(json_path):
    data = read_json(json_path)
    audio = load_wav(os.path.splitext(json_path)[0] + ".wav")
    return CraftResult.from_dict(data, audio)


def save_challenge(challenge, directory, name):
    save_wav(challenge.audio, os.path.join(directory, f"{name}.wav"))
    path = os.path.join(directory, f"{name}.json")
    write_json(path, challenge.serialize)
    return path


def load_challenge(json_path):
    """Reads a challenge manifest and the WAV next to it."""
    if not os.path.exists(json_path):
        raise UsageError(f"challenge manifest not found: {json_path}")
    data = read_json(json_path)
    audio = load_wav(os.path.splitext(json_path)[0] + ".wav")
    return CaptchaChallenge.from_dict(data, audio)
