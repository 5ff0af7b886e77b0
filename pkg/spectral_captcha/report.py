"""Aggregate tables over crafted audio and attack reports."""
from collections import defaultdict

import numpy as np

from spectral_captcha.asr import transcribe
from spectral_captcha.breaker import break_probability, transfer_failure_probability
from spectral_captcha.detect import evasion_probability
from spectral_captcha.exceptions import OracleError
from spectral_captcha.phonetics import mean_phonetic_distance
from spectral_captcha.utils import normalize_text, setup_logger

logger = setup_logger('report_logger')

PROBABILITY_HEADER = ["quantity", "per_label_rate", "captcha_length", "probability", "percent",
                      "source", "rounded"]
MATRIX_HEADER = ["surrogate", "target", "evasion_rate", "samples"]
PHONETIC_HEADER = ["oracle", "mean_distance", "scored", "skipped", "normalization"]

# Rates with a commonly quoted, rounded outcome for six-label challenges;
# printed next to the exact value as a sanity check of the arithmetic.
REFERENCE_RATES = [
    ("transfer_failure", 0.81, "4e-05"),
    ("break", 0.51, "1.7e-02"),
    ("break", 0.41, "4.7e-03"),
    ("evasion", 0.89, "1.77e-06"),
]

_PROBABILITY = {
    "break": break_probability,
    "transfer_failure": transfer_failure_probability,
    "evasion": evasion_probability,
}


def evaded(algorithm, label, text):
    """Yeehaw output must transcribe as empty; Kenansville output as anything but its label."""
    if algorithm == "kenansville":
        return normalize_text(text) != normalize_text(label)
    return not normalize_text(text)


def transfer_rows(samples, oracles):
    """Transcribes every crafted sample with every oracle.

    ``samples`` are dicts with ``file``, ``label``, ``algorithm``,
    ``surrogate`` and ``audio``. Oracle failures become rows with an error
    code and are left out of the rates.
    """
    rows = []
    for sample in samples:
        for oracle in oracles:
            row = {'file': sample['file'], 'label': sample['label'],
                   'algorithm': sample['algorithm'], 'surrogate': sample['surrogate'],
                   'target': oracle.name, 'transcript': '', 'evaded': None, 'error': None}
            try:
                text = transcribe(oracle, sample['audio']).text
            except OracleError as e:
                logger.error(f"{oracle.name} failed on {sample['file']}: {e.code}")
                row['error'] = e.code
            else:
                row['transcript'] = text
                row['evaded'] = evaded(sample['algorithm'], sample['label'], text)
            rows.append(row)
    return rows


def evasion_matrix(rows):
    """Surrogate x target evasion rates, sorted by (surrogate, target)."""
    cells = defaultdict(list)
    for row in rows:
        if row['evaded'] is not None:
            cells[(row['surrogate'], row['target'])].append(row['evaded'])
    return [(surrogate, target, float(np.mean(values)), len(values))
            for (surrogate, target), values in sorted(cells.items())]


def phonetic_summary(rows, dictionary):
    """Mean raw phoneme edit distance between label and transcript, per target oracle."""
    pairs = defaultdict(list)
    for row in rows:
        if row['error'] is None:
            pairs[row['target']].append((row['label'], row['transcript']))

    table = []
    for target in sorted(pairs):
        mean, scored, skipped = mean_phonetic_distance(pairs[target], dictionary)
        table.append((target, mean, scored, skipped, "raw"))
    return table


def breaker_success_rate(reports):
    """Fraction of segments whose mapped label matched the expected one."""
    hits = total = 0
    for report in reports:
        expected = [token.casefold() for token in report.get('expected', [])]
        mapped = [segment.get('mapped') for segment in report.get('segments', [])]
        total += len(expected)
        hits += sum(1 for want, got in zip(expected, mapped) if got and got.casefold() == want)
    return hits / total if total else None


def probability_rows(rates, lengths=range(1, 11)):
    """Probability table rows for measured per-label rates and the reference rates.

    ``rates`` maps a quantity (``break``, ``transfer_failure``, ``evasion``)
    to its measured per-label rate; quantities without a measurement are skipped.
    """
    rows = []
    for quantity in ("break", "transfer_failure", "evasion"):
        rate = rates.get(quantity)
        if rate is None:
            continue
        for length in lengths:
            probability = _PROBABILITY[quantity](rate, length)
            rows.append((quantity, rate, length, probability, 100 * probability, "measured", None))

    for quantity, rate, rounded in REFERENCE_RATES:
        probability = _PROBABILITY[quantity](rate, 6)
        rows.append((quantity, rate, 6, probability, 100 * probability, "reference", rounded))
    return rows
