"""Pronouncing-dictionary lookup and the edit distances built on it.

Dictionaries use the CMU line format::

    ;;; comment
    READ  R EH1 D
    READ(2)  R IY1 D

Stress digits are stripped on load; only phoneme identity is compared.
"""
import math
import os
import re
from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np
from nltk import edit_distance

from spectral_captcha.exceptions import OutOfVocabulary, ParseError, UnknownPhoneme
from spectral_captcha.utils import normalize_text, setup_logger

logger = setup_logger('phonetics_logger')

ARPABET = frozenset("""
    AA AE AH AO AW AY B CH D DH EH ER EY F G HH IH IY JH K L M N NG
    OW OY P R S SH T TH UH UW V W Y Z ZH
""".split())

DEFAULT_DICTIONARY = os.path.join(os.path.dirname(__file__), 'data', 'cmudict-core.dict')

_VARIANT = re.compile(r"^(?P<word>[^\s(]+)(?:\((?P<index>\d+)\))?$")
_WORD = re.compile(r"[A-Z0-9']+")


@dataclass(frozen=True)
class PhonemeSequence:
    tokens: Tuple[str, ...]

    def __len__(self):
        return len(self.tokens)

    def __str__(self):
        return " ".join(self.tokens)


@dataclass(frozen=True)
class PronouncingDictionary:
    entries: Dict[str, List[PhonemeSequence]]

    def __contains__(self, word):
        return word.upper() in self.entries

    def __len__(self):
        return len(self.entries)

    def variants(self, word):
        return self.entries[word.upper()]


def strip_stress(token):
    return token.rstrip("012")


def parse_dictionary(lines):
    entries = {}
    for line_number, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith(";;;"):
            continue

        head, *tokens = line.split()
        match = _VARIANT.match(head)
        if not match or not tokens:
            raise ParseError(f"expected 'WORD  PH1 PH2 ...', got {line!r}", line_number)

        phonemes = []
        for token in tokens:
            phoneme = strip_stress(token.upper())
            if phoneme not in ARPABET:
                raise UnknownPhoneme(f"{token!r} is not an ARPAbet symbol", line_number)
            phonemes.append(phoneme)

        word = match.group('word').upper()
        entries.setdefault(word, []).append(PhonemeSequence(tuple(phonemes)))
    return PronouncingDictionary(entries)


def load_dictionary(path=None):
    path = path or DEFAULT_DICTIONARY
    # cmudict releases are latin-1 encoded
    with open(path, encoding='latin-1') as f:
        dictionary = parse_dictionary(f)
    logger.info(f"Loaded {len(dictionary)} words from {path}")
    return dictionary


def words_of(text):
    return _WORD.findall((text or "").upper())


def _lookup(dictionary, text):
    words = words_of(text)
    missing = [word for word in words if word not in dictionary.entries]
    if missing:
        raise OutOfVocabulary(missing)
    return [dictionary.entries[word] for word in words]


def to_phonemes(dictionary, text):
    """First-variant phoneme sequence of every word in ``text``."""
    return [variants[0] for variants in _lookup(dictionary, text)]


def pronunciation_lattice(dictionary, text):
    """Every pronunciation of ``text`` as one DAG of phoneme nodes.

    Node 0 is the start. Each node is ``(phoneme, predecessor ids)`` and
    nodes come in topological order. Returns the nodes and the ids of the
    nodes a complete pronunciation can end on.
    """
    nodes = [(None, ())]
    frontier = (0,)
    for variants in _lookup(dictionary, text):
        ends = []
        for sequence in variants:
            previous = frontier
            for token in sequence.tokens:
                nodes.append((token, previous))
                previous = (len(nodes) - 1,)
            ends.extend(previous)
        frontier = tuple(dict.fromkeys(ends))
    return nodes, frontier


def phonetic_distance(a, b, dictionary):
    """Phoneme-level Levenshtein distance, minimized over pronunciation variants.

    Every word picks its own variant. The alignment runs over the product of
    the two pronunciation lattices, so the cost grows with the number of
    phonemes rather than with the number of variant combinations.
    """
    left, left_final = pronunciation_lattice(dictionary, a)
    right, right_final = pronunciation_lattice(dictionary, b)

    d = [[math.inf] * len(right) for _ in left]
    d[0][0] = 0
    for i, (x, x_prev) in enumerate(left):
        row = d[i]
        for j, (y, y_prev) in enumerate(right):
            if i == 0 and j == 0:
                continue
            best = min((d[p][j] + 1 for p in x_prev), default=math.inf)
            best = min(best, min((row[q] + 1 for q in y_prev), default=math.inf))
            substitution = 0 if x == y else 1
            for p in x_prev:
                for q in y_prev:
                    best = min(best, d[p][q] + substitution)
            row[j] = best
    return int(min(d[i][j] for i in left_final for j in right_final))


def word_edit_distance(reference, hypothesis):
    return edit_distance(normalize_text(reference), normalize_text(hypothesis))


def mean_phonetic_distance(pairs, dictionary):
    """Mean raw distance over ``(reference, hypothesis)`` pairs.

    Returns ``(mean, scored, skipped)``; pairs with out-of-vocabulary words
    are skipped and the mean is NaN when nothing could be scored.
    """
    distances, skipped = [], 0
    for reference, hypothesis in pairs:
        try:
            distances.append(phonetic_distance(reference, hypothesis, dictionary))
        except OutOfVocabulary:
            skipped += 1
    mean = float(np.mean(distances)) if distances else float('nan')
    return mean, len(distances), skipped
