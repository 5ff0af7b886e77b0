"""Labelled corpus ingestion.

A manifest is a two-column text file, one utterance per line::

    digits/two_0001.wav<TAB>two

Paths are relative to the corpus directory; ``#`` starts a comment line.
"""
import glob
import os
from dataclasses import dataclass

from spectral_captcha.audio import load_wav
from spectral_captcha.exceptions import UsageError
from spectral_captcha.utils import setup_logger

logger = setup_logger('corpus_logger')


@dataclass(frozen=True)
class CorpusEntry:
    path: str
    label: str

    @property
    def stem(self):
        """A flat, file-system safe name for this entry's outputs."""
        return os.path.splitext(self.path)[0].replace(os.sep, "__").replace("/", "__")


def load_manifest(path):
    if not path or not os.path.exists(path):
        raise UsageError(f"label manifest not found: {path}")

    entries = []
    with open(path, encoding='utf-8') as f:
        for line_number, line in enumerate(f, start=1):
            line = line.rstrip('\n')
            if not line.strip() or line.startswith('#'):
                continue
            fields = line.split('\t')
            if len(fields) != 2 or not fields[0].strip() or not fields[1].strip():
                raise UsageError(f"{path}:{line_number}: expected 'path<TAB>label'")
            entries.append(CorpusEntry(fields[0].strip(), fields[1].strip()))
    return entries


def load_corpus(corpus_dir, entries):
    """``(AudioBuffer, label)`` pairs for every manifest entry, in manifest order."""
    return [(load_wav(os.path.join(corpus_dir or '', entry.path)), entry.label)
            for entry in entries]


def wav_files(directory):
    return _files(directory, '*.wav')


def json_files(directory):
    return _files(directory, '*.json')


def _files(directory, pattern):
    if not directory or not os.path.isdir(directory):
        return []
    return sorted(glob.glob(os.path.join(directory, pattern)))


def write_manifest(path, entries):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        for entry in entries:
            f.write(f"{entry.path}\t{entry.label}\n")
