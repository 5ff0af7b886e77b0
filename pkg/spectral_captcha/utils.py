import csv
import hashlib
import json
import logging
import os
import sys

import numpy as np


def setup_logger(name, level=logging.INFO):
    """Function setup as many loggers as you want"""
    logger = logging.getLogger(name)
    logger.setLevel(level)

    # Loggers are module globals, so guard against stacking handlers
    # when a module is imported by several entry points.
    if not logger.handlers:
        formatter = logging.Formatter('%(asctime)s %(levelname)s %(message)s')
        handler = logging.StreamHandler(sys.stdout)
        handler.setFormatter(formatter)
        logger.addHandler(handler)

    return logger


def derive_seed(base_seed, *indices):
    """A 64-bit seed that depends only on ``base_seed`` and the index path."""
    sequence = np.random.SeedSequence([int(base_seed) & 0xFFFFFFFFFFFFFFFF, *map(int, indices)])
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


def content_hash(data):
    return hashlib.sha256(data).hexdigest()


def write_json(path, payload):
    """Writes ``payload`` with sorted keys so reruns are byte-identical."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write('\n')


def read_json(path):
    with open(path, encoding='utf-8') as f:
        return json.load(f)


def write_csv(path, header, rows):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, 'w', encoding='utf-8', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_cell(cell) for cell in row])


def read_csv(path):
    with open(path, encoding='utf-8', newline='') as f:
        return list(csv.DictReader(f))


def format_cell(value):
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return repr(value)
    if value is None:
        return ''
    return value


def normalize_text(text):
    """Case-folds and splits on whitespace."""
    return (text or '').casefold().split()
