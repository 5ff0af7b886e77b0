import os

import numpy as np
import pytest

from configs import DIGITS, MockOracleConfig, NoiseSweepConfig, SearchConfig, ServerConfig
from spectral_captcha.asr import Transcript, TranscriptionOracle
from spectral_captcha.asr.mock import MockOracle, fit_mock
from spectral_captcha.audio import AudioBuffer, save_wav
from spectral_captcha.corpus import CorpusEntry, write_manifest
from spectral_captcha.phonetics import load_dictionary
from spectral_captcha.server import create_app

RATE = 16000
PLANTED_N = 1024
TWO_TONE_N = 4096

TEST_API_KEY = 'test-key'


##########################################
# Synthetic audio
##########################################

def harmonic_clip(label_index, scale=1.0, seed=0, duration=0.3, rate=RATE):
    """A voiced-sounding tone per label: three harmonics, 20 ms fades and a
    faint noise floor so no frequency bin is exactly empty."""
    n = int(duration * rate)
    t = np.arange(n) / rate
    f0 = 220.0 + 90.0 * label_index
    tone = sum(amp * np.sin(2 * np.pi * f0 * h * t) for h, amp in ((1, 0.4), (2, 0.2), (3, 0.1)))

    fade = int(0.02 * rate)
    envelope = np.ones(n)
    envelope[:fade] = np.linspace(0, 1, fade)
    envelope[-fade:] = np.linspace(1, 0, fade)

    floor = np.random.default_rng(seed).normal(0.0, 1e-4, n)
    return AudioBuffer(scale * tone * envelope + floor, rate)


def white_noise(std, seed, duration=0.3, rate=RATE):
    return AudioBuffer(np.random.default_rng(seed).normal(0.0, std, int(duration * rate)), rate)


def cosines(n, components, rate=RATE):
    """Zero-phase cosines on exact DFT bins: ``components`` is [(bin, amplitude)]."""
    t = np.arange(n)
    return AudioBuffer(sum(amp * np.cos(2 * np.pi * k * t / n) for k, amp in components), rate)


def two_tone_bins(label_index):
    return 40 + 20 * label_index, 400 + 20 * label_index


def two_tone_clip(label_index, seed=0):
    strong, weak = two_tone_bins(label_index)
    clip = cosines(TWO_TONE_N, [(strong, 0.4), (weak, 0.1)])
    floor = np.random.default_rng(seed).normal(0.0, 1e-4, TWO_TONE_N)
    return AudioBuffer(clip.samples + floor, RATE)


def small_sweep(**overrides):
    params = dict(min_fraction=1e-4, max_fraction=0.05, amplitude_count=3,
                  realizations_per_amplitude=2, base_seed=7)
    params.update(overrides)
    return NoiseSweepConfig(**params)


##########################################
# Constructed oracles
##########################################

class TwoToneOracle(TranscriptionOracle):
    """Answers a label while its strong tone is the loudest bin and at least
    ``ratio`` times its weak tone; mostly-empty spectra are rejected outright.

    Adding noise fills emptied bins back in, so decimation alone is undone by
    noise, while clipping the strong tone down to the weak one is not.
    """

    def __init__(self, labels=DIGITS, ratio=2.0, name="two-tone"):
        self.bins = {label: two_tone_bins(i) for i, label in enumerate(labels)}
        self.ratio = ratio
        self.name = name

    def transcribe(self, buffer):
        magnitudes = np.abs(np.fft.rfft(buffer.samples))
        peak = magnitudes.max()
        if peak == 0 or np.mean(magnitudes <= 1e-9 * peak) > 0.5:
            return Transcript("")

        loudest = int(np.argmax(magnitudes))
        for label, (strong, weak) in self.bins.items():
            if loudest == strong and magnitudes[strong] >= self.ratio * magnitudes[weak]:
                return Transcript(label)
        return Transcript("")


class PlantedDecimationOracle(TranscriptionOracle):
    """Recognizes ``label`` exactly while the weak bin survives decimation."""
    name = "planted-decimation"

    def __init__(self, label, weak_bin):
        self.label = label
        self.weak_bin = weak_bin

    def transcribe(self, buffer):
        magnitudes = np.abs(np.fft.fft(buffer.samples))
        if magnitudes[self.weak_bin] > 1e-6 * magnitudes.max():
            return Transcript(self.label)
        return Transcript("something else")


class PlantedClippingOracle(TranscriptionOracle):
    """Recognizes ``label`` while strong/weak magnitude ratio stays >= ``rho``."""
    name = "planted-clipping"

    def __init__(self, label, strong_bin, weak_bin, rho):
        self.label = label
        self.strong_bin = strong_bin
        self.weak_bin = weak_bin
        self.rho = rho

    def transcribe(self, buffer):
        magnitudes = np.abs(np.fft.fft(buffer.samples))
        strong, weak = magnitudes[self.strong_bin], magnitudes[self.weak_bin]
        if strong <= 1e-9 or strong < self.rho * weak:
            return Transcript("")
        return Transcript(self.label)


class FailingOracle(TranscriptionOracle):
    name = "failing"

    def __init__(self, error):
        self.error = error

    def transcribe(self, buffer):
        raise self.error


class ScriptedOracle(TranscriptionOracle):
    """Returns scripted transcripts in order, then repeats the last one."""
    name = "scripted"

    def __init__(self, transcripts):
        self.transcripts = list(transcripts)
        self.calls = 0

    def transcribe(self, buffer):
        text = self.transcripts[min(self.calls, len(self.transcripts) - 1)]
        self.calls += 1
        return Transcript(text)


##########################################
# Fixtures
##########################################

@pytest.fixture(scope='session')
def digit_corpus():
    """Two jittered takes of every digit."""
    return [(harmonic_clip(i, scale=scale, seed=10 * i + take), label)
            for i, label in enumerate(DIGITS)
            for take, scale in enumerate((0.95, 1.05))]


@pytest.fixture(scope='session')
def mock_model(digit_corpus):
    return fit_mock(digit_corpus, MockOracleConfig())


@pytest.fixture(scope='function')
def mock_oracle(mock_model):
    return MockOracle(mock_model)


@pytest.fixture(scope='function')
def two_tone_oracle():
    return TwoToneOracle()


@pytest.fixture(scope='session')
def dictionary():
    return load_dictionary()


@pytest.fixture(scope='function')
def search_config():
    return SearchConfig(lo=0.0, hi=1.0, tolerance=1 / 64, max_iterations=32)


@pytest.fixture(scope='function')
def corpus_workspace(tmp_path, digit_corpus):
    """A corpus directory, manifest and run config on disk."""
    corpus_dir = tmp_path / 'corpus'
    entries = []
    for index, (buffer, label) in enumerate(digit_corpus[::2]):
        path = os.path.join('digits', f'{label}_{index:02d}.wav')
        save_wav(buffer, str(corpus_dir / path))
        entries.append(CorpusEntry(path, label))
    manifest = tmp_path / 'labels.tsv'
    write_manifest(str(manifest), entries)

    config = tmp_path / 'run.yml'
    config.write_text(
        f"corpus_dir: {corpus_dir}\n"
        f"manifest: {manifest}\n"
        f"output_dir: {tmp_path / 'results'}\n"
        "seed: 3\n"
        "captcha_length: 3\n"
        "search:\n"
        "  tolerance: 0.015625\n"
        "sweep:\n"
        "  min_fraction: 0.0001\n"
        "  max_fraction: 0.05\n"
        "  amplitude_count: 3\n"
        "  realizations_per_amplitude: 2\n"
    )
    return tmp_path


@pytest.fixture(scope='module')
def module_client(mock_model):
    config = ServerConfig(api_key=TEST_API_KEY, default_limits=["1000 per minute"],
                          max_content_length=1024 * 1024)
    flask_app = create_app(mock_model, config)
    flask_app.config['TESTING'] = True

    # Flask provides a way to test your application by exposing the Werkzeug test Client
    # and handling the context locals for you.
    testing_client = flask_app.test_client()

    # Establish an application context before running the tests.
    ctx = flask_app.app_context()
    ctx.push()

    yield testing_client  # this is where the testing happens!

    ctx.pop()


class FakeResponse(object):
    def __init__(self, status_code=200, payload=None, headers=None):
        self.status_code = status_code
        self._payload = payload
        self.headers = headers or {}

    def json(self):
        if self._payload is None:
            raise ValueError("No JSON object could be decoded")
        return self._payload


@pytest.fixture(scope='function')
def fake_transcription_service(mocker):
    """
    Changes the return value of requests.post to a canned transcription so
    that we aren't calling external APIs in our unit tests
    """
    return mocker.patch("requests.post",
                        return_value=FakeResponse(payload={'data': {'transcript': 'two'}}))


@pytest.fixture(scope='function')
def fake_sleep(mocker):
    """Retries and pacing sleep through time.sleep; record instead of waiting."""
    return mocker.patch("spectral_captcha.asr.remote.time.sleep", return_value=None)
