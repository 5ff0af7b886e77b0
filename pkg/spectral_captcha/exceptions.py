msg_map = {
    "malformed-wav": "The file is not a readable RIFF/WAVE file.",
    "unsupported-format": "Only mono, 16-bit PCM WAV files are supported.",
    "io-error": "The file could not be written.",
    "empty-input": "The operation needs a non-empty input.",
    "empty-corpus": "Fitting needs at least one labeled example.",
    "length-mismatch": "Both buffers must have the same length and sample rate.",
    "invalid-fraction": "Decimation fractions must lie in [0, 1].",
    "alpha-out-of-range": "The clipping value must lie in [0, max |DFT(x)|].",
    "remote-unavailable": "The transcription service could not be reached.",
    "rate-limited": "The transcription service is rate limiting requests. Try again later.",
    "auth-failure": "The transcription service rejected the API token.",
    "input-unrecognized": "The oracle does not transcribe the clean input as its label.",
    "mixed-sample-rates": "All utterances of a challenge must share one sample rate.",
    "unsuccessful-result": "Only successful crafting results can be assembled.",
    "missing-crafted-label": "No crafted result exists for a requested label.",
    "parse-error": "The pronouncing dictionary could not be parsed.",
    "unknown-phoneme": "The pronouncing dictionary uses a symbol outside ARPAbet.",
    "out-of-vocabulary": "Some words are not in the pronouncing dictionary.",
    "no-segments-found": "No voiced segments were found in the audio.",
    "degenerate-classes": "Calibration needs both noise and CAPTCHA distances.",
    "dimension-mismatch": "Activation vectors must share the center's dimensionality.",
    "usage-error": "Invalid command line or configuration.",
}


class CaptchaError(Exception):
    """Base class for every error this package raises.

    Subclasses set ``code``; the message falls back to ``msg_map[code]``.
    """
    code = "server-error"

    def __init__(self, message=None):
        self.message = message or msg_map.get(self.code, "Something went wrong")
        super().__init__(self.message)

    @property
    def serialize(self):
        return {"errors": {self.code: {"message": self.message}}}


class AudioError(CaptchaError):
    pass


class MalformedWav(AudioError):
    code = "malformed-wav"


class UnsupportedFormat(AudioError):
    code = "unsupported-format"


class IoError(AudioError):
    code = "io-error"


class EmptyInput(AudioError):
    code = "empty-input"


class EmptyCorpus(EmptyInput):
    code = "empty-corpus"


class LengthMismatch(AudioError):
    code = "length-mismatch"


class PerturbationError(CaptchaError):
    pass


class InvalidFraction(PerturbationError):
    code = "invalid-fraction"


class AlphaOutOfRange(PerturbationError):
    code = "alpha-out-of-range"


class OracleError(CaptchaError):
    pass


class RemoteUnavailable(OracleError):
    code = "remote-unavailable"


class RateLimited(OracleError):
    code = "rate-limited"

    def __init__(self, message=None, retry_after=None):
        super().__init__(message)
        self.retry_after = retry_after


class AuthFailure(OracleError):
    code = "auth-failure"


class CraftError(CaptchaError):
    pass


class InputUnrecognized(CraftError):
    code = "input-unrecognized"


class MixedSampleRates(CraftError):
    code = "mixed-sample-rates"


class UnsuccessfulResult(CraftError):
    code = "unsuccessful-result"


class MissingCraftedLabel(CraftError):
    code = "missing-crafted-label"


class PhoneticsError(CaptchaError):
    pass


class ParseError(PhoneticsError):
    code = "parse-error"

    def __init__(self, message=None, line_number=None):
        if line_number is not None:
            message = f"line {line_number}: {message or msg_map[self.code]}"
        super().__init__(message)
        self.line_number = line_number


class UnknownPhoneme(ParseError):
    code = "unknown-phoneme"


class OutOfVocabulary(PhoneticsError):
    code = "out-of-vocabulary"

    def __init__(self, words):
        self.words = list(words)
        super().__init__(f"Not in the pronouncing dictionary: {', '.join(self.words)}")


class BreakerError(CaptchaError):
    pass


class NoSegmentsFound(BreakerError):
    code = "no-segments-found"


class DetectionError(CaptchaError):
    pass


class DegenerateClasses(DetectionError):
    code = "degenerate-classes"


class DimensionMismatch(DetectionError):
    code = "dimension-mismatch"


class UsageError(CaptchaError):
    code = "usage-error"
