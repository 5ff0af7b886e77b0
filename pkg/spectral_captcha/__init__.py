"""Audio CAPTCHAs that speech recognizers transcribe as nothing, and the
tooling to attack and detect them."""

API_VERSION = "1.0"
__version__ = "0.3.0"
