import os
import threading
import time

import requests

from spectral_captcha.asr import TranscriptionOracle, Transcript
from spectral_captcha.audio import encode_wav
from spectral_captcha.exceptions import AuthFailure, OracleError, RateLimited, RemoteUnavailable
from spectral_captcha.utils import content_hash, setup_logger

logger = setup_logger('remote_oracle_logger')

# One lock per endpoint serializes requests across every client instance,
# and remembers when the endpoint was last hit.
_endpoint_locks = {}
_last_request = {}
_registry_lock = threading.Lock()


def _endpoint_lock(endpoint):
    with _registry_lock:
        return _endpoint_locks.setdefault(endpoint, threading.Lock())


def extract_transcript(payload, key_path):
    """Follows a dotted key path (``data.transcript``, ``results.0.text``).

    Anything that is not a string at the end of the path counts as "no
    speech" and becomes the empty transcript.
    """
    node = payload
    for key in key_path.split('.'):
        if isinstance(node, list) and key.isdigit() and int(key) < len(node):
            node = node[int(key)]
        elif isinstance(node, dict) and key in node:
            node = node[key]
        else:
            return ""
    return node if isinstance(node, str) else ""


class RemoteOracle(TranscriptionOracle):
    def __init__(self, config, name="remote"):
        config.validate()
        self.config = config
        self.name = name
        if config.cache_path:
            os.makedirs(config.cache_path, exist_ok=True)

    def _cache_file(self, key):
        return os.path.join(self.config.cache_path, f"{key}.txt")

    def transcribe(self, buffer):
        body = encode_wav(buffer)
        key = content_hash(body)

        if self.config.cache_path and os.path.exists(self._cache_file(key)):
            logger.debug(f"cache hit {key}")
            with open(self._cache_file(key), encoding='utf-8') as f:
                return Transcript(f.read())

        text = self._request(body)

        if self.config.cache_path:
            with open(self._cache_file(key), 'w', encoding='utf-8') as f:
                f.write(text)
        return Transcript(text)

    def _wait_for_slot(self):
        interval = self.config.min_interval_ms / 1000
        last = _last_request.get(self.config.endpoint)
        if last is not None and interval > 0:
            remaining = interval - (time.monotonic() - last)
            if remaining > 0:
                time.sleep(remaining)
        _last_request[self.config.endpoint] = time.monotonic()

    def _request(self, body):
        config = self.config
        headers = {'Content-Type': config.content_type}
        if config.token:
            headers['x-apikey'] = config.token

        failure = None
        for attempt in range(config.max_retries + 1):
            if attempt:
                delay = config.backoff_ms / 1000 * 2 ** (attempt - 1)
                if isinstance(failure, RateLimited) and failure.retry_after:
                    delay = max(delay, failure.retry_after)
                logger.warning(f"{self.name}: retry {attempt}/{config.max_retries} "
                               f"in {delay:.2f}s after {failure.code}")
                time.sleep(delay)

            with _endpoint_lock(config.endpoint):
                self._wait_for_slot()
                try:
                    response = requests.post(config.endpoint, data=body, headers=headers,
                                             timeout=config.timeout_ms / 1000)
                except (requests.exceptions.ConnectionError, requests.exceptions.Timeout) as e:
                    failure = RemoteUnavailable(f"{config.endpoint}: {e}")
                    continue

            status = response.status_code
            if status in (401, 403):
                raise AuthFailure(f"{config.endpoint} answered {status}")
            if status == 429:
                retry_after = response.headers.get('Retry-After')
                failure = RateLimited(retry_after=float(retry_after)
                                      if retry_after and retry_after.isdigit() else None)
                continue
            if status >= 500:
                failure = RemoteUnavailable(f"{config.endpoint} answered {status}")
                continue
            if status >= 400:
                raise OracleError(f"{config.endpoint} rejected the request with {status}")

            try:
                payload = response.json()
            except ValueError:
                raise OracleError(f"{config.endpoint} did not answer with JSON")
            return extract_transcript(payload, config.transcript_key)

        raise failure
