import io
from functools import wraps

from flask import request

from spectral_captcha.audio import decode_wav
from spectral_captcha.exceptions import AudioError
from spectral_captcha.server.utils import error_response, standardize_response


def requires_wav_body(func):
    """Decodes the request body and passes it on as ``buffer``."""
    @wraps(func)
    def wrapper(*args, **kwargs):
        body = request.get_data()
        if not body:
            return missing_body_error()
        try:
            buffer = decode_wav(io.BytesIO(body))
        except AudioError as e:
            return error_response(e)

        return func(*args, buffer=buffer, **kwargs)
    return wrapper


def missing_body_error():
    message = "You must send a mono 16-bit PCM WAV file as the request body"
    error = {'errors': {"missing-body": {"message": message}}}
    return standardize_response(error, status_code=422)
