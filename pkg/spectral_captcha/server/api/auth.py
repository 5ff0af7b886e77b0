import hmac
from functools import wraps

from flask import current_app, request

from spectral_captcha.server.utils import standardize_response
from spectral_captcha.utils import setup_logger

logger = setup_logger('auth_logger')


def authenticate(func):
    """Requires the configured key in ``x-apikey``; open when no key is configured."""
    @wraps(func)
    def wrapper(*args, **kwargs):
        expected = current_app.config.get('ORACLE_API_KEY')
        if expected:
            apikey = request.headers.get('x-apikey') or ''
            if not hmac.compare_digest(apikey.encode(), expected.encode()):
                logger.warning(f"Rejected key on {request.path} from {request.remote_addr}")
                return standardize_response(status_code=401)

        log_request(request)

        return func(*args, **kwargs)
    return wrapper


def log_request(request):
    logger.info(f"Client: {request.remote_addr} Route: {request.method} {request.path} "
                f"Bytes: {request.content_length or 0}")
