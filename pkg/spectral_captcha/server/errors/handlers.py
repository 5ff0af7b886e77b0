from spectral_captcha.exceptions import AudioError, CaptchaError
from spectral_captcha.server.errors import bp
from spectral_captcha.server.utils import error_response, standardize_response
from spectral_captcha.utils import setup_logger

logger = setup_logger('errors_logger')


@bp.app_errorhandler(AudioError)
def audio_error(e):
    return error_response(e, status_code=422)


@bp.app_errorhandler(CaptchaError)
def oracle_error(e):
    logger.error(f"Oracle failed: {e.code}: {e.message}")
    return error_response(e, status_code=500)


@bp.app_errorhandler(400)
@bp.app_errorhandler(404)
@bp.app_errorhandler(405)
@bp.app_errorhandler(413)
@bp.app_errorhandler(429)
def http_error(e):
    return standardize_response(status_code=e.code)


@bp.app_errorhandler(500)
def internal_server_error(e):
    logger.error(f"Unhandled error: {e}")
    return standardize_response(status_code=500)
