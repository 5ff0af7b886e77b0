from flask import current_app
from prometheus_client import Counter, Summary

from spectral_captcha.asr import transcribe
from spectral_captcha.server.api import bp
from spectral_captcha.server.api.auth import authenticate
from spectral_captcha.server.api.validations import requires_wav_body
from spectral_captcha.server.utils import standardize_response
from spectral_captcha.utils import setup_logger

# Metrics
failures_counter = Counter('service_failures_total', 'Number of exceptions raised by the service')
latency_summary = Summary('service_request_latency_seconds', 'Length of request')

logger = setup_logger('routes_logger')


def oracle():
    return current_app.extensions['mock_oracle']


# Routes
@bp.route('/transcribe', methods=['POST'], endpoint='transcribe')
@latency_summary.time()
@failures_counter.count_exceptions()
@authenticate
@requires_wav_body
def post_transcribe(buffer):
    transcript = transcribe(oracle(), buffer)
    logger.info(f"Transcribed {len(buffer)} samples: {'empty' if transcript.is_empty else 'text'}")
    return standardize_response(payload=dict(data={
        'transcript': transcript.text, 'is_empty': transcript.is_empty}))


@bp.route('/labels', methods=['GET'], endpoint='labels')
@latency_summary.time()
@failures_counter.count_exceptions()
@authenticate
def get_labels():
    return standardize_response(payload=dict(data={'labels': oracle().model.labels}))
