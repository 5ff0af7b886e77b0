"""A small HTTP transcription service backed by a fitted mock oracle.

It speaks the same contract the remote oracle client expects, so whole
pipelines can run against a real network endpoint offline.
"""
from flask import Flask
from flask_limiter import Limiter
from flask_limiter.util import get_remote_address

from configs import ServerConfig
from spectral_captcha.asr.mock import MockOracle
from spectral_captcha.server.healthcheck import add_health_check


def create_app(model, config=None):
    config = config or ServerConfig()
    app = Flask(__name__, static_folder=None)
    app.config['MAX_CONTENT_LENGTH'] = config.max_content_length
    app.config['ORACLE_API_KEY'] = config.api_key
    app.url_map.strict_slashes = False
    app.extensions['mock_oracle'] = MockOracle(model, name="mock-service")

    Limiter(
        get_remote_address,
        app=app,
        default_limits=config.default_limits,
        storage_uri="memory://",
    )

    from spectral_captcha.server.api import bp as api_bp
    app.register_blueprint(api_bp, url_prefix='/api/v1')

    from spectral_captcha.server.errors import bp as error_bp
    app.register_blueprint(error_bp)

    add_health_check(app)

    return app
