from flask import Blueprint

bp = Blueprint('errors', __name__)

from spectral_captcha.server.errors import handlers  # noqa
