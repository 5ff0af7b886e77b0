from flask import Blueprint

bp = Blueprint('api', __name__)

# Routes bind to the blueprint on import, before it is registered.
from spectral_captcha.server.api import routes  # noqa
