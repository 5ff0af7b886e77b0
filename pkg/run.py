from prometheus_client import make_wsgi_app
from werkzeug.middleware.dispatcher import DispatcherMiddleware

from configs import ServerConfig
from spectral_captcha.asr.mock import MockOracleModel
from spectral_captcha.cli import cli
from spectral_captcha.exceptions import UsageError
from spectral_captcha.server import create_app

config = ServerConfig()
if not config.model_path:
    raise UsageError("set MOCK_ORACLE_MODEL to a fitted mock oracle (spectral-captcha fit)")

app = create_app(MockOracleModel.load(config.model_path), config)
app.cli.add_command(cli, 'captcha')

# Add prometheus wsgi middleware to route /metrics requests
app_dispatch = DispatcherMiddleware(app, {
    '/metrics': make_wsgi_app()
})
