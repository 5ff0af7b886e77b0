from flask import current_app
from healthcheck import EnvironmentDump, HealthCheck

from spectral_captcha import API_VERSION


def add_health_check(app):
    health = HealthCheck()
    envdump = EnvironmentDump()

    health.add_check(oracle_loaded)
    health.add_section("application", application_data)
    envdump.add_section("application", application_data)

    app.add_url_rule("/healthz", "healthcheck", view_func=lambda: health.run())
    app.add_url_rule("/environment", "environment", view_func=lambda: envdump.run())


def oracle_loaded():
    oracle = current_app.extensions.get('mock_oracle')
    if oracle is None:
        return False, "no oracle model loaded"
    return True, f"{len(oracle.model.labels)} labels"


def application_data():
    return dict(
        apiVersion=API_VERSION,
        status="ok",
        status_code=200,
        data=None
    )
