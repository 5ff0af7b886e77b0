from flask import jsonify

from spectral_captcha import API_VERSION

err_map = {
    400: "Bad Request",
    401: "Unauthorized",
    404: "Not Found",
    405: "Method Not Allowed",
    413: "Payload Too Large",
    422: "Unprocessable Entity",
    429: "Rate Limit Exceeded",
    500: "Server Error"
}

msg_map = {
    400: "The request could not be read as audio.",
    401: "Send the service key in the x-apikey header.",
    404: "No such route. Try /api/v1/transcribe or /api/v1/labels.",
    405: "This route does not accept that method.",
    413: "The audio file is larger than this service accepts.",
    422: "The request body is not a usable recording.",
    429: "Too many transcription requests. Slow down and retry.",
    500: "The oracle failed while transcribing."
}


def slug(status_code):
    return err_map[status_code].lower().replace(' ', '-')


def error_response(error, status_code=422):
    """Envelope for a :class:`CaptchaError`, keyed by its code."""
    return standardize_response(payload=error.serialize, status_code=status_code)


def standardize_response(payload=None, status_code=200):
    """Response helper

    Wraps ``payload['data']`` or ``payload['errors']`` in the service's
    envelope. Error codes without explicit errors get the default message
    for that code; a success without data is answered as a 500.
    """
    payload = payload or {}
    data, errors = payload.get("data"), payload.get("errors")
    resp = dict(apiVersion=API_VERSION, status="ok", status_code=status_code, data=None)

    if status_code >= 400 and status_code in err_map:
        resp["status"] = err_map[status_code]
        resp["errors"] = errors or {slug(status_code): {"message": msg_map[status_code]}}
    elif data is None:
        resp["status"], resp["status_code"] = err_map[500], 500
        resp["errors"] = {"server-error": {"message": msg_map[500]}}
    else:
        resp["data"] = data

    return jsonify(resp), resp["status_code"], {'Content-Type': 'application/json'}
