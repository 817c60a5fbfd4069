"""
Error types and their mapping to exit statuses
"""
import logging

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG_ERROR = 2
EXIT_INTERNAL_ERROR = 3


class VerifierError(Exception):
    """Base class for every error raised by the verifier"""

    def __init__(self, message, location=None):
        super().__init__(message)
        self.message = message
        self.location = location

    def __str__(self):
        if self.location is None:
            return self.message
        return f"{self.message} (at {self.location})"


class ConfigurationError(VerifierError):
    """Invalid run configuration or example parameters"""


class ConfigParseError(ConfigurationError):
    """Configuration text is not well-formed"""

    def __init__(self, message, line=None, column=None):
        super().__init__(message, location=f"line {line}, column {column}" if line else None)
        self.line = line
        self.column = column


class ConfigValidationError(ConfigurationError):
    """A configuration field failed validation"""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


class InvalidInputError(VerifierError):
    """Non-finite or malformed numerical input"""


class DomainError(VerifierError):
    """Parameter point outside the chart domain"""


class EvaluationError(VerifierError):
    """Immersion evaluation produced non-finite values"""


class ChartConditioningError(VerifierError):
    """Point is not well-conditioned in the active affine chart"""


class DegenerateImmersionError(VerifierError):
    """Differential of the immersion is (numerically) rank deficient"""


class UnsupportedAmbientError(VerifierError):
    """Ambient space outside C^n and CP^n"""


class CheckFailure(VerifierError):
    """One or more configured checks did not pass"""


def _payload(title, error, status_code):
    return {
        'error': title,
        'message': getattr(error, 'message', str(error)),
        'location': None if getattr(error, 'location', None) is None else str(error.location),
        'status_code': status_code
    }


def register_error_handlers(app):
    """Register error handlers for the verifier app"""

    @app.errorhandler(ConfigurationError)
    def configuration_error(error):
        logger.warning(f"Configuration error: {str(error)}")
        payload = _payload('Configuration Error', error, EXIT_CONFIG_ERROR)
        if isinstance(error, ConfigValidationError):
            payload['field'] = error.field
        return payload, EXIT_CONFIG_ERROR

    @app.errorhandler(CheckFailure)
    def check_failure(error):
        logger.warning(f"Checks failed: {str(error)}")
        return _payload('Check Failed', error, EXIT_CHECK_FAILED), EXIT_CHECK_FAILED

    @app.errorhandler(VerifierError)
    def numerical_error(error):
        logger.error(f"Numerical error: {str(error)}", exc_info=True)
        return _payload(type(error).__name__, error, EXIT_INTERNAL_ERROR), EXIT_INTERNAL_ERROR

    @app.errorhandler(Exception)
    def handle_exception(error):
        logger.error(f"Unhandled exception: {str(error)}", exc_info=True)
        return _payload('Internal Error', error, EXIT_INTERNAL_ERROR), EXIT_INTERNAL_ERROR
