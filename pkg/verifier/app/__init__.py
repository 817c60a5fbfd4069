"""
Verifier application factory and initialization
"""
import logging

from app.config import Config, set_current_config
from app.utils.logger import setup_logging
from app.middleware.error_handler import register_error_handlers

__version__ = '1.0.0'
__all__ = ['create_app', 'Verifier', '__version__']

logger = logging.getLogger(__name__)


class Verifier:
    """Application object: active configuration, error handlers and command table"""

    def __init__(self, config_class):
        self.config_class = config_class
        self.config = {key: getattr(config_class, key) for key in dir(config_class) if key.isupper()}
        self.version = __version__
        self.error_handlers = {}
        self.commands = {}

    def errorhandler(self, exc_class):
        """Register a handler returning (payload, exit_status) for exc_class"""
        def decorator(fn):
            self.error_handlers[exc_class] = fn
            return fn
        return decorator

    def handle_exception(self, error):
        """Handler of the nearest registered class in the MRO; re-raises when none is registered"""
        for klass in type(error).__mro__:
            if klass in self.error_handlers:
                return self.error_handlers[klass](error)
        raise error

    def command(self, name):
        def decorator(fn):
            self.commands[name] = fn
            return fn
        return decorator


def create_app(config_class=Config):
    """Application factory pattern"""
    app = Verifier(config_class)
    set_current_config(config_class)

    # Setup logging
    setup_logging(config_class)

    # Register error handlers
    register_error_handlers(app)

    # Register commands
    from app.services.run_service import register_commands
    register_commands(app)

    logger.debug(f"Verifier {__version__} initialized with {config_class.__name__}")
    return app
