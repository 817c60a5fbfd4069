"""
Logging configuration and setup
"""
import logging
from datetime import datetime
from pathlib import Path


def setup_logging(config_class):
    """Configure logging for a verifier run"""
    log_level = getattr(logging, str(config_class.LOG_LEVEL).upper(), logging.INFO)

    # Configure logging format
    log_format = '%(asctime)s - %(name)s - %(levelname)s - [%(filename)s:%(lineno)d] - %(message)s'

    root_logger = logging.getLogger()
    root_logger.setLevel(logging.DEBUG)  # Root logger catches all

    # Clear existing handlers to avoid duplicates
    root_logger.handlers.clear()

    # Console handler
    console_handler = logging.StreamHandler()
    console_handler.setLevel(log_level)
    console_handler.setFormatter(logging.Formatter(log_format))
    root_logger.addHandler(console_handler)

    log_filename = None
    if config_class.LOG_TO_FILE:
        log_dir = Path(config_class.OUTPUT_DIR) / 'logs'
        log_dir.mkdir(parents=True, exist_ok=True)
        log_filename = log_dir / f"verifier_{datetime.now().strftime('%Y%m%d')}.log"

        # File gets everything
        file_handler = logging.FileHandler(log_filename, encoding='utf-8')
        file_handler.setLevel(logging.DEBUG)
        file_handler.setFormatter(logging.Formatter(log_format))
        root_logger.addHandler(file_handler)

    # Reduce noise from third-party libraries
    logging.getLogger('numpy').setLevel(logging.WARNING)
    logging.getLogger('concurrent').setLevel(logging.WARNING)

    logger = logging.getLogger('app')
    logger.debug("=" * 60)
    logger.debug("Lagrangian submanifold verifier starting")
    if log_filename:
        logger.debug(f"Log file: {log_filename}")
    logger.debug("=" * 60)
    return log_filename
