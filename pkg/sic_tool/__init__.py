from .logger_config import setup_logging

__version__ = "0.1.0"

# Ensure logging is configured as soon as the package is imported
setup_logging()
