import logging
import os
from logging.handlers import RotatingFileHandler

LOGGER_NAME = "SicToolLogger"


def setup_logging(level=logging.INFO, log_dir="logs"):
    """Configures and initializes the logging for the whole simulator.

    This function sets up a centralized logger named 'SicToolLogger'.
    It configures two handlers:
    1.  **RotatingFileHandler**: Writes log messages to `logs/sim_history.log`.
        The file is rotated when it reaches 1MB, and up to 5 backup files are
        kept, so long sweeps leave a persistent trace of what was run.
    2.  **StreamHandler**: Writes log messages to the console (stderr) for
        immediate feedback from the command line.

    Calling the function again replaces the handlers instead of stacking them,
    which is how the CLI switches to DEBUG output for `--verbose`.

    Args:
        level (int, optional): Logging level for the logger and both handlers.
            Defaults to logging.INFO.
        log_dir (str, optional): Directory that receives the rotating log file.
            Defaults to "logs".

    Returns:
        logging.Logger: The configured logger instance for the application.
    """
    if not os.path.exists(log_dir):
        os.makedirs(log_dir)

    log_file = os.path.join(log_dir, "sim_history.log")

    logger = logging.getLogger(LOGGER_NAME)
    logger.setLevel(level)

    # Prevent adding handlers multiple times
    if logger.hasHandlers():
        logger.handlers.clear()

    file_handler = RotatingFileHandler(log_file, maxBytes=1024 * 1024, backupCount=5, encoding="utf-8")
    file_handler.setLevel(level)
    file_formatter = logging.Formatter("%(asctime)s - %(levelname)s - %(message)s (%(filename)s:%(lineno)d)")
    file_handler.setFormatter(file_formatter)
    logger.addHandler(file_handler)

    stream_handler = logging.StreamHandler()
    stream_handler.setLevel(level)
    stream_formatter = logging.Formatter("%(levelname)s: %(message)s")
    stream_handler.setFormatter(stream_formatter)
    logger.addHandler(stream_handler)

    return logger
