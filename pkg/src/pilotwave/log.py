import logging

FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


def create_logger(name="pilotwave", level="INFO"):
    """Configure a logger with a single stream handler.

    Library modules log through logging.getLogger(__name__); the CLI calls
    this once for the package logger so everything below it propagates here.
    """
    logger = logging.getLogger(name)
    logger.setLevel(getattr(logging, str(level).upper()))
    if not logger.handlers:
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter(FORMAT))
        logger.addHandler(handler)
    return logger
