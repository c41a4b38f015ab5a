import logging

LOG_FORMAT = "%(asctime)s %(name)s %(levelname)s %(message)s"


def configure_logging(verbosity=0, stream=None):
    """Install a single stream handler on the ``wanco`` logger.

    ``verbosity`` below zero shows warnings only, zero shows INFO and anything
    higher shows DEBUG. Calling it again replaces the previous handler.
    """
    logger = logging.getLogger("wanco")
    for handler in list(logger.handlers):
        logger.removeHandler(handler)

    handler = logging.StreamHandler(stream)
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    logger.addHandler(handler)
    logger.propagate = False

    if verbosity < 0:
        logger.setLevel(logging.WARNING)
    elif verbosity == 0:
        logger.setLevel(logging.INFO)
    else:
        logger.setLevel(logging.DEBUG)
    return logger
