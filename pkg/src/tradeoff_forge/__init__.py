"""Trade-off mapping engine for legally aligned model selection."""

__version__ = "0.1.0"
