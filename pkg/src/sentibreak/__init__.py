"""Daily multi-lexicon sentiment series, structural breaks, lagged price
regressions and a polarity-classifier benchmark for short-text corpora."""

__version__ = "0.1.0"
FORMAT_VERSION = "1"

from sentibreak.errors import ConfigError, DataError  # noqa: E402

__all__ = ["ConfigError", "DataError", "FORMAT_VERSION", "__version__"]
