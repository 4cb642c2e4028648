"""ucodec: 5 Hz neural speech codec with a hierarchical token language model."""

__version__ = "0.1.0"
