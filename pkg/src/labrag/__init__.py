"""labrag: retrieval-augmented personalized lab-test normal ranges."""

__version__ = "0.1.0"
