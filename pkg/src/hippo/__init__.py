"""Watch-history-conditioned video highlighting toolkit."""

__version__ = "0.1.0"
