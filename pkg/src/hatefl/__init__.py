"""Few-shot federated hate-speech classification simulator."""

__version__ = "0.1.0"
