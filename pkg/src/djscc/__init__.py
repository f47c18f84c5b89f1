"""Distributed deep joint source-channel coding for stereo image pairs."""

__version__ = "0.1.0"
