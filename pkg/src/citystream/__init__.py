"""citystream: seeded smart-city sensor simulation and edge filtering benchmark."""

__version__ = "0.1.0"
