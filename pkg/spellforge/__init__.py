"""Forecasting long-term income-support receipt from payment spell histories."""

__version__ = "0.1.0"
