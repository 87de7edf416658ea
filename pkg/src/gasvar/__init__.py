"""Score-driven volatility models for Value-at-Risk forecasting and backtesting."""

__version__ = "0.1.0"
