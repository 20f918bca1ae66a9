"""volcast: daily realized-volatility forecasting with fused market and news signals."""

__version__ = "0.1.0"
