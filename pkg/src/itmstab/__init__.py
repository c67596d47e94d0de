"""Precision-parameterised Longley-Rice ITM and a numerical-stability sweep harness."""

__version__ = "0.1.0"
