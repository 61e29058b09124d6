"""Operator-mediated off-chain payments with BLS-aggregated merchant commitments."""

__version__ = "0.1.0"
