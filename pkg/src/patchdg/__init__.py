"""Unfitted DG for elliptic interface problems with patch-reconstructed spaces."""

__version__ = "0.1.0"
