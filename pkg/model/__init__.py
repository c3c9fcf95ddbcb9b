"""
Model package: lattices, interactions, exact dynamics, certificates and the
norm-preserving flow suite. Nothing here depends on Flask.
"""

__all__ = []
