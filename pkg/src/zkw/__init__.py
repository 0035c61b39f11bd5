"""Numerical workbench for the periodic Zakharov-Kuznetsov equation."""

__version__ = "0.1.0"
