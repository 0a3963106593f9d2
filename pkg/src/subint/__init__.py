"""Plug-in estimation of integral functionals over submanifolds."""

__version__ = "0.1.0"
