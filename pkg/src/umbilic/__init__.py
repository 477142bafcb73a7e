"""Numerical toolkit for totally umbilical isothermal immersions with harmonic metric."""

__version__ = "0.1.0"
