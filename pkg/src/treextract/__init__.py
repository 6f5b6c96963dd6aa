"""Explanation-guided model extraction against decision-tree classifiers."""

__version__ = "0.1.0"
