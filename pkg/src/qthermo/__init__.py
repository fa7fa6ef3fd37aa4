"""Qubit open-system thermodynamics: channels, first-law ledgers and non-Markovianity witnesses."""

__version__ = "0.1.0"
