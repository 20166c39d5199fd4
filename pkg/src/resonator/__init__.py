"""Scattering resonances of small layered high-contrast bodies."""
__version__ = "0.1.0"
