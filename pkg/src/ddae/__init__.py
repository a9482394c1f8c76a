"""Denoising, contractive and double denoising auto-encoders in numpy."""

__version__ = "0.1.0"
