"""Numerical laboratory for Littlewood-Paley analysis, Besov norms and heat flows."""
from .spectral import Field, Grid, build_cutoffs
from .besov import BesovIndex, besov_norm, lebesgue_norm

__all__ = ["Field", "Grid", "build_cutoffs", "BesovIndex", "besov_norm", "lebesgue_norm"]
__version__ = "0.1.0"
