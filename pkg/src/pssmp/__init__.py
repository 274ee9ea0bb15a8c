"""Simulation and verification toolkit for positive self-similar Markov
processes built from Lévy processes by the Lamperti transformation."""
from .levy_model import JumpLaw, LevySpec, catalogue
from .pathkit import PathSkeleton

__version__ = "0.1.0"
__all__ = ["JumpLaw", "LevySpec", "PathSkeleton", "catalogue", "__version__"]
