"""Finite-memory Nash equilibria for multi-player games on finite graphs."""
from .arena import GameGraph, GameSpec, LassoRun, MealyStrategy, Ownership, play, validate
from .io import load_game

__all__ = ["GameGraph", "GameSpec", "LassoRun", "MealyStrategy", "Ownership", "load_game", "play", "validate"]
__version__ = "0.1.0"
