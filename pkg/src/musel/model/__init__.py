from .dkl import Adam, ArchConfig, DklModel, NumericsError, Prediction
from .exact_gp import ExactGP

__all__ = ["Adam", "ArchConfig", "DklModel", "ExactGP", "NumericsError",
           "Prediction"]
