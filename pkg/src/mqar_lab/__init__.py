"""Desk-scale laboratory for multi-query associative recall (MQAR)."""

from . import analysis, constructions, datagen, mixers, numerics, oracle, training

__all__ = ["analysis", "constructions", "datagen", "mixers", "numerics", "oracle", "training"]
__version__ = "0.1.0"
