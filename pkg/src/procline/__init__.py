"""procline: feature models, product derivation, and a variability-aware
process engine for process product lines."""

__version__ = "0.1.0"
