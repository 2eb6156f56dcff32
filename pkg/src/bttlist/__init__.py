"""List decoding of Reed-Solomon codes with subfield evaluation points,
BTT structured lists, subspace designs and BTT evasive subspaces."""

__version__ = "0.1.0"
