"""birchlab: a desk-scale numerical laboratory for discrete averaging
operators over integral hypersurfaces."""

__version__ = "0.1.0"
