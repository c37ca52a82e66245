"""Cooper pair correlations and decay bounds for gauged lattice fermions."""
__version__ = "0.1.0"
