"""Target-set selection for random walks on graphs and MDPs."""

__version__ = "0.1.0"
