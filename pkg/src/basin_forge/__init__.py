"""Attracting-basin approximation of Riemann-sphere regions by rational maps."""
import warnings

warnings.filterwarnings("ignore", message="The TBB threading layer")

__version__ = "0.1.0"
