"""Contact dynamics of stochastic vector bundles, integrated and certified numerically."""

__version__ = "0.1.0"
