"""gsn-shaper: Simple Generative Stochastic Networks with collaborative shaping."""

__version__ = "0.1.0"
