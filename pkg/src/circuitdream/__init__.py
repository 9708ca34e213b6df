"""Circuit generation, energy regression and input-space gradient descent on circuits."""

__version__ = "0.1.0"
