"""Fixed-order Markov capacity of finite-state channels by gradient ascent
on approximating objective sequences."""

__version__ = "0.1.0"
