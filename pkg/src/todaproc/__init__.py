"""todaproc: exact and high-precision computations around discrete Toda
difference operators, the quadratic-rate death arrays they generate, the
absorption-time laws of the associated Doob chains, and the maximum laws of
non-intersecting bridge ensembles, plus an event-driven simulator that
compares the two sides statistically."""

__version__ = "0.1.0"
