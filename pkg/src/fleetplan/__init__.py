"""Multi-robot task allocation and planning from hierarchical temporal-logic
goals, with a receding-horizon executor and a human-aware world simulator."""

__version__ = "0.1.0"
