"""Multi-bump solutions of the Schrödinger–Newton system: numerics at desk scale."""

__version__ = "0.1.0"
