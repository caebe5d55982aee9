"""Simulation and decision engine for two-stage adaptive enrichment trials
that use a surrogate endpoint in the interim conditional power."""

__version__ = "0.1.0"
