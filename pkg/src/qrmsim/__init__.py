"""Simulator for a driven multi-qubit quantum Rabi (Dicke) model in circuit QED."""

__version__ = "0.1.0"
