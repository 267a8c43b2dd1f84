"""Operator fidelity susceptibility of two nonlinearly coupled 2D oscillators.

The model is the dilated semiparabolic form of hydrogen in a uniform
magnetic field. The library builds the truncated even-parity Hamiltonian,
diagonalizes it over a coupling grid, and evaluates level-spacing
statistics and both terms of the operator fidelity susceptibility.
"""

__version__ = "0.1.0"
