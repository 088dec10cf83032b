"""Trigonometric summation operators U^psi_{n,p} on (psi, beta)-classes.

Weights and their half-decay characteristics live in :mod:`psi_catalog`,
coefficient tools and L1 quadrature in :mod:`fourier_core`, multiplier
tables in :mod:`summation`, the (psi, beta)-derivative calculus in
:mod:`psi_class`, the class-error oracle in :mod:`oracle` and the predicted
main terms in :mod:`asymptotics`.
"""

__version__ = "0.1.0"
