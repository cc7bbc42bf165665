"""Numerics for Schottky-uniformized Riemann surfaces.

Construction of Schottky groups from handle data, Poincare-series evaluation
of two-point kernels and third-kind differentials, canonical bases of
holomorphic N-differentials via contour-integral linear algebra, and the
induced moduli-variation operators.
"""
__version__ = "0.1.0"
