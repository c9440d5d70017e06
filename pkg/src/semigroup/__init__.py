"""Ornstein–Uhlenbeck semigroup, decay curves and their quadrature."""
