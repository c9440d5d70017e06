"""Superconcentration lab: Gamma-calculus variance bounds checked numerically."""
