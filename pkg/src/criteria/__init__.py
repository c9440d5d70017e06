"""Inequality checkers, criterion functions and variance bounds."""
