"""Spin-glass models: REM, SK, overlaps and Poincaré audits."""
