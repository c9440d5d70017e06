"""Free energy, Gaussian measures, random streams and quadrature."""
