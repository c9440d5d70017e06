"""Monte Carlo estimators with batch-means confidence intervals."""
