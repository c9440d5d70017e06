"""Experiment runner: manifests, subcommands and report writers."""
