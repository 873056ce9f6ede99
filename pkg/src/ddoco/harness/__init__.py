"""Experiment configuration, runs, sweeps and the command line."""
