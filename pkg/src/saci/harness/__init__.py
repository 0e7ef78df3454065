"""Experiment orchestration: configs, training loops, checkpoints, metrics,
sweeps, plot-data export, and the command-line interface."""
