"""Soft actor-critic with inhibitory networks.

A self-contained continuous-control RL library: plain SAC, the
inhibitory-network extension (branch-partitioned replay, dual temperatures,
composite policy objective, learned inhibition), desk-scale stop-signal
environments, a wire protocol for external environments, and an experiment
harness with CLI.
"""

__version__ = "0.1.0"
