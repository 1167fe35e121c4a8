"""Simulation library for a seismic-plus-thermal elephant deterrence network.

The package covers the full pipeline: synthetic rumble and bee-buzz signals,
windowed seismic detection scoring, time-varying playback deterrents,
peripheral and central node state machines, a simulated pub/sub mesh with
broker failover, and a scenario harness with reproducible metrics.
"""

__version__ = "0.1.0"
