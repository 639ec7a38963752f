"""Directional multiuser MIMO downlink simulator.

Builds channel covariances from cluster or discrete multi-path
descriptions, selects compatible users on a conflict graph, constructs
two-stage (pre-beamforming + zero-forcing) precoders, and evaluates sum
spectral efficiency over SNR or transmit-power sweeps.
"""

__version__ = "0.1.0"
