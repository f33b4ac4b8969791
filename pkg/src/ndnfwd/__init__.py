"""Packet-level NDN data-plane simulator with pluggable forwarding strategies.

The package is organised around a deterministic discrete-event engine
(`engine`), the NDN router data structures (`core`), per-face measurements
(`measurements`), the forwarding strategies (`strategies`, `dqnaf`), a small
neural-network stack used by the DQN strategy (`neural`), and an experiment
harness (`scenario`, `harness`, `cli`) that reproduces a two-path link
instability benchmark and writes per-run CSV metrics.
"""

__version__ = "0.1.0"
