"""Desk-scale vibration sensing stack.

Simulated geophone devices stream 24-bit samples over a parity-protected
UDP framing to an edge hub that recovers corrupted packets, stores signal
segments, analyzes them (events, SNR, spectrograms, activity recognition),
and serves an interactive sensor-placement recommendation dialog.
"""

__version__ = "0.1.0"

RNG_ALGORITHM = "numpy-pcg64"  # recorded in run manifests so traces are replayable
