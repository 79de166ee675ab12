"""Secure beamforming with polarization sensitive arrays.

Modules
-------
em
    Array and electromagnetic signal model (steering, manifold, pointing).
convex
    Dense SDP solver, rank-1 penalty loop, generalized eigenproblems, bisection.
simo
    Point-to-point design: pointing, receive beamformers, power allocation.
relay
    Amplify-and-forward relay design by alternating optimization.
robust
    Relay design under a bounded pointing error.
csa
    Conventional scalar array baseline.
harness, config, cli
    Monte Carlo experiments driven by TOML scenario files.
"""

__version__ = "0.1.0"
