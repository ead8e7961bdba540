"""
Deadbeat MPC toolkit: deadbeat design, constrained MPC, simulation and verification.
"""

__version__ = "1.0.0"
