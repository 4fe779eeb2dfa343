"""Desk-scale agent-based passenger and freight microsimulation toolkit.

Synthesizes a prototype grid city, simulates pre-day passenger and freight
demand on a mesoscopic network with day-to-day learning, designs
congestion-pricing schemes (distance, cordon, area) from simulated marginal
external costs, and evaluates welfare, distributional, network, and logistics
impacts.
"""

__version__ = "0.1.0"
