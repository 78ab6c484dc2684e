"""Performance analysis of an optical-uplink / IRS-assisted RF-downlink relay
through a high-altitude platform: channel models, Mellin–Barnes special
functions, closed-form metrics, oracles and a Monte Carlo simulator."""

__version__ = "0.1.0"
