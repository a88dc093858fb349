""" Diffusion-based localization of a silent abnormality with mobile sensors and fusion centers.

Modules:
    numerics: Marcum Q, Bessel and Gaussian helpers.
    medium: Area geometry and the diffusion channel.
    clustering: Radial and grid cluster schemes.
    sensors: Sensor random walks and release timing.
    detection: Gateway decision rules.
    analysis: Closed-form error probabilities.
    sim: Monte Carlo trials.
    config: Scenario configuration.
    cli: Experiment runner.
"""
__version__ = "2025.1.0"
