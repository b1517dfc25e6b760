"""Engineered decoherence of driven NV-center spin qudits: schedules, noise and Monte Carlo."""

__version__ = "0.1.0"
