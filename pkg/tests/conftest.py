"""Shared test configuration.

Hypothesis runs with deadline checking disabled: individual examples routinely
hit scipy integrators whose first call pays a one-off compilation or setup
cost, and wall-clock deadlines would turn those into flaky failures.
"""

from hypothesis import HealthCheck, settings

settings.register_profile(
    "molmech",
    deadline=None,
    max_examples=25,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("molmech")
