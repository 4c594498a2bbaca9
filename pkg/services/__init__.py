"""
Service layer for experiment orchestration.

This package contains the service that turns a resolved experiment
config into simulation runs and CSV/JSON artifacts.
"""
