"""
Core infrastructure shared by the simulator.

This package contains:
- config: Application configuration and settings
- exceptions: Custom exception classes
- exporters: CSV and metadata export
- logger: Logging configuration
- parsing: Experiment config loading and overrides
- schema: Pydantic models for experiment configs
"""
