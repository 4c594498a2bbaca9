"""
Command-line surface of the simulator.

This package parses arguments, resolves configs and dispatches
named experiments to the service layer.
"""
