# Shared utilities for fidelity_agents

__version__ = "1.0.0"
