"""
Shared test utilities for the pipeline agents
"""

from .testing_framework import FidelityTestFramework, StubExplainer

__all__ = ["FidelityTestFramework", "StubExplainer"]
