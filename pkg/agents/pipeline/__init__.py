"""
Pipeline agent package

Run configuration, the run manifest and the stage agents behind the
command-line commands.
"""

from .run_config import (
    DEFAULT_CONFIG,
    MANIFEST_NAME,
    ConfigManager,
    RunConfig,
    RunManifest,
    deep_merge,
)
from .stage_agents import (
    STAGE_AGENTS,
    Phase1Agent,
    Phase2Agent,
    Phase3Agent,
    PipelineAgent,
    PrepAgent,
    ReportAgent,
    TrainAgent,
    collect_summary,
    summary_table,
)

__all__ = [
    "DEFAULT_CONFIG",
    "MANIFEST_NAME",
    "STAGE_AGENTS",
    "ConfigManager",
    "Phase1Agent",
    "Phase2Agent",
    "Phase3Agent",
    "PipelineAgent",
    "PrepAgent",
    "ReportAgent",
    "RunConfig",
    "RunManifest",
    "TrainAgent",
    "collect_summary",
    "deep_merge",
    "summary_table",
]
