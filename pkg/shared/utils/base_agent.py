"""
Base Agent Class for fidelity_agents

This module provides the foundation for the pipeline stages of fidelity_agents.
Each stage (prep, train, phase1, phase2, phase3, report) is an agent that
inherits from BaseAgent and turns an AgentTask into an AgentResult, so the
orchestrator can route commands, time them and map failures to exit codes.
"""

import json
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional

import colorlog
import yaml

from shared.utils.exceptions import FidelityError

LOGGER_NAMESPACE = "fidelity_agents"


def setup_logging(name: str, level: str = "INFO") -> logging.Logger:
    """
    Return a logger under the fidelity_agents namespace with a colored handler

    The handler is attached once to the namespace root, so every module logger
    (``fidelity_agents.models``, ``fidelity_agents.phase3`` ...) shares it.

    Args:
        name: Logger suffix, usually the agent or module name
        level: Logging level name

    Returns:
        Configured logger
    """
    root = logging.getLogger(LOGGER_NAMESPACE)
    if not root.handlers:
        handler = colorlog.StreamHandler()
        handler.setFormatter(colorlog.ColoredFormatter(
            '%(log_color)s%(asctime)s - %(name)s - %(levelname)s - %(message)s'
        ))
        root.addHandler(handler)
        root.propagate = False
    root.setLevel(level.upper())
    return logging.getLogger(f"{LOGGER_NAMESPACE}.{name}")


@dataclass
class AgentTask:
    """Represents a task that can be executed by an agent"""
    id: str
    agent_type: str
    action: str
    parameters: Dict[str, Any] = field(default_factory=dict)
    created_at: str = None
    status: str = "pending"  # pending, running, completed, failed

    def __post_init__(self):
        if self.created_at is None:
            self.created_at = datetime.now().isoformat()


@dataclass
class AgentResult:
    """Standard result format for agent operations"""
    success: bool
    data: Any = None
    metadata: Dict[str, Any] = None
    error_message: str = None
    execution_time: float = 0.0
    timestamp: str = None

    def __post_init__(self):
        if self.timestamp is None:
            self.timestamp = datetime.now().isoformat()
        if self.metadata is None:
            self.metadata = {}

    @property
    def exit_code(self) -> int:
        """Process exit code implied by this result"""
        if self.success:
            return 0
        return int(self.metadata.get("exit_code", 1))


class BaseAgent(ABC):
    """
    Base class for all pipeline agents in fidelity_agents.

    Provides common functionality for:
    - Configuration management
    - Logging
    - Task execution with timing and error capture
    """

    def __init__(self, agent_name: str, config: Optional[Dict[str, Any]] = None,
                 config_path: Optional[str] = None):
        """
        Initialize the base agent

        Args:
            agent_name: Unique name for this agent
            config: Optional in-memory configuration overriding the defaults
            config_path: Optional path to an agent-specific config file (YAML or JSON)
        """
        self.agent_name = agent_name
        self.config_path = config_path
        self.config = self._load_config(config)
        self.logger = setup_logging(self.agent_name, self.config.get("log_level", "INFO"))
        self.logger.debug(f"Agent {self.agent_name} initialized")

    def _load_config(self, config: Optional[Dict[str, Any]]) -> Dict[str, Any]:
        """Load agent configuration: defaults, then config file, then in-memory overrides"""
        default_config = {
            "output_directory": "./outputs",
            "log_level": "INFO"
        }

        if self.config_path and Path(self.config_path).exists():
            with open(self.config_path, 'r', encoding='utf-8') as f:
                if str(self.config_path).endswith(('.yaml', '.yml')):
                    user_config = yaml.safe_load(f) or {}
                else:
                    user_config = json.load(f)
            default_config.update(user_config)

        if config:
            default_config.update(config)
        return default_config

    @abstractmethod
    def get_capabilities(self) -> List[str]:
        """
        Return list of capabilities this agent provides

        Returns:
            List of action names
        """

    @abstractmethod
    def run_action(self, action: str, parameters: Dict[str, Any]) -> Any:
        """
        Run one action and return its payload

        Args:
            action: One of get_capabilities()
            parameters: Action parameters

        Returns:
            Action payload stored in AgentResult.data
        """

    def validate_task(self, task: AgentTask) -> bool:
        """True if this agent can handle the given task"""
        return task.action in self.get_capabilities()

    def execute_task(self, task: AgentTask) -> AgentResult:
        """
        Execute a task assigned to this agent

        Errors raised by the action are captured in the result; the exit code
        of a FidelityError travels in result.metadata["exit_code"].

        Args:
            task: The task to execute

        Returns:
            AgentResult containing execution results
        """
        start_time = datetime.now()

        if not self.validate_task(task):
            return AgentResult(
                success=False,
                error_message=f"Agent {self.agent_name} cannot handle task: {task.action}",
                metadata={"exit_code": 1}
            )

        task.status = "running"
        try:
            self.logger.info(f"Executing task: {task.action}")
            data = self.run_action(task.action, task.parameters)
            task.status = "completed"
            return AgentResult(
                success=True,
                data=data,
                execution_time=(datetime.now() - start_time).total_seconds()
            )
        except FidelityError as e:
            task.status = "failed"
            self.logger.error(f"Task {task.action} failed: {e}")
            return AgentResult(
                success=False,
                error_message=str(e),
                metadata={"exit_code": e.exit_code, "error_type": type(e).__name__},
                execution_time=(datetime.now() - start_time).total_seconds()
            )
        except Exception as e:
            task.status = "failed"
            self.logger.exception(f"Task {task.action} failed unexpectedly: {e}")
            return AgentResult(
                success=False,
                error_message=str(e),
                metadata={"exit_code": 1, "error_type": type(e).__name__},
                execution_time=(datetime.now() - start_time).total_seconds()
            )

    def get_status(self) -> Dict[str, Any]:
        """
        Get current agent status

        Returns:
            Dictionary containing agent status information
        """
        return {
            "agent_name": self.agent_name,
            "capabilities": self.get_capabilities(),
            "config": self.config,
        }


class AgentRegistry:
    """
    Registry for managing the pipeline agents
    """

    def __init__(self):
        self.agents: Dict[str, BaseAgent] = {}
        self.logger = logging.getLogger(f"{LOGGER_NAMESPACE}.registry")

    def register_agent(self, agent: BaseAgent) -> None:
        """Register an agent in the system"""
        self.agents[agent.agent_name] = agent
        self.logger.debug(f"Registered agent: {agent.agent_name}")

    def get_agent(self, agent_name: str) -> Optional[BaseAgent]:
        """Get agent by name"""
        return self.agents.get(agent_name)

    def list_agents(self) -> List[str]:
        """Get list of registered agent names"""
        return list(self.agents.keys())

    def find_agents_for_capability(self, capability: str) -> List[str]:
        """Names of the agents that provide a capability"""
        return [
            name for name, agent in self.agents.items()
            if capability in agent.get_capabilities()
        ]

    def execute_task(self, agent_name: str, task: AgentTask) -> AgentResult:
        """
        Execute a task on a specific agent

        Args:
            agent_name: Name of agent to execute task on
            task: Task to execute

        Returns:
            Result from agent execution
        """
        agent = self.get_agent(agent_name)
        if not agent:
            return AgentResult(
                success=False,
                error_message=f"Agent {agent_name} not found",
                metadata={"exit_code": 1}
            )

        return agent.execute_task(task)


# Global registry instance
agent_registry = AgentRegistry()
