#!/usr/bin/env python3
"""
Fidelity Orchestrator for fidelity_agents

Main entry point. Each command is routed to its stage agent; the agents share
one output directory whose manifest carries the config snapshot from step to
step.

Usage:
    python fidelity_orchestrator.py prep --data diabetes.csv --target Outcome --balance --out runs/diabetes
    python fidelity_orchestrator.py train --model tree --out runs/diabetes
    python fidelity_orchestrator.py phase1 --explainer tree_shapley --out runs/diabetes
    python fidelity_orchestrator.py phase3 --model ensemble --explainer surrogate --out runs/diabetes
    python fidelity_orchestrator.py report --runs runs/diabetes runs/breast_cancer --out runs/summary
"""

import argparse
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

# Add project root to path for imports
sys.path.insert(0, str(Path(__file__).parent))

from agents.pipeline.run_config import ConfigManager, RunConfig, RunManifest, deep_merge
from agents.pipeline.stage_agents import STAGE_AGENTS
from shared.utils.base_agent import AgentResult, AgentTask, agent_registry, setup_logging
from shared.utils.exceptions import FidelityError, UsageError

COMMANDS = [agent.step for agent in STAGE_AGENTS]
COMMAND_HELP = {agent.step: agent.description for agent in STAGE_AGENTS}


class FidelityArgumentParser(argparse.ArgumentParser):
    """ArgumentParser that raises UsageError instead of exiting with status 2"""

    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


class FidelityOrchestrator:
    """
    Routes commands to the stage agents and resolves their configuration
    """

    def __init__(self, log_level: str = "INFO"):
        self.logger = setup_logging("orchestrator", log_level)
        self.config_manager = ConfigManager()
        self.setup_agents(log_level)

    def setup_agents(self, log_level: str):
        """Initialize and register all stage agents"""
        for agent_cls in STAGE_AGENTS:
            agent_registry.register_agent(agent_cls({"log_level": log_level}))
        self.logger.debug(f"Registered agents: {', '.join(agent_registry.list_agents())}")

    def resolve_config(self, config_path: Optional[str], overrides: Dict[str, Any]) -> RunConfig:
        """
        Build the run config of a command

        Commands start from the config snapshot in the output directory's
        manifest, so later steps repeat the choices of the earlier ones unless
        a flag or config file says otherwise. A fresh directory starts from
        the defaults.
        """
        path = Path(config_path) if config_path else None
        config = self.config_manager.build(path, overrides=overrides)
        snapshot = RunManifest(config.out).config_snapshot
        if snapshot:
            # explicit --d/--p apply to one invocation only
            snapshot = deep_merge(snapshot, {"phase3": {"optimal_d": None, "optimal_p": None}})
            config = self.config_manager.build(path, base=snapshot, overrides=overrides)
        return config

    def run_command(self, command: str, config: RunConfig, runs: Optional[List[str]] = None) -> AgentResult:
        """Execute one command on its stage agent"""
        agent_name = f"{command}_agent"
        task = AgentTask(
            id=f"{command}_{config.seed}",
            agent_type=agent_name,
            action=command,
            parameters={"run_config": config, "runs": runs},
        )
        return agent_registry.execute_task(agent_name, task)

    @staticmethod
    def get_command_description(command: str) -> str:
        for agent_cls in STAGE_AGENTS:
            if agent_cls.step == command:
                return agent_cls.description
        return "No description available"


def build_parser() -> FidelityArgumentParser:
    common = FidelityArgumentParser(add_help=False)
    common.add_argument('--config', type=str, help='JSON or YAML config document')
    common.add_argument('--out', type=str, help='Output directory (default: ./outputs)')
    common.add_argument('--seed', type=int, help='Run seed (default: 42)')
    common.add_argument('--jobs', type=int, help='Parallel workers (default: all available processors)')
    common.add_argument('--verbose', action='store_true', help='Debug logging')

    data = FidelityArgumentParser(add_help=False)
    data.add_argument('--data', type=str, help='Input CSV file')
    data.add_argument('--target', type=str, help='Target column name')
    data.add_argument('--task', choices=['classification', 'regression'], help='Learning task')
    data.add_argument('--name', type=str, help='Dataset name used in reports')
    data.add_argument('--balance', action='store_true', default=None, help='Downsample the majority class')
    data.add_argument('--split', type=float, help='Train fraction (default: 0.7)')
    data.add_argument('--positive-label', type=str, help='Label mapped to class 1')

    model = FidelityArgumentParser(add_help=False)
    model.add_argument('--model', choices=['tree', 'ensemble'], help='Model kind')

    explainer = FidelityArgumentParser(add_help=False)
    explainer.add_argument('--explainer', choices=['surrogate', 'tree_shapley'], help='Explanation method')
    explainer.add_argument('--k', type=int, help='Explanation repeats averaged per instance')

    phase3 = FidelityArgumentParser(add_help=False)
    phase3.add_argument('--d', type=int, help='Decile range, 1-9 (default: from the phase2 report)')
    phase3.add_argument('--p', type=float, help='Weight-bin size (default: from the phase2 report)')
    phase3.add_argument('--repeats', type=int, help='Perturbations per instance and mode')

    parser = FidelityArgumentParser(
        description="Fidelity Orchestrator - evaluate how faithfully explanations describe tree models",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  %(prog)s prep --data diabetes.csv --target Outcome --balance --split 0.7 --seed 42 --out runs/diabetes
  %(prog)s train --model tree --out runs/diabetes
  %(prog)s train --model ensemble --out runs/diabetes
  %(prog)s phase1 --explainer surrogate --k 10 --out runs/diabetes
  %(prog)s phase2 --explainer tree_shapley --out runs/diabetes
  %(prog)s phase3 --model ensemble --explainer tree_shapley --out runs/diabetes
  %(prog)s phase3 --model tree --explainer surrogate --d 3 --out runs/diabetes
  %(prog)s report --runs runs/diabetes runs/breast_cancer --out runs/summary
  %(prog)s --list-commands
        """
    )
    parser.add_argument('--list-commands', action='store_true', help='List all commands')

    subparsers = parser.add_subparsers(dest='command', parser_class=FidelityArgumentParser)
    subparsers.add_parser('prep', parents=[common, data], help=COMMAND_HELP['prep'])
    subparsers.add_parser('train', parents=[common, model], help=COMMAND_HELP['train'])
    subparsers.add_parser('phase1', parents=[common, explainer], help=COMMAND_HELP['phase1'])
    phase2 = subparsers.add_parser('phase2', parents=[common, explainer], help=COMMAND_HELP['phase2'])
    phase2.add_argument('--repeats', type=int, help='Perturbations per instance and mode in the validation run')
    subparsers.add_parser('phase3', parents=[common, model, explainer, phase3], help=COMMAND_HELP['phase3'])
    report = subparsers.add_parser('report', parents=[common], help=COMMAND_HELP['report'])
    report.add_argument('--runs', nargs='+', help='Run directories to merge (default: --out)')
    return parser


def collect_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    """Dotted config keys set by flags; absent flags map to None"""
    flag_keys = {
        'out': 'output_dir',
        'seed': 'seed',
        'jobs': 'jobs',
        'data': 'dataset.path',
        'target': 'dataset.target_column',
        'task': 'dataset.task',
        'name': 'dataset.name',
        'balance': 'dataset.balance',
        'split': 'dataset.split_fraction',
        'positive_label': 'dataset.positive_label',
        'model': 'model.kind',
        'explainer': 'explainer.kind',
        'k': 'explainer.k_repeats',
        'd': 'phase3.optimal_d',
        'p': 'phase3.optimal_p',
        'repeats': 'phase3.repeats',
    }
    overrides = {key: getattr(args, flag, None) for flag, key in flag_keys.items()}
    if getattr(args, 'verbose', False):
        overrides['log_level'] = 'DEBUG'
    return overrides


def print_summary(command: str, result: AgentResult):
    data = result.data or {}
    print(f"\n📋 {command} summary:")
    for key, value in data.items():
        if key == "artifacts":
            continue
        print(f"  {key}: {value}")
    print(f"  ⏱️  {result.execution_time:.2f}s")
    for artifact in data.get("artifacts", []):
        print(f"  📁 {artifact}")


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()

    try:
        args = parser.parse_args(argv)

        if args.list_commands:
            print("\n🎯 Available Commands:")
            print("-" * 50)
            for command in COMMANDS:
                print(f"  📋 {command}")
                print(f"     {FidelityOrchestrator.get_command_description(command)}")
            return 0

        if not args.command:
            parser.print_help()
            return UsageError.exit_code

        overrides = collect_overrides(args)
        orchestrator = FidelityOrchestrator(overrides.get('log_level', 'INFO'))
        config = orchestrator.resolve_config(args.config, overrides)

        print(f"\n🚀 Executing command: {args.command}")
        print(f"📂 Output directory: {config.out}")
        result = orchestrator.run_command(args.command, config, getattr(args, 'runs', None))

        if not result.success:
            print(f"\n❌ Error: {result.error_message}")
            return result.exit_code

        print_summary(args.command, result)
        print(f"✅ {args.command} completed")

    except FidelityError as e:
        print(f"\n❌ Error: {e}")
        return e.exit_code
    except Exception as e:
        print(f"\n❌ Unexpected error: {e}")
        return 1

    return 0


if __name__ == "__main__":
    exit(main())
