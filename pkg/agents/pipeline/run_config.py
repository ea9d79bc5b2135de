"""
Run configuration and manifest

A RunConfig is built from built-in defaults, deep-merged with a JSON or YAML
config document, then overridden by command-line flags. The manifest in the
output directory records the config snapshot, every artifact and per-step
timings.
"""

import copy
import json
import logging
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple

import yaml

from agents.explainers.base import ExplainerConfig, ExplainerKind
from agents.models.training import CartParams, GbtParams
from agents.phase2.search import DEFAULT_CANDIDATE_PS
from agents.tabular.dataset import TaskKind
from shared.utils import __version__
from shared.utils.exceptions import DataError, FidelityError, UsageError
from shared.utils.reporting import config_hash, read_json, write_json

logger = logging.getLogger("fidelity_agents.pipeline")

MANIFEST_NAME = "manifest.json"
MODEL_KINDS = ("tree", "ensemble")

DEFAULT_CONFIG: Dict[str, Any] = {
    "dataset": {
        "name": None,
        "path": None,
        "target_column": None,
        "task": "classification",
        "balance": False,
        "split_fraction": 0.7,
        "positive_label": None,
        "drop_columns": [],
        "separator": ",",
    },
    "model": {
        "kind": "tree",
        "tree": {"max_depth": None, "min_samples_split": 2, "min_samples_leaf": 1},
        "ensemble": {"num_trees": 100, "learning_rate": 0.3, "max_depth": 6, "min_samples_leaf": 1},
    },
    "explainer": {
        "kind": "tree_shapley",
        "k_repeats": 10,
        "surrogate_samples": 1000,
        "kernel_width": None,
        "ridge_lambda": 1.0,
    },
    "phase2": {"candidate_ps": list(DEFAULT_CANDIDATE_PS), "grid_points": 100},
    "phase3": {"optimal_d": None, "optimal_p": None, "margin": 0.05, "repeats": 10},
    "output_dir": "./outputs",
    "seed": 42,
    "jobs": None,
    "log_level": "INFO",
}


def deep_merge(base: Mapping[str, Any], override: Mapping[str, Any]) -> Dict[str, Any]:
    """Recursively merge override into a copy of base"""
    merged = copy.deepcopy(dict(base))
    for key, value in override.items():
        if isinstance(value, Mapping) and isinstance(merged.get(key), Mapping):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def set_dotted(document: Dict[str, Any], dotted_key: str, value: Any) -> None:
    """Set document["a"]["b"] for the key "a.b", creating sections as needed"""
    *sections, last = dotted_key.split(".")
    node = document
    for section in sections:
        node = node.setdefault(section, {})
    node[last] = value


@dataclass(frozen=True)
class DatasetConfig:
    name: Optional[str] = None
    path: Optional[str] = None
    target_column: Optional[str] = None
    task: TaskKind = TaskKind.CLASSIFICATION
    balance: bool = False
    split_fraction: float = 0.7
    positive_label: Optional[str] = None
    drop_columns: Tuple[str, ...] = ()
    separator: str = ","


@dataclass(frozen=True)
class ModelConfig:
    kind: str = "tree"
    tree: CartParams = CartParams()
    ensemble: GbtParams = GbtParams()


@dataclass(frozen=True)
class Phase2Config:
    candidate_ps: Tuple[float, ...] = DEFAULT_CANDIDATE_PS
    grid_points: int = 100


@dataclass(frozen=True)
class Phase3Config:
    optimal_d: Optional[int] = None
    optimal_p: Optional[float] = None
    margin: float = 0.05
    repeats: int = 10


@dataclass(frozen=True)
class RunConfig:
    """Typed view of a merged configuration document"""
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    explainer: ExplainerConfig = field(default_factory=ExplainerConfig)
    phase2: Phase2Config = field(default_factory=Phase2Config)
    phase3: Phase3Config = field(default_factory=Phase3Config)
    output_dir: str = "./outputs"
    seed: int = 42
    jobs: Optional[int] = None
    log_level: str = "INFO"

    @property
    def out(self) -> Path:
        return Path(self.output_dir)

    @classmethod
    def from_dict(cls, document: Mapping[str, Any]) -> "RunConfig":
        """
        Materialize and validate a configuration document

        Raises:
            UsageError: on unknown keys or invalid values
        """
        doc = deep_merge(DEFAULT_CONFIG, document)
        try:
            dataset = DatasetConfig(**{**doc["dataset"], "task": TaskKind(doc["dataset"]["task"]),
                                       "drop_columns": tuple(doc["dataset"]["drop_columns"])})
            if not dataset.name:
                dataset = replace(dataset, name=Path(dataset.path).stem if dataset.path else "dataset")
            if not 0.0 < float(dataset.split_fraction) < 1.0:
                raise UsageError(f"split_fraction must be strictly between 0 and 1, got {dataset.split_fraction}")
            model_doc = doc["model"]
            if model_doc["kind"] not in MODEL_KINDS:
                raise UsageError(f"model.kind must be one of {MODEL_KINDS}, got {model_doc['kind']}")
            model = ModelConfig(
                kind=model_doc["kind"],
                tree=CartParams(**model_doc["tree"]),
                ensemble=GbtParams(**model_doc["ensemble"]),
            )
            explainer = ExplainerConfig(**{**doc["explainer"], "kind": ExplainerKind(doc["explainer"]["kind"])})
            phase2 = Phase2Config(
                candidate_ps=tuple(float(p) for p in doc["phase2"]["candidate_ps"]),
                grid_points=int(doc["phase2"]["grid_points"]),
            )
            phase3 = Phase3Config(**doc["phase3"])
            if phase3.optimal_d is not None and phase3.optimal_d not in range(1, 10):
                raise UsageError(f"--d must be between 1 and 9, got {phase3.optimal_d}")
            if phase3.optimal_p is not None and not 0.0 < phase3.optimal_p < 1.0:
                raise UsageError(f"--p must be strictly between 0 and 1, got {phase3.optimal_p}")
            if int(phase3.repeats) < 1:
                raise UsageError(f"--repeats must be at least 1, got {phase3.repeats}")
            jobs = doc["jobs"]
            if jobs is not None and int(jobs) < 1:
                raise UsageError(f"jobs must be at least 1, got {jobs}")
            return cls(
                dataset=dataset,
                model=model,
                explainer=explainer,
                phase2=phase2,
                phase3=phase3,
                output_dir=str(doc["output_dir"]),
                seed=int(doc["seed"]),
                jobs=None if jobs is None else int(jobs),
                log_level=str(doc["log_level"]).upper(),
            )
        except UsageError:
            raise
        except (FidelityError, TypeError, ValueError, KeyError) as e:
            raise UsageError(f"Invalid configuration: {e}") from e

    def to_dict(self) -> Dict[str, Any]:
        """Plain JSON-ready snapshot"""
        doc = asdict(self)
        doc["dataset"]["task"] = self.dataset.task.value
        doc["dataset"]["drop_columns"] = list(self.dataset.drop_columns)
        doc["explainer"]["kind"] = self.explainer.kind.value
        doc["phase2"]["candidate_ps"] = list(self.phase2.candidate_ps)
        return doc


class ConfigManager:
    """
    Builds RunConfig objects: defaults, then a config file, then flag overrides
    """

    def __init__(self, defaults: Optional[Mapping[str, Any]] = None):
        self.defaults = copy.deepcopy(dict(defaults or DEFAULT_CONFIG))

    @staticmethod
    def load_document(path: Path) -> Dict[str, Any]:
        """Read a JSON or YAML config document"""
        path = Path(path)
        if not path.exists():
            raise UsageError(f"Config file not found: {path}")
        try:
            with open(path, 'r', encoding='utf-8') as f:
                if path.suffix in ('.yaml', '.yml'):
                    document = yaml.safe_load(f) or {}
                else:
                    document = json.load(f)
        except (json.JSONDecodeError, yaml.YAMLError) as e:
            raise UsageError(f"Invalid config file {path}: {e}") from e
        if not isinstance(document, dict):
            raise UsageError(f"Config file {path} must contain an object")
        return document

    def build(self, config_path: Optional[Path] = None, base: Optional[Mapping[str, Any]] = None,
              overrides: Optional[Mapping[str, Any]] = None) -> RunConfig:
        """
        Merge defaults, an optional base snapshot, an optional file and dotted-key overrides

        Args:
            config_path: JSON or YAML config document
            base: Config snapshot of an earlier step (from the manifest)
            overrides: {"section.key": value} pairs from command-line flags; None values are ignored

        Returns:
            Validated RunConfig
        """
        document = copy.deepcopy(self.defaults)
        if base:
            document = deep_merge(document, base)
        if config_path:
            document = deep_merge(document, self.load_document(config_path))
        for key, value in (overrides or {}).items():
            if value is not None:
                set_dotted(document, key, value)
        return RunConfig.from_dict(document)


class RunManifest:
    """manifest.json of one output directory"""

    def __init__(self, out_dir: Path):
        self.out_dir = Path(out_dir)
        self.path = self.out_dir / MANIFEST_NAME
        self.document: Dict[str, Any] = {"tool_version": __version__, "config": None,
                                         "config_hash": None, "steps": {}}
        if self.path.exists():
            try:
                self.document = read_json(self.path)
            except DataError as e:
                raise DataError(f"Corrupt manifest: {e}") from e

    @property
    def config_snapshot(self) -> Optional[Dict[str, Any]]:
        return self.document.get("config")

    def artifacts(self) -> List[str]:
        return sorted({a for step in self.document["steps"].values() for a in step["artifacts"]})

    def has_artifact(self, name: str) -> bool:
        return name in self.artifacts() and (self.out_dir / name).exists()

    def record_step(self, step: str, config: RunConfig, artifacts: List[Path], seconds: float) -> Path:
        """Replace the entry of a step and rewrite the manifest"""
        snapshot = config.to_dict()
        self.document["tool_version"] = __version__
        self.document["config"] = snapshot
        self.document["config_hash"] = config_hash(snapshot)
        self.document["steps"][step] = {
            "artifacts": sorted(Path(a).name for a in artifacts),
            "config_hash": self.document["config_hash"],
            "seconds": round(seconds, 3),
        }
        write_json(self.document, self.path)
        logger.debug(f"Manifest updated for step {step}")
        return self.path
