"""
Pipeline stage agents

One agent per command. Each reads its prerequisite artifacts from the output
directory, runs its library module, writes JSON/CSV reports and records the
step in the manifest.
"""

import time
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import pandas as pd

from agents.explainers.base import build_explainer
from agents.models.metrics import eval_accuracy
from agents.models.training import fit_cart, fit_gbt
from agents.models.trees import DecisionTree, Model, load_model, model_summary, save_model
from agents.phase1.white_box import run_phase1
from agents.phase2.search import bin_size_search, decile_search, search_curves, search_report, validate_phase2
from agents.phase3.perturbation import Phase3Params, run_phase3
from agents.pipeline.run_config import RunConfig, RunManifest
from agents.tabular.dataset import Dataset, balance_downsample, load_csv, load_dataset, save_dataset, train_test_split
from shared.utils.base_agent import BaseAgent
from shared.utils.exceptions import MissingArtifactError, UsageError
from shared.utils.reporting import read_json, write_csv, write_json

TRAIN_FILE = "train.json"
TEST_FILE = "test.json"
SUMMARY_COLUMNS = ["dataset", "model", "explainer", "phase", "metric", "mean", "count_skipped"]


def model_file(kind: str) -> str:
    return f"model_{kind}.json"


def phase1_stem(explainer: str) -> str:
    return f"phase1_{explainer}"


def phase2_stem(explainer: str) -> str:
    return f"phase2_{explainer}"


def phase3_stem(model: str, explainer: str) -> str:
    return f"phase3_{model}_{explainer}"


class PipelineAgent(BaseAgent):
    """Base for the stage agents: artifact lookup, report headers and manifest bookkeeping"""

    step: str = ""
    description: str = ""

    def __init__(self, config: Optional[Dict[str, Any]] = None):
        super().__init__(f"{self.step}_agent", config)

    def get_capabilities(self) -> List[str]:
        return [self.step]

    def run_action(self, action: str, parameters: Dict[str, Any]) -> Dict[str, Any]:
        run_config: RunConfig = parameters["run_config"]
        started = time.perf_counter()
        artifacts, summary = self.run_step(run_config, parameters)
        manifest = RunManifest(run_config.out)
        manifest.record_step(self.step_key(run_config), run_config, artifacts, time.perf_counter() - started)
        summary["artifacts"] = [str(a) for a in artifacts]
        return summary

    def step_key(self, cfg: RunConfig) -> str:
        """Manifest entry of this step; steps run per model or explainer get one entry each"""
        return self.step

    def run_step(self, cfg: RunConfig, parameters: Dict[str, Any]) -> Tuple[List[Path], Dict[str, Any]]:
        raise NotImplementedError

    @staticmethod
    def require(out: Path, name: str, hint: str) -> Path:
        path = out / name
        if not path.exists():
            raise MissingArtifactError(f"{path} not found: {hint}")
        return path

    def load_splits(self, cfg: RunConfig) -> Tuple[Dataset, Dataset]:
        hint = "run prep first"
        train = load_dataset(self.require(cfg.out, TRAIN_FILE, hint))
        test = load_dataset(self.require(cfg.out, TEST_FILE, hint))
        return train, test

    def load_trained(self, cfg: RunConfig, kind: str) -> Model:
        return load_model(self.require(cfg.out, model_file(kind), f"run train --model {kind} first"))

    @staticmethod
    def header(cfg: RunConfig, model: str) -> Dict[str, Any]:
        return {"dataset": cfg.dataset.name, "model": model, "explainer": cfg.explainer.kind.value,
                "seed": cfg.seed}


class PrepAgent(PipelineAgent):
    step = "prep"
    description = "Load a CSV, optionally balance classes, split into train/test JSON"

    def run_step(self, cfg, parameters):
        if not cfg.dataset.path:
            raise UsageError("prep needs a data file (--data or dataset.path)")
        if not cfg.dataset.target_column:
            raise UsageError("prep needs a target column (--target or dataset.target_column)")

        data = load_csv(Path(cfg.dataset.path), cfg.dataset.target_column, cfg.dataset.task,
                        cfg.dataset.positive_label, cfg.dataset.drop_columns, cfg.dataset.separator)
        if cfg.dataset.balance:
            data = balance_downsample(data, cfg.seed)
        train, test = train_test_split(data, cfg.dataset.split_fraction, cfg.seed)

        artifacts = [save_dataset(train, cfg.out / TRAIN_FILE), save_dataset(test, cfg.out / TEST_FILE)]
        return artifacts, {"rows": data.num_rows, "train_rows": train.num_rows, "test_rows": test.num_rows,
                           "features": data.num_features}


class TrainAgent(PipelineAgent):
    step = "train"
    description = "Fit the white-box tree or the black-box ensemble and score it on the test split"

    def step_key(self, cfg):
        return f"train_{cfg.model.kind}"

    def run_step(self, cfg, parameters):
        train, test = self.load_splits(cfg)
        kind = cfg.model.kind
        if kind == "tree":
            model = fit_cart(train, cfg.model.tree, cfg.seed)
        else:
            model = fit_gbt(train, cfg.model.ensemble, cfg.seed)

        accuracy = eval_accuracy(model, test)
        summary = model_summary(model)
        model_path = save_model(model, cfg.out / model_file(kind))
        accuracy_path = write_json(
            {**self.header(cfg, kind), "accuracy": accuracy.to_dict(), "summary": summary},
            cfg.out / f"accuracy_{kind}.json",
        )
        return [model_path, accuracy_path], {"accuracy": accuracy.to_dict(), "summary": summary}


class Phase1Agent(PipelineAgent):
    step = "phase1"
    description = "Recall and precision of explanation features against white-box path features"

    def step_key(self, cfg):
        return phase1_stem(cfg.explainer.kind.value)

    def run_step(self, cfg, parameters):
        train, test = self.load_splits(cfg)
        tree = self.load_trained(cfg, "tree")
        explainer = build_explainer(cfg.explainer, tree, train)
        report = run_phase1(tree, explainer, test, seed=cfg.seed, jobs=cfg.jobs)

        stem = phase1_stem(cfg.explainer.kind.value)
        artifacts = [
            write_json({**self.header(cfg, "tree"), **report.to_dict()}, cfg.out / f"{stem}.json"),
            write_csv(report.to_frame(), cfg.out / f"{stem}.csv"),
        ]
        return artifacts, {"mean_recall": report.mean_recall, "mean_precision": report.mean_precision,
                           "skipped": report.skipped}


class Phase2Agent(PipelineAgent):
    step = "phase2"
    description = "Search the decile range and weight-bin size on the white box and validate them"

    def step_key(self, cfg):
        return phase2_stem(cfg.explainer.kind.value)

    def run_step(self, cfg, parameters):
        train, test = self.load_splits(cfg)
        tree = self.load_trained(cfg, "tree")
        explainer = build_explainer(cfg.explainer, tree, train)

        deciles = decile_search(tree, explainer, test, seed=cfg.seed, jobs=cfg.jobs)
        bins = None
        if not explainer.provides_intervals:
            bins = bin_size_search(tree, explainer, test, cfg.phase2.candidate_ps, cfg.phase2.grid_points,
                                   seed=cfg.seed, jobs=cfg.jobs)
        validation = validate_phase2(
            tree, explainer, test, deciles.optimal_d, None if bins is None else bins.optimal_p,
            seed=cfg.seed, jobs=cfg.jobs, margin_fraction=cfg.phase3.margin,
            perturbation_repeats=cfg.phase3.repeats, grid_points=cfg.phase2.grid_points,
        )

        stem = phase2_stem(cfg.explainer.kind.value)
        body = {**self.header(cfg, "tree"), **search_report(deciles, bins), "validation": validation.to_dict()}
        artifacts = [
            write_json(body, cfg.out / f"{stem}.json"),
            write_csv(search_curves(deciles, bins), cfg.out / f"{stem}_curves.csv"),
            write_csv(validation.to_frame(), cfg.out / f"{stem}_validation.csv"),
        ]
        return artifacts, {"optimal_d": body["optimal_d"], "optimal_p": body["optimal_p"],
                           "validation": body["validation"]}


class Phase3Agent(PipelineAgent):
    step = "phase3"
    description = "Supporting and contrary perturbation fidelity on the chosen model"

    def step_key(self, cfg):
        return phase3_stem(cfg.model.kind, cfg.explainer.kind.value)

    def search_parameters(self, cfg: RunConfig, weight_only: bool) -> Tuple[int, Optional[float]]:
        d, p = cfg.phase3.optimal_d, cfg.phase3.optimal_p
        if d is not None and (p is not None or not weight_only):
            return d, p
        report_path = cfg.out / f"{phase2_stem(cfg.explainer.kind.value)}.json"
        if not report_path.exists():
            raise MissingArtifactError("run phase2 first or pass --d/--p")
        search = read_json(report_path)
        d = search["optimal_d"] if d is None else d
        p = search["optimal_p"] if p is None else p
        if weight_only and p is None:
            raise MissingArtifactError("run phase2 first or pass --d/--p")
        return int(d), None if p is None else float(p)

    def run_step(self, cfg, parameters):
        train, test = self.load_splits(cfg)
        kind = cfg.model.kind
        model = self.load_trained(cfg, kind)
        explainer = build_explainer(cfg.explainer, model, train)
        d, p = self.search_parameters(cfg, weight_only=not explainer.provides_intervals)

        params = Phase3Params(optimal_d=d, optimal_p=p, perturbation_repeats=cfg.phase3.repeats,
                              margin_fraction=cfg.phase3.margin, grid_points=cfg.phase2.grid_points)
        report = run_phase3(model, explainer, test, params, seed=cfg.seed, jobs=cfg.jobs)

        stem = phase3_stem(kind, cfg.explainer.kind.value)
        body = {**self.header(cfg, kind), "optimal_d": d, "optimal_p": p, **report.to_dict()}
        artifacts = [
            write_json(body, cfg.out / f"{stem}.json"),
            write_csv(report.to_frame(), cfg.out / f"{stem}.csv"),
        ]
        return artifacts, {"mean_supporting": report.mean_supporting, "mean_contrary": report.mean_contrary,
                           "excluded": report.excluded}


def _phase1_rows(doc: Dict[str, Any]) -> List[Dict[str, Any]]:
    records = doc["records"]
    return [
        {"metric": "recall", "mean": doc["mean_recall"],
         "count_skipped": sum(1 for r in records if r["recall"] is None)},
        {"metric": "precision", "mean": doc["mean_precision"],
         "count_skipped": sum(1 for r in records if r["precision"] is None)},
    ]


def _phase2_rows(doc: Dict[str, Any]) -> List[Dict[str, Any]]:
    skipped = doc["skipped"]
    decile_skipped = sum(skipped["decile_search"].values())
    bin_skipped = sum(skipped["bin_size_search"].values())
    validation = doc["validation"]
    rows = [
        {"metric": "optimal_d", "mean": doc["optimal_d"], "count_skipped": decile_skipped},
        {"metric": "f1_at_optimal_d", "mean": doc["per_d_scores"][str(doc["optimal_d"])],
         "count_skipped": decile_skipped},
    ]
    if doc["optimal_p"] is not None:
        distances = {float(p): v for p, v in doc["per_p_distances"].items()}
        rows.append({"metric": "optimal_p", "mean": doc["optimal_p"], "count_skipped": bin_skipped})
        rows.append({"metric": "distance_at_optimal_p", "mean": distances[float(doc["optimal_p"])],
                     "count_skipped": bin_skipped})
    excluded = validation["phase3_excluded"]
    rows.append({"metric": "validation_supporting", "mean": validation["mean_supporting"],
                 "count_skipped": sum(excluded["supporting"].values())})
    rows.append({"metric": "validation_contrary", "mean": validation["mean_contrary"],
                 "count_skipped": sum(excluded["contrary"].values())})
    return rows


def _phase3_rows(doc: Dict[str, Any]) -> List[Dict[str, Any]]:
    excluded = doc["excluded"]
    return [
        {"metric": "supporting", "mean": doc["mean_supporting"],
         "count_skipped": sum(excluded["supporting"].values())},
        {"metric": "contrary", "mean": doc["mean_contrary"],
         "count_skipped": sum(excluded["contrary"].values())},
    ]


REPORT_READERS = (("phase1_*.json", "phase1", _phase1_rows),
                  ("phase2_*.json", "phase2", _phase2_rows),
                  ("phase3_*.json", "phase3", _phase3_rows))


def collect_summary(run_dirs: List[Path]) -> pd.DataFrame:
    """Long-format aggregate rows of every phase report found in the run directories"""
    rows = []
    for run_dir in run_dirs:
        run_dir = Path(run_dir)
        if not run_dir.is_dir():
            raise MissingArtifactError(f"Run directory not found: {run_dir}")
        for pattern, phase, reader in REPORT_READERS:
            for path in sorted(run_dir.glob(pattern)):
                doc = read_json(path)
                if "explainer" not in doc:
                    continue
                for row in reader(doc):
                    rows.append({"dataset": doc["dataset"], "model": doc["model"],
                                 "explainer": doc["explainer"], "phase": phase, **row})
    if not rows:
        raise MissingArtifactError(f"No phase reports found in {', '.join(str(d) for d in run_dirs)}")
    long = pd.DataFrame(rows, columns=SUMMARY_COLUMNS)
    return long.sort_values(["dataset", "model", "explainer", "phase", "metric"], kind="stable").reset_index(drop=True)


def summary_table(long: pd.DataFrame) -> pd.DataFrame:
    """One row per dataset x model x explainer x phase with metrics as columns"""
    keys = ["dataset", "model", "explainer", "phase"]
    table = long.groupby(keys + ["metric"], sort=True)["mean"].mean().unstack("metric").reset_index()
    table.columns.name = None
    return table


class ReportAgent(PipelineAgent):
    step = "report"
    description = "Merge the phase reports of one or more run directories into summary tables"

    def run_step(self, cfg, parameters):
        run_dirs = [Path(d) for d in (parameters.get("runs") or [cfg.output_dir])]
        long = collect_summary(run_dirs)
        table = summary_table(long)
        artifacts = [
            write_csv(long, cfg.out / "summary_long.csv"),
            write_csv(table, cfg.out / "summary_table.csv"),
        ]
        return artifacts, {"rows": len(table), "runs": [str(d) for d in run_dirs]}


STAGE_AGENTS = (PrepAgent, TrainAgent, Phase1Agent, Phase2Agent, Phase3Agent, ReportAgent)
