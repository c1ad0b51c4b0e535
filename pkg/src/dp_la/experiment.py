"""Sweep orchestration: configuration, deterministic (method, epsilon, seed)
grid execution, per-cell privacy audits, and report emission.

Every cell derives its own random substream from the master seed and its grid
coordinates, so results are identical regardless of execution order or worker
count, and editing one cell's coordinates never disturbs another cell.
"""

from __future__ import annotations

import hashlib
import json
import platform
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import audit as audit_mod
from .data import Dataset, TabularSchema, four_way_split, load_csv, preprocess, synth_generate
from .mechanisms import PrivacyBudget, RngState
from .model import TrainConfig, accuracy, predict, train
from .pipelines import DpMethod, private_proba_fn, run_pipeline

__all__ = [
    "SynthSpec",
    "ExperimentConfig",
    "SweepCell",
    "CellResult",
    "SweepResults",
    "load_config",
    "load_experiment_dataset",
    "run_sweep",
    "summarize",
    "emit_report",
    "RESULT_COLUMNS",
]

DEFAULT_EPSILONS = (0.01, 0.1, 1.0, 10.0, 100.0, 1000.0, 10000.0)
DEFAULT_SEEDS = (1, 2, 3, 4, 5)

RESULT_COLUMNS = (
    "method",
    "epsilon",
    "seed",
    "acc_nonprivate",
    "acc_private",
    "utility_loss",
    "tpr",
    "fpr",
    "privacy_leakage",
    "true_revealed_records",
    "trr_rate",
    "wall_time_seconds",
    "status",
)


@dataclass(frozen=True)
class SynthSpec:
    n: int = 2000
    d_numeric: int = 5
    d_categorical: int = 2
    separation: float = 1.0
    seed: int = 7


@dataclass(frozen=True)
class ExperimentConfig:
    data_path: str | None = None
    schema_path: str | None = None
    synth: SynthSpec | None = field(default_factory=SynthSpec)
    methods: tuple[DpMethod, ...] = tuple(DpMethod)
    epsilons: tuple[float, ...] = DEFAULT_EPSILONS
    delta: float = 1e-5
    seeds: tuple[int, ...] = DEFAULT_SEEDS
    num_teachers: int = 10
    train: TrainConfig = field(default_factory=TrainConfig)
    inner_train_fraction: float = 0.5
    master_seed: int = 0
    output_dir: str = "dp_la_out"
    threads: int = 1

    def __post_init__(self) -> None:
        if (self.data_path is None) == (self.synth is None):
            raise ValueError("config must specify exactly one of a CSV data path or a synth block")
        if self.data_path is not None and self.schema_path is None:
            raise ValueError("a CSV data path requires a schema path")
        if not self.methods:
            raise ValueError("methods must be non-empty")
        if not self.seeds:
            raise ValueError("seeds must be non-empty")
        if not self.epsilons or any(e <= 0 for e in self.epsilons):
            raise ValueError("epsilons must be positive")
        if list(self.epsilons) != sorted(set(self.epsilons)):
            raise ValueError("epsilons must be strictly increasing")
        if not (0.0 < self.delta < 1.0):
            raise ValueError(f"delta must be in (0, 1), got {self.delta}")
        if self.threads < 1:
            raise ValueError("threads must be positive")

    def canonical_json(self) -> str:
        doc = {
            "data_path": self.data_path,
            "schema_path": self.schema_path,
            "synth": None
            if self.synth is None
            else {
                "n": self.synth.n,
                "d_numeric": self.synth.d_numeric,
                "d_categorical": self.synth.d_categorical,
                "separation": self.synth.separation,
                "seed": self.synth.seed,
            },
            "methods": [m.value for m in self.methods],
            "epsilons": list(self.epsilons),
            "delta": self.delta,
            "seeds": list(self.seeds),
            "num_teachers": self.num_teachers,
            "train": {
                "lam": self.train.lam,
                "epochs": self.train.epochs,
                "learning_rate": self.train.learning_rate,
                "seed": self.train.seed,
            },
            "inner_train_fraction": self.inner_train_fraction,
            "master_seed": self.master_seed,
        }
        return json.dumps(doc, sort_keys=True, separators=(",", ":"))

    def fingerprint(self) -> str:
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()[:16]


def load_config(path: str | Path) -> ExperimentConfig:
    """Parse and validate a config JSON document."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    data = doc.get("data", {})
    synth = None
    data_path = schema_path = None
    if "synth" in data:
        synth = SynthSpec(**data["synth"])
    if "path" in data:
        data_path = data["path"]
        schema_path = data.get("schema")
    train_doc = doc.get("train", {})
    kwargs = dict(
        data_path=data_path,
        schema_path=schema_path,
        synth=synth,
        epsilons=tuple(doc.get("epsilons", DEFAULT_EPSILONS)),
        delta=doc.get("delta", 1e-5),
        seeds=tuple(doc.get("seeds", DEFAULT_SEEDS)),
        num_teachers=doc.get("num_teachers", 10),
        train=TrainConfig(
            lam=train_doc.get("lam", 1e-4),
            epochs=train_doc.get("epochs", 100),
            learning_rate=train_doc.get("learning_rate", 0.5),
            seed=train_doc.get("seed", 0),
        ),
        inner_train_fraction=doc.get("inner_train_fraction", 0.5),
        master_seed=doc.get("master_seed", 0),
        output_dir=doc.get("output_dir", "dp_la_out"),
        threads=doc.get("threads", 1),
    )
    if "methods" in doc:
        kwargs["methods"] = tuple(DpMethod(m) for m in doc["methods"])
    return ExperimentConfig(**kwargs)


@dataclass(frozen=True)
class SweepCell:
    method: DpMethod
    epsilon: float
    seed: int
    eps_index: int
    seed_index: int


@dataclass(frozen=True)
class CellResult:
    cell: SweepCell
    report: audit_mod.AuditReport | None
    wall_time_seconds: float
    status: str


@dataclass(frozen=True)
class SweepResults:
    rows: tuple[CellResult, ...]
    config_fingerprint: str


def enumerate_cells(config: ExperimentConfig) -> list[SweepCell]:
    """Deterministic cell order: method, then epsilon ascending, then seed."""
    return [
        SweepCell(method, eps, seed, ei, si)
        for method in config.methods
        for ei, eps in enumerate(config.epsilons)
        for si, seed in enumerate(config.seeds)
    ]


def load_experiment_dataset(config: ExperimentConfig) -> Dataset:
    if config.synth is not None:
        raw, schema = synth_generate(
            config.synth.n,
            config.synth.d_numeric,
            config.synth.d_categorical,
            config.synth.separation,
            config.synth.seed,
        )
    else:
        schema = TabularSchema.from_json(config.schema_path)
        raw = load_csv(config.data_path, schema)
    return preprocess(raw, schema)


def _split_seed(master_seed: int, seed: int) -> int:
    key = f"split:{master_seed}:{seed}"
    return int.from_bytes(hashlib.sha256(key.encode()).digest()[:8], "little") >> 1


def run_cell(config: ExperimentConfig, dataset: Dataset, cell: SweepCell) -> CellResult:
    """One grid cell: split, baseline, DP pipeline, shadow attack, metrics.

    The split and the pipeline's noise draws are keyed by (master seed,
    method, seed) only, so cells along the epsilon axis of one seed share
    their underlying randomness and differ purely in the noise scale (common
    random numbers; trend curves are not polluted by resampling jitter).
    The audit's fresh vote noise is keyed by the full cell coordinates.
    """
    start = time.perf_counter()
    try:
        master = RngState(config.master_seed)
        pipeline_rng = master.substream("pipeline", cell.method.value, "seed", cell.seed_index)
        audit_rng = master.substream(
            "audit", cell.method.value, cell.eps_index, cell.seed_index
        )
        split = four_way_split(dataset, _split_seed(config.master_seed, cell.seed),
                               config.inner_train_fraction)
        train_cfg = replace(config.train, seed=cell.seed)

        baseline = train(dataset.features[split.victim_train],
                         dataset.labels[split.victim_train], train_cfg)
        acc_nonprivate = accuracy(
            predict(baseline, dataset.features[split.victim_test]),
            dataset.labels[split.victim_test],
        )

        delta = config.delta if cell.method is DpMethod.INPUT_PERTURBATION else 0.0
        budget = PrivacyBudget(epsilon=cell.epsilon, delta=delta)
        result = run_pipeline(
            cell.method, dataset, split, budget, train_cfg,
            pipeline_rng, num_teachers=config.num_teachers,
        )
        acc_private = accuracy(result.private_test_predictions,
                               dataset.labels[split.victim_test])

        shadow = train(dataset.features[split.attack_train],
                       dataset.labels[split.attack_train], train_cfg)
        attack = audit_mod.train_attack(shadow, dataset, split, train_cfg)
        outcome = audit_mod.run_mia(
            attack,
            private_proba_fn(result.artifact, audit_rng),
            dataset,
            split,
        )
        report = audit_mod.build_report(
            acc_private=acc_private,
            acc_nonprivate=acc_nonprivate,
            outcome=outcome,
            method=cell.method,
            epsilon=cell.epsilon,
            seed=cell.seed,
        )
        return CellResult(cell, report, time.perf_counter() - start, "ok")
    except Exception as exc:  # cell failures are contained, not fatal
        return CellResult(cell, None, time.perf_counter() - start,
                          f"failed:{type(exc).__name__}:{exc}")


def run_sweep(config: ExperimentConfig, dataset: Dataset | None = None) -> SweepResults:
    """Execute the full grid; results come back in cell order regardless of
    scheduling."""
    if dataset is None:
        dataset = load_experiment_dataset(config)
    cells = enumerate_cells(config)
    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            rows = list(pool.map(lambda c: run_cell(config, dataset, c), cells))
    else:
        rows = [run_cell(config, dataset, c) for c in cells]
    return SweepResults(rows=tuple(rows), config_fingerprint=config.fingerprint())


def summarize(results: SweepResults) -> dict:
    """Per-(method, epsilon) medians over the seeds that completed.

    Groups with no successful cell are reported as missing rather than zero.
    """
    groups: dict[tuple[str, float], list[audit_mod.AuditReport]] = {}
    order: list[tuple[str, float]] = []
    for row in results.rows:
        key = (row.cell.method.value, row.cell.epsilon)
        if key not in groups:
            groups[key] = []
            order.append(key)
        if row.report is not None:
            groups[key].append(row.report)

    summary = []
    for method, epsilon in order:
        reports = groups[(method, epsilon)]
        entry: dict = {"method": method, "epsilon": epsilon, "n_ok": len(reports)}
        if reports:
            entry.update(
                median_utility_loss=float(np.median([r.utility_loss for r in reports])),
                median_privacy_leakage=float(np.median([r.privacy_leakage for r in reports])),
                median_true_revealed_records=float(np.median([r.true_revealed_records for r in reports])),
                median_trr_rate=float(np.median([r.trr_rate for r in reports])),
            )
        else:
            entry["missing"] = True
        summary.append(entry)
    return {"config_fingerprint": results.config_fingerprint, "groups": summary}


def _fmt(value: float) -> str:
    """Deterministic 12-significant-digit float formatting for CSV output."""
    return format(float(value), ".12g")


def _results_csv_lines(results: SweepResults) -> list[str]:
    lines = [",".join(RESULT_COLUMNS)]
    for row in results.rows:
        r = row.report
        if r is None:
            values = [row.cell.method.value, _fmt(row.cell.epsilon), str(row.cell.seed)]
            values += [""] * 8
            # wall time is kept out of results.csv so reruns are byte-identical
            values += ["", _csv_escape(row.status)]
        else:
            values = [
                row.cell.method.value,
                _fmt(r.epsilon),
                str(r.seed),
                _fmt(r.acc_nonprivate),
                _fmt(r.acc_private),
                _fmt(r.utility_loss),
                _fmt(r.tpr),
                _fmt(r.fpr),
                _fmt(r.privacy_leakage),
                str(r.true_revealed_records),
                _fmt(r.trr_rate),
                "",
                "ok",
            ]
        lines.append(",".join(values))
    return lines


def _csv_escape(value: str) -> str:
    if any(c in value for c in ',"\n'):
        return '"' + value.replace('"', '""') + '"'
    return value


def _fig_series_lines(results: SweepResults, metric: str) -> list[str]:
    methods = []
    for row in results.rows:
        if row.cell.method.value not in methods:
            methods.append(row.cell.method.value)
    epsilons = sorted({row.cell.epsilon for row in results.rows})
    summary = summarize(results)
    table = {(g["method"], g["epsilon"]): g for g in summary["groups"]}
    lines = [",".join(["epsilon"] + methods)]
    for eps in epsilons:
        cells = []
        for m in methods:
            g = table.get((m, eps))
            if g is None or g.get("missing"):
                cells.append("")
            else:
                cells.append(_fmt(g[f"median_{metric}"]))
        lines.append(",".join([_fmt(eps)] + cells))
    return lines


def emit_report(
    results: SweepResults,
    summary: dict,
    output_dir: str | Path,
    force: bool = False,
) -> list[Path]:
    """Write results.csv, summary.json and the three figure-series CSVs.

    Refuses to overwrite existing outputs unless ``force`` is set.
    """
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    targets = {
        "results.csv": "\n".join(_results_csv_lines(results)) + "\n",
        "fig_utility_loss.csv": "\n".join(_fig_series_lines(results, "utility_loss")) + "\n",
        "fig_privacy_leakage.csv": "\n".join(_fig_series_lines(results, "privacy_leakage")) + "\n",
        "fig_trr.csv": "\n".join(_fig_series_lines(results, "trr_rate")) + "\n",
    }
    existing = [name for name in list(targets) + ["summary.json"] if (out / name).exists()]
    if existing and not force:
        raise FileExistsError(
            f"refusing to overwrite {', '.join(sorted(existing))} in {out} (pass force/--force)"
        )

    summary_doc = dict(summary)
    summary_doc["environment"] = {
        "python": platform.python_version(),
        "numpy": np.__version__,
        "platform": platform.platform(),
    }
    summary_doc["timings"] = {
        "total_wall_time_seconds": sum(r.wall_time_seconds for r in results.rows),
        "per_cell": [
            {
                "method": r.cell.method.value,
                "epsilon": r.cell.epsilon,
                "seed": r.cell.seed,
                "wall_time_seconds": round(r.wall_time_seconds, 6),
                "status": r.status,
            }
            for r in results.rows
        ],
    }

    written = []
    for name, content in targets.items():
        path = out / name
        path.write_text(content, encoding="utf-8")
        written.append(path)
    summary_path = out / "summary.json"
    summary_path.write_text(json.dumps(summary_doc, indent=2) + "\n", encoding="utf-8")
    written.append(summary_path)
    return written
