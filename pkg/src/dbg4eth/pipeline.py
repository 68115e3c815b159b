"""End-to-end orchestration: ingest, branch training, calibration, classification, reports."""

from __future__ import annotations

import csv
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .calibration import METHODS, PARAMETRIC, BranchCalibration, ConfidenceScaler, ece_weights
from .classifier import MODEL_HEADER, make_classifier, model_from_dict
from .config import PipelineConfig
from .errors import DBG4ETHError, SchemaError, StageError, ValidationError
from .gsg import AugmentationConfig, GsgEncoder
from .ingest import (
    Dataset,
    LedgerIndex,
    build_task_dataset,
    load_dataset,
    parse_labels,
    parse_transactions_report,
    persist_dataset,
)
from .ingest.dataset import SPLITS
from .ldg import LdgEncoder
from .metrics import binary_metrics
from .training import GsgTrainer, LdgTrainer, TrainConfig, train_branch

log = logging.getLogger(__name__)

CHECKPOINT_HEADER = "dbg4eth-checkpoint v1"
FULL = "full"
ABLATIONS = (
    "w/o GSG",
    "w/o LDG",
    "w/o calibration",
    "w/o Param. calibration",
    "w/o Non-param. calibration",
    "w/o Ada. Param. calibration",
    "w/o Ada. Non-param. calibration",
    "w/o Ada. calibration",
    "w/o LightGBM",
)
METRIC_KEYS = ("precision", "recall", "f1", "accuracy")


@dataclass
class FitLog:
    """Which centres entered which fitting step; used to prove the test split stays unseen."""

    events: list[tuple[str, str, tuple[str, ...]]] = field(default_factory=list)

    def record(self, task: str, stage: str, centers) -> None:
        self.events.append((task, stage, tuple(centers)))

    def centers(self, task: str | None = None) -> set[str]:
        return {c for t, _, cs in self.events if task in (None, t) for c in cs}


@dataclass
class BranchState:
    raw: dict[str, np.ndarray]
    scaler: ConfidenceScaler
    calibration: BranchCalibration
    lr: float
    conf: dict[str, np.ndarray] = field(default_factory=dict)
    outputs: dict[str, np.ndarray] = field(default_factory=dict)  # (6, n) per split


@dataclass
class TaskResult:
    label_name: str
    metrics: dict
    calibration_rows: list[dict]
    ablation: dict[str, dict] = field(default_factory=dict)
    lr: dict[str, float] = field(default_factory=dict)
    n_test: int = 0


@dataclass
class PipelineResult:
    tasks: dict[str, TaskResult]
    fit_log: FitLog
    out_dir: Path
    artifacts: list[str]
    splits: dict[str, dict[str, str]] = field(default_factory=dict)


# -- stages ------------------------------------------------------------------

class _Stage:
    def __init__(self, name: str):
        self.name = name

    def __enter__(self):
        self.t0 = time.perf_counter()
        log.info("stage %s", self.name)
        return self

    def __exit__(self, et, ev, tb):
        if ev is not None and not isinstance(ev, StageError):
            raise StageError(self.name, ev) from ev
        log.info("stage %s done in %.1fs", self.name, time.perf_counter() - self.t0)
        return False


def load_ledger(cfg: PipelineConfig) -> tuple[LedgerIndex, dict[str, str]]:
    with open(cfg.path("transactions"), encoding="utf-8", newline="") as fh:
        records, skipped = parse_transactions_report(fh)
    if skipped:
        log.warning("%d malformed transaction rows skipped", len(skipped))
    with open(cfg.path("labels"), encoding="utf-8", newline="") as fh:
        labels = parse_labels(fh)
    return LedgerIndex(records), labels


def task_types(cfg: PipelineConfig, labels: dict[str, str]) -> list[str]:
    present = sorted(set(labels.values()))
    if not cfg.types:
        return present
    missing = [t for t in cfg.types if t not in present]
    if missing:
        raise ValidationError(f"types not present in labels: {missing}")
    return list(cfg.types)


def build_datasets(cfg: PipelineConfig, out: Path | None = None) -> dict[str, Dataset]:
    index, labels = load_ledger(cfg)
    datasets = {}
    for t in task_types(cfg, labels):
        ds = build_task_dataset(t, labels, index, cfg.K, cfg.h, cfg.T, cfg.fractions, cfg.seed)
        datasets[t] = ds
        if out is not None:
            persist_dataset(out / _slug(t), ds.instances, ds.manifest)
    return datasets


def _slug(name: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "-_" else "_" for ch in name)


def _weights(variant: str, delta: np.ndarray) -> np.ndarray:
    par = np.array([m in PARAMETRIC for m in METHODS])
    if variant == "w/o Ada. calibration":
        return np.full(len(METHODS), 1.0 / len(METHODS))
    if variant == "w/o Param. calibration":
        a = np.zeros(len(METHODS))
        a[~par] = ece_weights(delta[~par])
        return a
    if variant == "w/o Non-param. calibration":
        a = np.zeros(len(METHODS))
        a[par] = ece_weights(delta[par])
        return a
    a = ece_weights(delta)
    if variant == "w/o Ada. Param. calibration":
        a[par] = a[par].sum() / par.sum()
    elif variant == "w/o Ada. Non-param. calibration":
        a[~par] = a[~par].sum() / (~par).sum()
    return a


def _branch_prob(b: BranchState, split: str, variant: str) -> np.ndarray:
    if variant == "w/o calibration":
        return b.conf[split]
    a = _weights(variant, b.calibration.delta_ece)
    return np.clip(a @ b.outputs[split], 0.0, 1.0)


def _features(branches: dict[str, BranchState], splits, variant: str) -> np.ndarray:
    cols = []
    for name in ("gsg", "ldg"):
        if (variant == "w/o GSG" and name == "gsg") or (variant == "w/o LDG" and name == "ldg"):
            continue
        cols.append(np.concatenate([_branch_prob(branches[name], s, variant) for s in splits]))
    return np.column_stack(cols)


def _fit_predict(cfg: PipelineConfig, kind: str, X_fit, y_fit, X_test):
    model = make_classifier(kind, cfg.seed, cfg.clf_trees, cfg.clf_depth, cfg.clf_eta)
    model.fit(X_fit, y_fit)
    return model, model.predict_proba(X_test)


def run_task(name: str, ds: Dataset, cfg: PipelineConfig, fit_log: FitLog, ablate: bool = False,
             checkpoint: Path | None = None) -> TaskResult:
    split = {s: ds.split(s) for s in SPLITS}
    centers = {s: [g.center for g in split[s]] for s in SPLITS}
    y = {s: np.array([g.label for g in split[s]], dtype=float) for s in SPLITS}
    for s in ("train", "validation"):
        if len(set(y[s].tolist())) < 2:
            raise ValidationError(f"{name}: {s} split needs both classes")
    tcfg = TrainConfig(cfg.lr_grid, cfg.epochs, cfg.patience, cfg.batch_size, cfg.seed)
    aug = AugmentationConfig(cfg.aug_pe1, cfg.aug_pe2, cfg.aug_pf1, cfg.aug_pf2, cfg.aug_centrality)
    trainers = {
        "gsg": GsgTrainer(cfg.gsg_hidden, cfg.gsg_layers, cfg.gsg_lambda, cfg.gsg_tau, aug),
        "ldg": LdgTrainer(cfg.ldg_hidden, cfg.T, cfg.ldg_pool_rate, cfg.ldg_pool_levels),
    }
    branches: dict[str, BranchState] = {}
    models = {}
    for bname, tr in trainers.items():
        with _Stage(f"{name}:train_{bname}"):
            view = (lambda g: g.static) if bname == "gsg" else (lambda g: g.dynamic)
            items = {s: tr.prepare([view(g) for g in split[s]]) for s in SPLITS}
            fit_log.record(name, f"{bname}:fit", centers["train"])
            fit_log.record(name, f"{bname}:select_lr", centers["validation"])
            res = train_branch(tr, items["train"], items["validation"], tcfg)
            models[bname] = res.model
            raw = {s: tr.raw_values(res.model, items[s]) for s in SPLITS}
        with _Stage(f"{name}:calibrate_{bname}"):
            fit_log.record(name, f"{bname}:confidence", centers["validation"])
            scaler = ConfidenceScaler().fit(raw["validation"])
            conf = {s: scaler.transform(raw[s]) for s in SPLITS}
            fit_log.record(name, f"{bname}:calibrators", centers["validation"])
            cal = BranchCalibration(bname, cfg.calib_bins).fit(conf["validation"], y["validation"])
            branches[bname] = BranchState(raw, scaler, cal, res.lr, conf, {s: cal.outputs(conf[s]) for s in SPLITS})

    fit_splits = ("train", "validation")
    y_fit = np.concatenate([y[s] for s in fit_splits])
    with _Stage(f"{name}:classify"):
        fit_log.record(name, "classifier", centers["train"] + centers["validation"])
        clf, prob = _fit_predict(cfg, cfg.clf_kind, _features(branches, fit_splits, FULL), y_fit,
                                 _features(branches, ("test",), FULL))
        metrics = binary_metrics((prob >= 0.5).astype(int), y["test"].astype(int))

    rows = []
    for b in branches.values():
        rows.extend(b.calibration.report_rows())
    result = TaskResult(name, metrics, rows, lr={k: b.lr for k, b in branches.items()}, n_test=len(y["test"]))
    result.metrics.update({f"ece_{k}_before": b.calibration.ece_before for k, b in branches.items()})
    result.metrics.update({
        f"ece_{k}_after": _ece_after(b, y["validation"], cfg.calib_bins) for k, b in branches.items()
    })

    if ablate:
        with _Stage(f"{name}:ablate"):
            result.ablation[FULL] = metrics
            for v in ABLATIONS:
                kind = "mlp" if v == "w/o LightGBM" else cfg.clf_kind
                fit_log.record(name, f"ablation:{v}", centers["train"] + centers["validation"])
                _, p = _fit_predict(cfg, kind, _features(branches, fit_splits, v), y_fit, _features(branches, ("test",), v))
                result.ablation[v] = binary_metrics((p >= 0.5).astype(int), y["test"].astype(int))

    if checkpoint is not None:
        save_checkpoint(checkpoint / _slug(name), cfg, models, branches, clf)
    return result


def _ece_after(b: BranchState, y_val, bins) -> float:
    from .calibration import compute_ece

    return compute_ece(_branch_prob(b, "validation", FULL), y_val, bins)


# -- checkpoints -------------------------------------------------------------

def save_checkpoint(directory: Path, cfg: PipelineConfig, models, branches: dict[str, BranchState], clf) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    ldg = models["ldg"]
    torch.save({"header": CHECKPOINT_HEADER, "state": models["gsg"].state_dict(),
                "hidden": cfg.gsg_hidden, "layers": cfg.gsg_layers}, directory / "gsg.pt")
    torch.save({"header": CHECKPOINT_HEADER, "state": ldg.state_dict(), "hidden": ldg.hidden, "T": ldg.T,
                "pool_rate": ldg.pool_rate, "pool_levels": ldg.pool_levels, "max_clusters": ldg.max_clusters},
               directory / "ldg.pt")
    cal = {"header": CHECKPOINT_HEADER}
    for k, b in branches.items():
        cal[k] = {"mean": b.scaler.mean, "std": b.scaler.std, "lr": b.lr, "calibration": b.calibration.to_dict()}
    (directory / "calibration.json").write_text(json.dumps(cal, indent=1), encoding="utf-8")
    (directory / "classifier.json").write_text(json.dumps({"header": MODEL_HEADER, "model": clf.to_dict()}), encoding="utf-8")


def _check_header(d: dict, expected: str, path) -> None:
    if d.get("header") != expected:
        raise SchemaError(f"{path}: expected header {expected!r}, found {d.get('header')!r}")


def load_checkpoint(directory: Path):
    directory = Path(directory)
    g = torch.load(directory / "gsg.pt", weights_only=False)
    _check_header(g, CHECKPOINT_HEADER, directory / "gsg.pt")
    gsg = GsgEncoder(g["hidden"], g["layers"])
    gsg.load_state_dict(g["state"])
    gsg.is_fitted = True
    l = torch.load(directory / "ldg.pt", weights_only=False)
    _check_header(l, CHECKPOINT_HEADER, directory / "ldg.pt")
    ldg = LdgEncoder(l["hidden"], l["T"], l["pool_rate"], l["pool_levels"], l["max_clusters"])
    ldg.load_state_dict(l["state"])
    ldg.is_fitted = True
    cal = json.loads((directory / "calibration.json").read_text(encoding="utf-8"))
    _check_header(cal, CHECKPOINT_HEADER, directory / "calibration.json")
    clf = json.loads((directory / "classifier.json").read_text(encoding="utf-8"))
    _check_header(clf, MODEL_HEADER, directory / "classifier.json")
    calib = {k: (ConfidenceScaler(cal[k]["mean"], cal[k]["std"]), BranchCalibration.from_dict(cal[k]["calibration"]))
             for k in ("gsg", "ldg")}
    return {"gsg": gsg, "ldg": ldg}, calib, model_from_dict(clf["model"])


def evaluate_task(name: str, ds: Dataset, checkpoint: Path) -> TaskResult:
    models, calib, clf = load_checkpoint(checkpoint / _slug(name))
    test = ds.split("test")
    y = np.array([g.label for g in test])
    cols, rows = [], []
    for bname, tr in (("gsg", GsgTrainer()), ("ldg", LdgTrainer())):
        view = (lambda g: g.static) if bname == "gsg" else (lambda g: g.dynamic)
        raw = tr.raw_values(models[bname], tr.prepare([view(g) for g in test]))
        scaler, cal = calib[bname]
        cols.append(cal.transform(scaler.transform(raw)))
        rows.extend(cal.report_rows())
    prob = clf.predict_proba(np.column_stack(cols))
    metrics = binary_metrics((prob >= 0.5).astype(int), y)
    return TaskResult(name, metrics, rows, n_test=len(y))


# -- reports -----------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.6f}"
    return str(v)


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def write_reports(out: Path, tasks: dict[str, TaskResult], ablate: bool) -> list[str]:
    written = []
    mcols = list(METRIC_KEYS) + ["precision_undefined"]
    extra = ["ece_gsg_before", "ece_gsg_after", "ece_ldg_before", "ece_ldg_after"]
    rows = []
    for t, r in tasks.items():
        rows.append([t, *[r.metrics[k] for k in mcols], r.n_test,
                     *[r.metrics.get(k, float("nan")) for k in extra],
                     r.lr.get("gsg", float("nan")), r.lr.get("ldg", float("nan"))])
    _write_csv(out / "metrics.csv", ["type", *mcols, "n_test", *extra, "lr_gsg", "lr_ldg"], rows)
    written.append("metrics.csv")
    crow = [[t, c["method"], c["branch"], c["ECE_before"], c["ECE_after"], c["delta_ECE"], c["weight"]]
            for t, r in tasks.items() for c in r.calibration_rows]
    _write_csv(out / "calibration.csv", ["type", "method", "branch", "ECE_before", "ECE_after", "delta_ECE", "weight"], crow)
    written.append("calibration.csv")
    if ablate:
        arow = [[v, t, *[r.ablation[v][k] for k in METRIC_KEYS]]
                for t, r in tasks.items() for v in (*ABLATIONS, FULL)]
        _write_csv(out / "ablation.csv", ["variant", "type", *METRIC_KEYS], arow)
        written.append("ablation.csv")
    return written


def _write_run_manifest(out: Path, mode: str, complete: bool, artifacts: list[str], error: str = "") -> None:
    body = {"mode": mode, "complete": complete, "artifacts": sorted(artifacts)}
    if error:
        body["error"] = error
    (out / "run_manifest.json").write_text(json.dumps(body, indent=1) + "\n", encoding="utf-8")


def run_pipeline(cfg: PipelineConfig, mode: str = "train", checkpoint=None) -> PipelineResult:
    """Run ``train``, ``evaluate`` or ``ablate`` and write reports under ``cfg.out_dir``."""
    if mode not in ("train", "evaluate", "ablate"):
        raise ValidationError(f"unknown mode {mode!r}")
    out = cfg.path("out_dir")
    out.mkdir(parents=True, exist_ok=True)
    artifacts: list[str] = []
    _write_run_manifest(out, mode, False, artifacts)
    fit_log = FitLog()
    try:
        with _Stage("ingest"):
            data_dir = out / "datasets"
            if mode == "evaluate" and data_dir.exists():
                datasets = {p.name: load_dataset(p) for p in sorted(data_dir.iterdir()) if p.is_dir()}
            else:
                datasets = build_datasets(cfg, data_dir)
                artifacts.append("datasets")
        tasks: dict[str, TaskResult] = {}
        if mode == "evaluate":
            if checkpoint is None:
                raise ValidationError("evaluate mode needs a checkpoint directory")
            for name, ds in datasets.items():
                with _Stage(f"{name}:evaluate"):
                    tasks[name] = evaluate_task(name, ds, Path(checkpoint))
        else:
            ck = out / "checkpoint"
            for name, ds in datasets.items():
                tasks[name] = run_task(name, ds, cfg, fit_log, ablate=(mode == "ablate"), checkpoint=ck)
            artifacts.append("checkpoint")
        with _Stage("report"):
            artifacts += write_reports(out, tasks, ablate=(mode == "ablate"))
    except DBG4ETHError as exc:
        _write_run_manifest(out, mode, False, artifacts, str(exc))
        raise
    _write_run_manifest(out, mode, True, artifacts)
    splits = {n: ds.manifest.split_of() for n, ds in datasets.items()}
    return PipelineResult(tasks, fit_log, out, artifacts, splits)
