"""Flat ``key = value`` pipeline configuration; unknown keys are rejected."""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path

from .errors import ConfigError
from .training import DEFAULT_LR_GRID


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _names(text: str) -> tuple[str, ...]:
    return tuple(v.strip() for v in text.split(",") if v.strip())


# config key -> (attribute, parser)
_KEYS = {
    "paths.transactions": ("transactions", str),
    "paths.labels": ("labels", str),
    "paths.out": ("out_dir", str),
    "types": ("types", _names),
    "sample.h": ("h", int),
    "sample.K": ("K", int),
    "ldg.T": ("T", int),
    "gsg.hidden": ("gsg_hidden", int),
    "gsg.layers": ("gsg_layers", int),
    "gsg.lambda_contrastive": ("gsg_lambda", float),
    "gsg.tau": ("gsg_tau", float),
    "gsg.aug.pe1": ("aug_pe1", float),
    "gsg.aug.pe2": ("aug_pe2", float),
    "gsg.aug.pf1": ("aug_pf1", float),
    "gsg.aug.pf2": ("aug_pf2", float),
    "gsg.aug.centrality": ("aug_centrality", str),
    "ldg.hidden": ("ldg_hidden", int),
    "ldg.pool_rate": ("ldg_pool_rate", float),
    "ldg.pool_levels": ("ldg_pool_levels", int),
    "calib.bins": ("calib_bins", int),
    "clf.kind": ("clf_kind", str),
    "clf.trees": ("clf_trees", int),
    "clf.depth": ("clf_depth", int),
    "clf.eta": ("clf_eta", float),
    "split.train": ("split_train", float),
    "split.validation": ("split_validation", float),
    "split.test": ("split_test", float),
    "seed": ("seed", int),
    "train.epochs": ("epochs", int),
    "train.patience": ("patience", int),
    "train.batch_size": ("batch_size", int),
    "train.lr_grid": ("lr_grid", _floats),
}


@dataclass
class PipelineConfig:
    transactions: str = "transactions.csv"
    labels: str = "labels.csv"
    out_dir: str = "out"
    types: tuple[str, ...] = ()  # empty: every label name in the labels file
    h: int = 2
    K: int = 2000
    T: int = 10
    gsg_hidden: int = 128
    gsg_layers: int = 2
    gsg_lambda: float = 0.5
    gsg_tau: float = 0.5
    aug_pe1: float = 0.3
    aug_pe2: float = 0.4
    aug_pf1: float = 0.1
    aug_pf2: float = 0.0
    aug_centrality: str = "degree"
    ldg_hidden: int = 64
    ldg_pool_rate: float = 0.1
    ldg_pool_levels: int = 2
    calib_bins: int = 10
    clf_kind: str = "gbdt"
    clf_trees: int = 100
    clf_depth: int = 3
    clf_eta: float = 0.1
    split_train: float = 0.7
    split_validation: float = 0.15
    split_test: float = 0.15
    seed: int = 0
    epochs: int = 100
    patience: int = 10
    batch_size: int = 32
    lr_grid: tuple[float, ...] = DEFAULT_LR_GRID
    base_dir: str = field(default=".", repr=False)

    @property
    def fractions(self) -> tuple[float, float, float]:
        return (self.split_train, self.split_validation, self.split_test)

    def path(self, name: str) -> Path:
        p = Path(getattr(self, name))
        return p if p.is_absolute() else Path(self.base_dir) / p

    def validate(self) -> "PipelineConfig":
        if abs(sum(self.fractions) - 1.0) > 1e-9 or min(self.fractions) <= 0:
            raise ConfigError(f"split fractions must be positive and sum to 1, got {self.fractions}")
        for name in ("h", "K", "T", "gsg_hidden", "gsg_layers", "ldg_hidden", "ldg_pool_levels",
                     "calib_bins", "clf_trees", "clf_depth", "epochs", "patience", "batch_size"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if not self.lr_grid or min(self.lr_grid) <= 0:
            raise ConfigError("train.lr_grid must list positive learning rates")
        if not 0 < self.ldg_pool_rate <= 1:
            raise ConfigError("ldg.pool_rate must lie in (0, 1]")
        if self.clf_kind not in ("gbdt", "mlp", "logistic"):
            raise ConfigError(f"clf.kind must be gbdt, mlp or logistic, got {self.clf_kind!r}")
        return self

    @classmethod
    def from_mapping(cls, mapping: dict[str, str], base_dir: str = ".") -> "PipelineConfig":
        cfg = cls(base_dir=base_dir)
        for key, raw in mapping.items():
            if key not in _KEYS:
                raise ConfigError(f"unknown config key {key!r}")
            attr, parse = _KEYS[key]
            try:
                setattr(cfg, attr, parse(raw))
            except ValueError as exc:
                raise ConfigError(f"bad value for {key}: {raw!r} ({exc})") from None
        return cfg.validate()

    @classmethod
    def from_file(cls, path) -> "PipelineConfig":
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        mapping: dict[str, str] = {}
        for n, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{n}: expected key = value")
            k, v = (s.strip() for s in line.split("=", 1))
            mapping[k] = v
        return cls.from_mapping(mapping, base_dir=str(path.parent))

    def to_text(self) -> str:
        lines = []
        for key, (attr, _) in _KEYS.items():
            v = getattr(self, attr)
            lines.append(f"{key} = {','.join(map(str, v)) if isinstance(v, tuple) else v}")
        return "\n".join(lines) + "\n"


assert {a for a, _ in _KEYS.values()} == {f.name for f in fields(PipelineConfig)} - {"base_dir"}
