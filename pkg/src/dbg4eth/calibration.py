"""Confidence generation, six post-hoc calibrators, ECE and ECE-reduction weighting."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize, minimize_scalar
from scipy.special import betaln, expit, logit

from . import kernels
from .errors import CannotFitError, EmptyInputError, NotFittedError, ValidationError

log = logging.getLogger(__name__)

PARAMETRIC = ("temperature", "platt", "beta")
NONPARAMETRIC = ("histogram", "isotonic", "bbq")
METHODS = PARAMETRIC + NONPARAMETRIC
_EPS = 1e-12


# -- confidence generation --------------------------------------------------

@dataclass(frozen=True)
class ConfidenceScore:
    branch: str
    raw: float
    value: float


@dataclass
class ConfidenceScaler:
    """z-score a branch's raw outputs with validation statistics, then squash with a sigmoid."""

    mean: float | None = None
    std: float | None = None

    def fit(self, raw_validation) -> "ConfidenceScaler":
        raw = np.asarray(raw_validation, dtype=float)
        if raw.size == 0:
            raise CannotFitError("cannot fit confidence statistics on an empty validation split")
        self.mean = float(raw.mean())
        self.std = float(raw.std())
        return self

    def transform(self, raw) -> np.ndarray:
        if self.mean is None:
            raise NotFittedError("ConfidenceScaler is not fitted")
        raw = np.asarray(raw, dtype=float)
        if self.std == 0.0:
            return np.full(raw.shape, 0.5)
        return np.clip(expit((raw - self.mean) / self.std), _EPS, 1.0 - _EPS)


def confidence_generate(raw, fit_stats: tuple[float, float], branch: str) -> list[ConfidenceScore]:
    """Map raw branch values to confidences using ``fit_stats = (mean, std)`` from validation."""
    scaler = ConfidenceScaler(*map(float, fit_stats))
    raw = np.asarray(raw, dtype=float)
    return [ConfidenceScore(branch, float(r), float(c)) for r, c in zip(raw, scaler.transform(raw))]


# -- expected calibration error ---------------------------------------------

def compute_ece(confidences, labels, n_bins: int = 10) -> float:
    """Equal-width-bin ECE of positive-class confidences against the positive rate."""
    conf = np.asarray(confidences, dtype=float).ravel()
    y = np.asarray(labels, dtype=float).ravel()
    if conf.size == 0:
        raise EmptyInputError("ECE is undefined on an empty sample")
    if conf.size != y.size:
        raise ValidationError("confidences and labels differ in length")
    if n_bins < 1:
        raise ValidationError("n_bins must be >= 1")
    count, sconf, slab = kernels.bin_stats(conf, y, n_bins)
    nz = count > 0
    return float(np.abs(slab[nz] - sconf[nz]).sum() / conf.size)


# -- calibrators -------------------------------------------------------------

def _nll(z, y):
    return float(np.sum(np.logaddexp(0.0, z) - y * z))


def _equal_frequency_edges(x_sorted: np.ndarray, n_bins: int) -> np.ndarray:
    n = x_sorted.size
    cuts = sorted({int(round(k * n / n_bins)) for k in range(1, n_bins)} - {0, n})
    edges = [(x_sorted[c - 1] + x_sorted[c]) / 2.0 for c in cuts if x_sorted[c - 1] < x_sorted[c]]
    return np.unique(np.asarray(edges, dtype=float))


def _bin_rates(x, y, edges):
    idx = np.searchsorted(edges, x, side="right")
    nb = edges.size + 1
    n = np.bincount(idx, minlength=nb).astype(float)
    pos = np.bincount(idx, weights=y, minlength=nb)
    return n, pos


@dataclass
class Calibrator:
    method: str
    params: dict = field(default_factory=dict)
    n_fit: int = 0

    @property
    def fitted(self) -> bool:
        return bool(self.params)

    def apply(self, confidence):
        if not self.fitted:
            raise NotFittedError(f"{self.method} calibrator is not fitted")
        p = np.asarray(confidence, dtype=float)
        scalar = p.ndim == 0
        p = np.atleast_1d(p)
        m, q = self.method, self.params
        if m in PARAMETRIC:
            pc = np.clip(p, _EPS, 1.0 - _EPS)
            if m == "temperature":
                out = expit(logit(pc) / q["T"])
            elif m == "platt":
                out = expit(q["a"] * logit(pc) + q["b"])
            else:
                out = expit(q["a"] * np.log(pc) - q["b"] * np.log1p(-pc) + q["c"])
        else:
            pc = np.clip(p, q["lo"], q["hi"])
            if m == "histogram":
                edges = np.asarray(q["edges"], dtype=float)
                out = np.asarray(q["values"], dtype=float)[np.searchsorted(edges, pc, side="right")]
            elif m == "isotonic":
                out = np.interp(pc, q["x"], q["y"])
            elif m == "bbq":
                out = np.zeros_like(pc)
                for w, edges, values in zip(q["weights"], q["edges"], q["values"]):
                    out += w * np.asarray(values)[np.searchsorted(np.asarray(edges), pc, side="right")]
            else:
                raise ValidationError(f"unknown calibration method {m!r}")
        out = np.clip(out, 0.0, 1.0)
        return float(out[0]) if scalar else out

    __call__ = apply

    def to_dict(self) -> dict:
        return {"method": self.method, "params": self.params, "n_fit": self.n_fit}

    @classmethod
    def from_dict(cls, d: dict) -> "Calibrator":
        return cls(d["method"], dict(d["params"]), int(d.get("n_fit", 0)))


def _check_fit_data(conf, labels, min_samples=10):
    p = np.asarray(conf, dtype=float).ravel()
    y = np.asarray(labels, dtype=float).ravel()
    if p.size != y.size:
        raise ValidationError("confidences and labels differ in length")
    if not (np.all(np.isfinite(p)) and np.all(np.isfinite(y))):
        raise CannotFitError("non-finite calibration inputs")
    if p.size < min_samples:
        raise CannotFitError(f"need at least {min_samples} samples, got {p.size}")
    if np.unique(y).size < 2:
        raise CannotFitError("calibration labels contain a single class")
    if np.any((y != 0) & (y != 1)):
        raise CannotFitError("labels must be binary")
    return p, y


def _fit_temperature(p, y):
    z = logit(np.clip(p, _EPS, 1 - _EPS))
    res = minimize_scalar(lambda lt: _nll(z / math.exp(lt), y), bounds=(-6.0, 6.0),
                          method="bounded", options={"xatol": 1e-8})
    return {"T": float(math.exp(res.x))}


def _fit_logistic(X, y, x0, bounds=None):
    def f(w):
        z = X @ w
        s = expit(z)
        return _nll(z, y), X.T @ (s - y)

    res = minimize(f, x0, jac=True, method="L-BFGS-B", bounds=bounds, options={"maxiter": 500})
    return res.x


def _fit_platt(p, y):
    z = logit(np.clip(p, _EPS, 1 - _EPS))
    a, b = _fit_logistic(np.column_stack([z, np.ones_like(z)]), y, np.array([1.0, 0.0]))
    return {"a": float(a), "b": float(b)}


def _fit_beta(p, y):
    pc = np.clip(p, _EPS, 1 - _EPS)
    X = np.column_stack([np.log(pc), -np.log1p(-pc), np.ones_like(pc)])
    a, b, c = _fit_logistic(X, y, np.array([1.0, 1.0, 0.0]), bounds=[(0, None), (0, None), (None, None)])
    return {"a": float(a), "b": float(b), "c": float(c)}


def _fit_histogram(p, y, n_bins=10):
    order = np.argsort(p, kind="stable")
    edges = _equal_frequency_edges(p[order], n_bins)
    n, pos = _bin_rates(p, y, edges)
    values = np.where(n > 0, pos / np.maximum(n, 1), y.mean())
    return {"edges": edges.tolist(), "values": values.tolist(), "lo": float(p.min()), "hi": float(p.max())}


def _fit_isotonic(p, y):
    xs, inv = np.unique(p, return_inverse=True)
    w = np.bincount(inv).astype(float)
    ym = np.bincount(inv, weights=y) / w
    fit = kernels.pava(ym, w)
    return {"x": xs.tolist(), "y": fit.tolist(), "lo": float(xs[0]), "hi": float(xs[-1])}


def bbq_bin_counts(n: int) -> range:
    c = n ** (1.0 / 3.0)
    return range(max(1, math.ceil(c / 2.0)), math.ceil(2.0 * c) + 1)


def _fit_bbq(p, y):
    order = np.argsort(p, kind="stable")
    ps = p[order]
    log_ml, all_edges, all_values = [], [], []
    for b in bbq_bin_counts(p.size):
        edges = _equal_frequency_edges(ps, b)
        n, pos = _bin_rates(p, y, edges)
        # Beta(1,1) prior per bin; marginal likelihood is a product of beta functions
        log_ml.append(float(np.sum(betaln(pos + 1.0, n - pos + 1.0) - betaln(1.0, 1.0))))
        all_edges.append(edges.tolist())
        all_values.append(((pos + 1.0) / (n + 2.0)).tolist())
    lm = np.asarray(log_ml)
    w = np.exp(lm - lm.max())
    w /= w.sum()
    return {"weights": w.tolist(), "edges": all_edges, "values": all_values,
            "lo": float(p.min()), "hi": float(p.max())}


_FITTERS = {
    "temperature": _fit_temperature,
    "platt": _fit_platt,
    "beta": _fit_beta,
    "histogram": _fit_histogram,
    "isotonic": _fit_isotonic,
    "bbq": _fit_bbq,
}


def fit_calibrator(method: str, confidences, labels) -> Calibrator:
    if method not in _FITTERS:
        raise ValidationError(f"unknown calibration method {method!r}; expected one of {METHODS}")
    p, y = _check_fit_data(confidences, labels)
    return Calibrator(method, _FITTERS[method](p, y), int(p.size))


def apply_calibrator(calibrator: Calibrator, confidence):
    return calibrator.apply(confidence)


# -- adaptive weighting ------------------------------------------------------

def ece_weights(delta_ece, tol: float = 1e-6) -> np.ndarray:
    """Normalise ECE reductions into weights; uniform when their sum vanishes.

    Negative weights are kept: a method that worsens ECE counts against itself.
    """
    d = np.asarray(delta_ece, dtype=float)
    total = d.sum()
    if abs(total) < tol:
        return np.full(d.shape, 1.0 / d.size)
    return d / total


def adaptive_weighting(delta_ece, outputs, n_methods: int = 6):
    """Return ``(alpha, P)`` with ``P = clip(sum_i alpha_i * C_i, 0, 1)``.

    ``outputs`` has the method axis first: shape ``(n_methods,)`` or ``(n_methods, n)``.
    """
    d = np.asarray(delta_ece, dtype=float)
    if d.shape != (n_methods,):
        raise ValidationError(f"expected {n_methods} ECE reductions, got shape {d.shape}")
    C = np.asarray(outputs, dtype=float)
    if C.shape[0] != n_methods:
        raise ValidationError(f"expected {n_methods} calibrated outputs, got {C.shape[0]}")
    alpha = ece_weights(d)
    P = np.clip(np.tensordot(alpha, C, axes=1), 0.0, 1.0)
    return alpha, P


@dataclass
class BranchCalibration:
    """All six calibrators for one branch, fitted and weighted on validation data."""

    branch: str
    n_bins: int = 10
    methods: tuple[str, ...] = METHODS
    calibrators: dict[str, Calibrator] = field(default_factory=dict)
    ece_before: float = float("nan")
    ece_after: dict[str, float] = field(default_factory=dict)

    def fit(self, conf_val, y_val) -> "BranchCalibration":
        self.ece_before = compute_ece(conf_val, y_val, self.n_bins)
        for m in self.methods:
            cal = fit_calibrator(m, conf_val, y_val)
            self.calibrators[m] = cal
            self.ece_after[m] = compute_ece(cal.apply(conf_val), y_val, self.n_bins)
        return self

    @property
    def delta_ece(self) -> np.ndarray:
        return np.array([self.ece_before - self.ece_after[m] for m in self.methods])

    @property
    def weights(self) -> np.ndarray:
        return ece_weights(self.delta_ece)

    def outputs(self, conf) -> np.ndarray:
        if not self.calibrators:
            raise NotFittedError(f"calibration for branch {self.branch} is not fitted")
        return np.stack([self.calibrators[m].apply(np.atleast_1d(conf)) for m in self.methods])

    def transform(self, conf) -> np.ndarray:
        return adaptive_weighting(self.delta_ece, self.outputs(conf), len(self.methods))[1]

    def report_rows(self) -> list[dict]:
        w = self.weights
        return [
            {"method": m, "branch": self.branch, "ECE_before": self.ece_before,
             "ECE_after": self.ece_after[m], "delta_ECE": self.ece_before - self.ece_after[m],
             "weight": float(w[k])}
            for k, m in enumerate(self.methods)
        ]

    def to_dict(self) -> dict:
        return {"branch": self.branch, "n_bins": self.n_bins, "methods": list(self.methods),
                "calibrators": {m: c.to_dict() for m, c in self.calibrators.items()},
                "ece_before": self.ece_before, "ece_after": self.ece_after}

    @classmethod
    def from_dict(cls, d: dict) -> "BranchCalibration":
        return cls(d["branch"], int(d["n_bins"]), tuple(d["methods"]),
                   {m: Calibrator.from_dict(c) for m, c in d["calibrators"].items()},
                   float(d["ece_before"]), {k: float(v) for k, v in d["ece_after"].items()})
