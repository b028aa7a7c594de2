"""Linear max-margin baselines over lagged returns, optionally plus news."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .features import FeatureSequence

log = logging.getLogger(__name__)

N_LAGS = 3


@dataclass
class LagSamples:
    """Design matrix for the baselines.

    Row ``k`` targets the day after feature step ``steps[k]``; ``y`` is in
    {-1, +1}.
    """

    X: np.ndarray
    y: np.ndarray
    steps: np.ndarray

    def __len__(self):
        return len(self.y)

    def subset(self, mask) -> "LagSamples":
        return LagSamples(self.X[mask], self.y[mask], self.steps[mask])


def build_lag_samples(features: FeatureSequence, with_news: bool = False) -> LagSamples:
    n = features.n_labeled
    if n <= N_LAGS - 1:
        raise ValueError(
            f"stock {features.stock_id}: {len(features)} feature days is too short for {N_LAGS} lags"
        )
    steps = np.arange(N_LAGS - 1, n)
    r = features.returns
    lagged = np.stack([r[steps - (N_LAGS - 1 - k)] for k in range(N_LAGS)], axis=1)
    X = np.hstack([lagged, features.histograms[steps]]) if with_news else lagged
    y = np.where(features.labels[steps] == 1, 1.0, -1.0)
    return LagSamples(X, y, steps)


@dataclass
class LinearHyperparams:
    lam: float = 1e-3
    epochs: int = 300
    lr: float = 0.5
    seed: int = 0
    standardize: bool = True


@dataclass
class LinearModel:
    w: np.ndarray
    b: float
    hyper: LinearHyperparams = field(default_factory=LinearHyperparams)
    objective_trace: list[float] = field(default_factory=list, repr=False)

    @property
    def width(self) -> int:
        return len(self.w)

    def decision(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.width:
            raise ValueError(f"feature width {X.shape[1]} != model width {self.width}")
        return X @ self.w + self.b

    def to_tsv(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for j, v in enumerate(self.w):
                fh.write(f"w{j}\t{float(v)!r}\n")
            fh.write(f"b\t{float(self.b)!r}\n")

    @classmethod
    def from_tsv(cls, path: str | Path) -> "LinearModel":
        w, b = [], 0.0
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            key, val = line.split("\t")
            if key == "b":
                b = float(val)
            else:
                w.append(float(val))
        return cls(np.array(w), b)


def hinge_objective(w, b, X, y, lam) -> float:
    margins = 1.0 - y * (X @ w + b)
    return float(np.mean(np.maximum(margins, 0.0)) + 0.5 * lam * (w @ w))


def train_linear(samples: LagSamples, hyper: LinearHyperparams | None = None) -> LinearModel:
    """Minimise mean hinge loss + ``lam/2 * |w|^2`` by full-batch subgradient descent.

    Features are standardised internally and the scaling folded back into
    ``w`` and ``b``. The best iterate seen is returned; ``objective_trace``
    records the best-so-far objective per epoch.
    """
    hyper = hyper or LinearHyperparams()
    X, y = np.asarray(samples.X, dtype=np.float64), np.asarray(samples.y, dtype=np.float64)
    if len(y) == 0:
        raise ValueError("no training samples")
    d = X.shape[1]
    classes = np.unique(y)
    if len(y) < 2 or len(classes) < 2:
        label = float(classes[0]) if len(classes) == 1 else 1.0
        log.warning("degenerate training set (%d samples, classes %s); using a constant model", len(y), classes)
        # zero margin maps to class 0, so a constant "up" model needs a positive bias
        return LinearModel(np.zeros(d), 1.0 if label > 0 else 0.0, hyper)

    if hyper.standardize:
        mu = X.mean(axis=0)
        sd = X.std(axis=0)
        sd[sd == 0] = 1.0
    else:
        mu, sd = np.zeros(d), np.ones(d)
    Z = (X - mu) / sd

    rng = np.random.default_rng(hyper.seed)
    w = rng.normal(scale=1e-3, size=d)
    b = 0.0
    best = (hinge_objective(w, b, Z, y, hyper.lam), w.copy(), b)
    trace = []
    n = len(y)
    for t in range(1, hyper.epochs + 1):
        active = y * (Z @ w + b) < 1.0
        gw = hyper.lam * w - (y[active] @ Z[active]) / n
        gb = -np.sum(y[active]) / n
        step = hyper.lr / np.sqrt(t)
        w = w - step * gw
        b = b - step * gb
        obj = hinge_objective(w, b, Z, y, hyper.lam)
        if obj < best[0]:
            best = (obj, w.copy(), b)
        trace.append(best[0])
    _, wz, bz = best
    w_raw = wz / sd
    b_raw = float(bz - np.sum(wz * mu / sd))
    return LinearModel(w_raw, b_raw, hyper, trace)


def predict_linear(model: LinearModel, x) -> np.ndarray | int:
    """Class 1 when ``w.x + b > 0``, else 0. Accepts one vector or a matrix."""
    x = np.asarray(x, dtype=np.float64)
    out = (model.decision(x) > 0).astype(np.int64)
    return int(out[0]) if x.ndim == 1 else out


def accuracy_on(model: LinearModel, samples: LagSamples) -> float:
    pred = predict_linear(model, samples.X)
    return float(np.mean(pred == (samples.y > 0)))

