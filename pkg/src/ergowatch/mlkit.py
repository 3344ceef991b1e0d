"""Self-contained numerical kernels shared by every layer.

Linear SVM (primal stochastic subgradient with iterate averaging),
one-vs-rest multiclass, PCA, ridge least squares, and the standard
normal pdf/cdf. numpy only; models serialize to versioned JSON.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

MODEL_FORMAT_VERSION = 1

SQRT_2PI = math.sqrt(2.0 * math.pi)


class TrainingError(ValueError):
    """Raised when a dataset cannot be trained on (single class, bad shapes)."""


class RankDeficientError(ValueError):
    """Raised by least_squares when the unregularized normal equations are singular."""


# ---------------------------------------------------------------------------
# linear models


@dataclass
class LinearModel:
    """Hyperplane w·x + bias; label is the sign of the score."""

    w: np.ndarray
    bias: float

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=float)
        if self.w.ndim != 1 or self.w.size < 1:
            raise ValueError("weight vector must be 1-D and non-empty")
        if not np.all(np.isfinite(self.w)) or not math.isfinite(self.bias):
            raise ValueError("model parameters must be finite")

    @property
    def dim(self) -> int:
        return self.w.size

    def to_dict(self) -> dict:
        return {
            "format_version": MODEL_FORMAT_VERSION,
            "kind": "linear",
            "dim": self.dim,
            "w": self.w.tolist(),
            "bias": float(self.bias),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LinearModel":
        if d.get("kind") != "linear":
            raise ValueError(f"not a linear model record: kind={d.get('kind')!r}")
        m = cls(np.asarray(d["w"], dtype=float), float(d["bias"]))
        if m.dim != int(d["dim"]):
            raise ValueError("dim field disagrees with weight length")
        return m


@dataclass
class MulticlassModel:
    """One-vs-rest stack of LinearModels, one per class label."""

    models: list[LinearModel]
    labels: list[str]

    def __post_init__(self):
        if len(self.models) != len(self.labels) or len(self.models) < 2:
            raise ValueError("need one submodel per label, at least two classes")
        dims = {m.dim for m in self.models}
        if len(dims) != 1:
            raise ValueError("submodels disagree on dimension")

    @property
    def dim(self) -> int:
        return self.models[0].dim

    def to_dict(self) -> dict:
        return {
            "format_version": MODEL_FORMAT_VERSION,
            "kind": "one-vs-rest",
            "dim": self.dim,
            "labels": list(self.labels),
            "models": [m.to_dict() for m in self.models],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MulticlassModel":
        if d.get("kind") != "one-vs-rest":
            raise ValueError(f"not a one-vs-rest record: kind={d.get('kind')!r}")
        return cls([LinearModel.from_dict(m) for m in d["models"]], list(d["labels"]))


def save_model(model: LinearModel | MulticlassModel, path) -> None:
    with open(path, "w") as f:
        json.dump(model.to_dict(), f)
        f.write("\n")


def load_model(path) -> LinearModel | MulticlassModel:
    with open(path) as f:
        d = json.load(f)
    if d.get("kind") == "one-vs-rest":
        return MulticlassModel.from_dict(d)
    return LinearModel.from_dict(d)


def predict(model: LinearModel, x) -> tuple[float, int]:
    """Score w·x + bias and its sign label (+1 for score >= 0)."""
    x = np.asarray(x, dtype=float)
    if x.shape != (model.dim,):
        raise ValueError(f"expected dimension {model.dim}, got shape {x.shape}")
    score = float(model.w @ x + model.bias)
    return score, (1 if score >= 0 else -1)


def _as_dataset(samples) -> tuple[np.ndarray, np.ndarray]:
    if len(samples) == 0:
        raise TrainingError("empty training set")
    X = np.asarray([np.asarray(x, dtype=float) for x, _ in samples])
    y = np.asarray([float(lbl) for _, lbl in samples])
    if X.ndim != 2:
        raise TrainingError("samples disagree on dimension")
    if not set(np.unique(y)) <= {-1.0, 1.0}:
        raise TrainingError("labels must be -1 or +1")
    return X, y


def svm_objective(w: np.ndarray, bias: float, X: np.ndarray, y: np.ndarray, lam: float) -> float:
    """Regularized hinge loss: lam/2 ||w||^2 + mean max(0, 1 - y(w·x+b))."""
    margins = y * (X @ w + bias)
    return 0.5 * lam * float(w @ w) + float(np.maximum(0.0, 1.0 - margins).mean())


def train_linear_svm(
    samples,
    lam: float = 1e-3,
    epochs: int = 20,
    seed: int = 0,
    init: LinearModel | None = None,
    record: list | None = None,
) -> LinearModel:
    """Train a soft-margin linear SVM by stochastic subgradient descent.

    Features are standardized internally (the affine map folds back into the
    returned raw-space weights), steps are 1/(lam·t) with projection onto
    the 1/sqrt(lam) ball, iterates are averaged after a one-epoch burn-in,
    and the epoch-end averaged checkpoint with the lowest raw-space objective
    is what gets returned, so the trainer's checkpoint objectives never
    increase. Deterministic for a fixed seed. `init` warm-starts the first
    iterate (incremental refits on appended data); `record`, if given a
    list, receives the selected objective after every post-burn-in epoch.
    """
    if lam <= 0:
        raise TrainingError("regularization must be positive")
    X_raw, y = _as_dataset(samples)
    if np.unique(y).size < 2:
        raise TrainingError("training data contains a single class")
    n, dim = X_raw.shape
    mean = X_raw.mean(axis=0)
    scale = X_raw.std(axis=0)
    scale[scale < 1e-12] = 1.0
    X = (X_raw - mean) / scale

    def fold(ws: np.ndarray, bs: float) -> tuple[np.ndarray, float]:
        wr = ws / scale
        return wr, bs - float(wr @ mean)

    if init is not None:
        if init.dim != dim:
            raise ValueError(f"warm start has dimension {init.dim}, data has {dim}")
        w = init.w * scale
        b = float(init.bias) + float(init.w @ mean)
    else:
        w, b = np.zeros(dim), 0.0

    rng = np.random.default_rng(seed)
    radius = 1.0 / math.sqrt(lam)
    burn = n if epochs > 1 else 0
    w_sum = np.zeros(dim)
    b_sum = 0.0
    t = 0
    averaged = 0
    best: tuple[float, np.ndarray, float] | None = None
    for _ in range(epochs):
        for i in rng.permutation(n):
            t += 1
            eta = 1.0 / (lam * t)
            margin = y[i] * (w @ X[i] + b)
            w *= 1.0 - eta * lam
            if margin < 1.0:
                w += (eta * y[i]) * X[i]
                b += min(eta, 1.0) * y[i]  # bias stays unregularized
            norm = float(np.linalg.norm(w))
            if norm > radius:
                w *= radius / norm
            if t > burn:
                w_sum += w
                b_sum += b
                averaged += 1
        if averaged:
            cand_w, cand_b = fold(w_sum / averaged, b_sum / averaged)
            cand_obj = svm_objective(cand_w, cand_b, X_raw, y, lam)
            if best is None or cand_obj < best[0]:
                best = (cand_obj, cand_w, cand_b)
            if record is not None:
                record.append(best[0])
    assert best is not None
    return LinearModel(best[1], best[2])


def train_one_vs_rest(
    samples, labels: list[str], lam: float = 1e-3, epochs: int = 20, seed: int = 0
) -> MulticlassModel:
    """One binary SVM per label over (vector, label) samples."""
    models = []
    for k, lbl in enumerate(labels):
        binary = [(x, 1 if sl == lbl else -1) for x, sl in samples]
        models.append(train_linear_svm(binary, lam=lam, epochs=epochs, seed=seed + k))
    return MulticlassModel(models, list(labels))


def predict_class(model: MulticlassModel, x) -> str:
    """Argmax of the one-vs-rest scores; ties go to the lowest class index."""
    scores = [predict(m, x)[0] for m in model.models]
    return model.labels[int(np.argmax(scores))]


# ---------------------------------------------------------------------------
# PCA


@dataclass
class PcaBasis:
    """Affine subspace fit: mean + span of orthonormal components."""

    mean: np.ndarray
    components: np.ndarray  # (k, dim), rows orthonormal
    eigenvalues: np.ndarray  # (k,), nonincreasing

    def project(self, x) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.mean) @ self.components.T

    def reconstruct(self, coords) -> np.ndarray:
        return self.mean + np.asarray(coords, dtype=float) @ self.components


def pca_fit(data, k: int) -> PcaBasis:
    """Top-k principal components of the rows of `data`.

    Uses an SVD of the centered data matrix; eigenvalues are the population
    covariance eigenvalues (divide by M). Component signs are fixed so the
    largest-magnitude entry of each component is positive.
    """
    X = np.asarray(data, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError("need a 2-D data matrix with at least two rows")
    m, dim = X.shape
    if not 1 <= k <= min(m, dim):
        raise ValueError(f"k={k} out of range for {m}x{dim} data")
    mean = X.mean(axis=0)
    _, s, vt = np.linalg.svd(X - mean, full_matrices=False)
    comps = vt[:k].copy()
    for row in comps:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0
    return PcaBasis(mean, comps, (s[:k] ** 2) / m)


# ---------------------------------------------------------------------------
# least squares


def least_squares(Xi, y, ridge: float = 0.0) -> np.ndarray:
    """argmin ||Xi·b − y||² + ridge·||b||² via the normal equations.

    Solved with a Cholesky factorization of XiᵀXi + ridge·I; a singular
    factorization with ridge=0 raises RankDeficientError.
    """
    Xi = np.atleast_2d(np.asarray(Xi, dtype=float))
    y = np.asarray(y, dtype=float)
    if ridge < 0:
        raise ValueError("ridge must be nonnegative")
    if Xi.shape[0] != y.shape[0]:
        raise ValueError("row count of Xi must match y")
    if ridge == 0.0 and np.linalg.matrix_rank(Xi) < Xi.shape[1]:
        raise RankDeficientError(
            f"rank-deficient {Xi.shape[0]}x{Xi.shape[1]} system with no ridge; "
            "add ridge or more samples"
        )
    gram = Xi.T @ Xi + ridge * np.eye(Xi.shape[1])
    try:
        chol = np.linalg.cholesky(gram)
    except np.linalg.LinAlgError as e:
        raise RankDeficientError(
            f"normal equations singular for {Xi.shape[0]}x{Xi.shape[1]} system; "
            "add ridge or more samples"
        ) from e
    rhs = Xi.T @ y
    z = np.linalg.solve(chol, rhs)
    return np.linalg.solve(chol.T, z)


# ---------------------------------------------------------------------------
# standard normal


def std_normal(x: float) -> tuple[float, float]:
    """(pdf, cdf) of the standard normal at x; cdf via erfc for tail accuracy."""
    x = float(x)
    pdf = math.exp(-0.5 * x * x) / SQRT_2PI
    cdf = 0.5 * math.erfc(-x / math.sqrt(2.0))
    return pdf, cdf
