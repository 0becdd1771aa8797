"""Per-target agent inputs: ordinal result history, PCA-reduced bag-of-words name
embedding, and normalized recency/duration scalars."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .dataset import EffectiveVerdict

TOKEN_RULE = "split:/:_.-;lower"
_SPLIT = re.compile(r"[/:_.\-]+")


@dataclass
class TestHistory:
    """Executed runs of one target, oldest first. Skipped cycles never appear here."""

    __test__ = False  # not a pytest class

    target: str
    runs: list[tuple[int, EffectiveVerdict, float]] = field(default_factory=list)
    last_failure: int | None = None
    last_execution: int | None = None
    duration_total: float = 0.0

    def record(self, cycle_index: int, verdict: EffectiveVerdict, duration: float) -> None:
        if verdict is EffectiveVerdict.IGNORED:
            return
        self.runs.append((cycle_index, verdict, float(duration)))
        self.last_execution = cycle_index
        if verdict is EffectiveVerdict.FAIL:
            self.last_failure = cycle_index
        self.duration_total += float(duration)

    @property
    def verdicts(self) -> list[EffectiveVerdict]:
        return [v for _, v, _ in self.runs]

    @property
    def avg_duration(self) -> float | None:
        return self.duration_total / len(self.runs) if self.runs else None


def encode_history(history: TestHistory | Sequence[EffectiveVerdict], k: int = 25) -> np.ndarray:
    """Most recent verdict first; PASS=0, FAIL=1; short histories padded with 0."""
    verdicts = history.verdicts if isinstance(history, TestHistory) else list(history)
    out = np.zeros(k)
    for slot, v in enumerate(reversed(verdicts[-k:] if k else [])):
        out[slot] = 1.0 if v is EffectiveVerdict.FAIL else 0.0
    return out


def tokenize_name(target: str) -> list[str]:
    return [tok for tok in _SPLIT.split(target.lower()) if tok]


@dataclass(frozen=True)
class Vocabulary:
    index: dict[str, int]
    rule: str = TOKEN_RULE

    @classmethod
    def fit(cls, names: Iterable[str]) -> "Vocabulary":
        tokens = sorted({tok for name in names for tok in tokenize_name(name)})
        return cls({tok: i for i, tok in enumerate(tokens)})

    def __len__(self) -> int:
        return len(self.index)

    def to_dict(self) -> dict:
        return {"rule": self.rule, "tokens": sorted(self.index, key=self.index.__getitem__)}

    @classmethod
    def from_dict(cls, data: dict) -> "Vocabulary":
        return cls({tok: i for i, tok in enumerate(data["tokens"])}, data.get("rule", TOKEN_RULE))


def bow_vector(target: str, vocab: Vocabulary) -> np.ndarray:
    vec = np.zeros(len(vocab))
    for tok in tokenize_name(target):
        j = vocab.index.get(tok)
        if j is not None:
            vec[j] += 1.0
    return vec


@dataclass(frozen=True)
class PCAModel:
    mean: np.ndarray  # (V,)
    components: np.ndarray  # (d, V), orthonormal rows (zero rows for null directions)
    explained_variance: np.ndarray  # (d,), non-increasing

    @property
    def dim(self) -> int:
        return self.components.shape[0]

    def to_dict(self) -> dict:
        return {
            "mean": self.mean.tolist(),
            "components": self.components.tolist(),
            "explained_variance": self.explained_variance.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PCAModel":
        mean = np.asarray(data["mean"], dtype=float)
        comps = np.asarray(data["components"], dtype=float).reshape(-1, mean.size)
        return cls(mean, comps, np.asarray(data["explained_variance"], dtype=float))


def fit_pca(rows: np.ndarray, d: int) -> PCAModel:
    """Eigendecomposition of the sample covariance; keeps the top ``d`` directions.

    Each component's first non-negligible entry is made positive. Directions
    carrying no variance come back as zero rows with zero explained variance.
    """
    rows = np.asarray(rows, dtype=float)
    if rows.ndim != 2:
        raise ValueError("rows must be a 2-d matrix")
    n, v = rows.shape
    if n < 2:
        raise ValueError("PCA needs at least two rows")
    if not 0 <= d <= min(n - 1, v):
        raise ValueError(f"component count {d} outside [0, {min(n - 1, v)}]")
    mean = rows.mean(axis=0)
    centered = rows - mean
    cov = centered.T @ centered / (n - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1][:d]
    eigvals = np.clip(eigvals[order], 0.0, None)
    comps = eigvecs[:, order].T.copy()
    scale = max(float(np.trace(cov)), 1.0)
    for i in range(d):
        if eigvals[i] <= 1e-12 * scale:
            comps[i] = 0.0
            eigvals[i] = 0.0
            continue
        nz = np.flatnonzero(np.abs(comps[i]) > 1e-12)
        if comps[i, nz[0]] < 0:
            comps[i] = -comps[i]
    return PCAModel(mean, comps, eigvals)


def project_pca(model: PCAModel, v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape != model.mean.shape:
        raise ValueError(f"vector length {v.size} does not match PCA input {model.mean.size}")
    return model.components @ (v - model.mean)


@dataclass
class FeatureVector:
    result_history: np.ndarray
    name_embedding: np.ndarray
    last_failure: float
    last_execution: float
    avg_duration: float

    def to_array(self) -> np.ndarray:
        return np.concatenate([
            self.result_history,
            self.name_embedding,
            [self.last_failure, self.last_execution, self.avg_duration],
        ])


def _recency(now: int, then: int | None, horizon: float) -> float:
    if then is None:
        return 1.0
    return min(1.0, max(0.0, (now - then) / horizon))


def assemble_features(
    history: TestHistory,
    name_embedding: np.ndarray,
    now: int,
    k: int = 25,
    *,
    horizon: float = 100.0,
    duration_scale: float | None = None,
    cold_duration: float = 1.0,
) -> FeatureVector:
    """``duration_scale`` is the suite's 95th-percentile average duration."""
    avg = history.avg_duration
    if avg is None:
        avg_feature = cold_duration
    elif not duration_scale or duration_scale <= 0:
        avg_feature = 0.0
    else:
        avg_feature = min(2.0, max(0.0, avg / duration_scale))
    return FeatureVector(
        result_history=encode_history(history, k),
        name_embedding=np.asarray(name_embedding, dtype=float),
        last_failure=_recency(now, history.last_failure, horizon),
        last_execution=_recency(now, history.last_execution, horizon),
        avg_duration=avg_feature,
    )


class FeaturePipeline:
    """Frozen vocabulary + PCA, fitted once on warm-start target names."""

    def __init__(self, vocab: Vocabulary, pca: PCAModel | None, k: int = 25, horizon: float = 100.0):
        self.vocab = vocab
        self.pca = pca
        self.k = k
        self.horizon = horizon
        self._embeddings: dict[str, np.ndarray] = {}

    @classmethod
    def fit(cls, names: Sequence[str], k: int = 25, pca_dim: int = 16, horizon: float = 100.0) -> "FeaturePipeline":
        names = list(dict.fromkeys(names))
        vocab = Vocabulary.fit(names)
        d = min(pca_dim, len(names) - 1, len(vocab))
        pca = fit_pca(np.array([bow_vector(n, vocab) for n in names]), d) if d > 0 else None
        return cls(vocab, pca, k, horizon)

    @property
    def embedding_dim(self) -> int:
        return self.pca.dim if self.pca is not None else 0

    @property
    def dim(self) -> int:
        return self.k + self.embedding_dim + 3

    def embed(self, name: str) -> np.ndarray:
        vec = self._embeddings.get(name)
        if vec is None:
            vec = project_pca(self.pca, bow_vector(name, self.vocab)) if self.pca is not None else np.zeros(0)
            self._embeddings[name] = vec
        return vec

    def build(self, history: TestHistory, now: int, duration_scale: float | None) -> np.ndarray:
        fv = assemble_features(history, self.embed(history.target), now, self.k,
                               horizon=self.horizon, duration_scale=duration_scale)
        return fv.to_array()

    def to_dict(self) -> dict:
        return {"k": self.k, "horizon": self.horizon, "vocabulary": self.vocab.to_dict(),
                "pca": self.pca.to_dict() if self.pca is not None else None}

    @classmethod
    def from_dict(cls, data: dict) -> "FeaturePipeline":
        pca = PCAModel.from_dict(data["pca"]) if data.get("pca") else None
        return cls(Vocabulary.from_dict(data["vocabulary"]), pca, data["k"], data["horizon"])


def duration_percentile(histories: Iterable[TestHistory], q: float = 95.0) -> float | None:
    avgs = [h.avg_duration for h in histories if h.runs]
    return float(np.percentile(avgs, q)) if avgs else None
