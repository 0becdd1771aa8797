"""Pointwise deep Q-learning agent: a small fully connected network scores each
target independently, trained on uniformly replayed experiences with Adam."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .seeding import rng_for

CHECKPOINT_VERSION = 1


class TrainingError(RuntimeError):
    """Training produced a non-finite loss."""


@dataclass
class AgentConfig:
    hidden: tuple[int, ...] = (64, 32, 16)
    dropout: float = 0.1
    l2: float = 1e-4
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 64
    buffer_capacity: int = 4096
    sigma: float = 0.15
    sigma_decay: float = 0.999
    sigma_min: float = 0.01

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")
        if self.buffer_capacity < 1 or self.batch_size < 1:
            raise ValueError("buffer_capacity and batch_size must be positive")
        if not 0.0 <= self.sigma_min <= self.sigma:
            raise ValueError("need 0 <= sigma_min <= sigma")


# ---------------------------------------------------------------------------
# network


@dataclass
class NetworkParams:
    weights: list[np.ndarray]  # weights[l] has shape (fan_in, fan_out)
    biases: list[np.ndarray]
    dropout: float = 0.0
    l2: float = 0.0

    def __post_init__(self):
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ValueError("need matching, non-empty weight and bias lists")
        for w, b in zip(self.weights, self.biases):
            if w.ndim != 2 or b.shape != (w.shape[1],):
                raise ValueError("bias length must equal layer fan_out")
        for prev, nxt in zip(self.weights, self.weights[1:]):
            if prev.shape[1] != nxt.shape[0]:
                raise ValueError("layer dimensions do not chain")
        if self.weights[-1].shape[1] != 1:
            raise ValueError("output layer must produce a single score")

    @classmethod
    def init(cls, sizes: Sequence[int], rng: np.random.Generator, dropout: float = 0.0, l2: float = 0.0):
        """Glorot-uniform weights, zero biases. ``sizes`` runs input -> ... -> 1."""
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            limit = math.sqrt(6.0 / (fan_in + fan_out))
            weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        return cls(weights, biases, dropout, l2)

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[0]

    def arrays(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def n_params(self) -> int:
        return sum(a.size for a in self.arrays())

    def copy(self) -> "NetworkParams":
        return NetworkParams([w.copy() for w in self.weights], [b.copy() for b in self.biases],
                             self.dropout, self.l2)


def _dropout_masks(params: NetworkParams, batch: int, rng: np.random.Generator) -> list[np.ndarray]:
    keep = 1.0 - params.dropout
    return [(rng.random((batch, w.shape[1])) < keep) / keep for w in params.weights[:-1]]


def _forward(params: NetworkParams, X: np.ndarray, masks):
    acts = [X]
    pre = []
    a = X
    for layer, (w, b) in enumerate(zip(params.weights[:-1], params.biases[:-1])):
        z = a @ w + b
        a = np.maximum(z, 0.0)
        if masks is not None:
            a = a * masks[layer]
        pre.append(z)
        acts.append(a)
    out = (a @ params.weights[-1] + params.biases[-1])[:, 0]
    return out, acts, pre


def forward_batch(params: NetworkParams, X: np.ndarray, training: bool = False,
                  rng: np.random.Generator | None = None) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != params.input_dim:
        raise ValueError(f"input has {X.shape[1]} features, network expects {params.input_dim}")
    masks = None
    if training and params.dropout > 0:
        if rng is None:
            raise ValueError("training-mode dropout needs an rng")
        masks = _dropout_masks(params, X.shape[0], rng)
    return _forward(params, X, masks)[0]


def forward(params: NetworkParams, x: np.ndarray, training: bool = False,
            rng: np.random.Generator | None = None) -> float:
    return float(forward_batch(params, np.asarray(x, dtype=float)[None, :], training, rng)[0])


def loss_and_grads(params: NetworkParams, X: np.ndarray, y: np.ndarray, masks=None):
    """Mean squared error plus ``l2 * sum(W**2)``; gradients ordered like ``params.arrays()``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    out, acts, pre = _forward(params, X, masks)
    resid = out - y
    l2_term = params.l2 * sum(float(np.sum(w * w)) for w in params.weights)
    loss = float(np.mean(resid**2)) + l2_term

    n_layers = len(params.weights)
    grads: list[np.ndarray] = [None] * (2 * n_layers)  # type: ignore[list-item]
    delta = (2.0 / X.shape[0]) * resid[:, None]
    for layer in reversed(range(n_layers)):
        w = params.weights[layer]
        grads[2 * layer] = acts[layer].T @ delta + 2.0 * params.l2 * w
        grads[2 * layer + 1] = delta.sum(axis=0)
        if layer == 0:
            break
        delta = delta @ w.T
        if masks is not None:
            delta = delta * masks[layer - 1]
        delta = delta * (pre[layer - 1] > 0)
    return loss, grads


# ---------------------------------------------------------------------------
# optimizer, replay, exploration


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    step: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, arrays: Sequence[np.ndarray], **hyper) -> "AdamState":
        return cls([np.zeros_like(a) for a in arrays], [np.zeros_like(a) for a in arrays], **hyper)

    def apply(self, arrays: Sequence[np.ndarray], grads: Sequence[np.ndarray]) -> None:
        """One bias-corrected Adam update, in place."""
        self.step += 1
        c1 = 1.0 - self.beta1**self.step
        c2 = 1.0 - self.beta2**self.step
        for p, g, m, v in zip(arrays, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


@dataclass
class Experience:
    state: np.ndarray
    action_score: float
    reward: float
    next_state: np.ndarray | None = None


@dataclass
class ReplayBuffer:
    capacity: int = 4096
    items: deque = field(default_factory=deque)
    insertions: int = 0

    def __post_init__(self):
        self.items = deque(self.items, maxlen=self.capacity)

    def __len__(self) -> int:
        return len(self.items)

    @property
    def is_full(self) -> bool:
        return len(self.items) == self.capacity


def push_experience(buffer: ReplayBuffer, e: Experience) -> ReplayBuffer:
    if not math.isfinite(e.reward):
        raise ValueError("experience reward must be finite")
    buffer.items.append(e)
    buffer.insertions += 1
    return buffer


def sample_batch(buffer: ReplayBuffer, batch_size: int, rng: np.random.Generator) -> list[Experience]:
    """Uniform draws with replacement."""
    if not len(buffer):
        raise ValueError("cannot sample from an empty replay buffer")
    idx = rng.integers(0, len(buffer), size=batch_size)
    return [buffer.items[i] for i in idx]


@dataclass
class ExplorationPolicy:
    sigma: float = 0.15
    decay: float = 0.999
    sigma_min: float = 0.01

    def step(self) -> None:
        self.sigma = max(self.sigma_min, self.sigma * self.decay)


# ---------------------------------------------------------------------------
# agent


class DQNAgent:
    """Single-owner agent; scoring and training must be serialized by the caller."""

    def __init__(self, input_dim: int, config: AgentConfig | None = None, seed: int = 0):
        self.config = config or AgentConfig()
        cfg = self.config
        self.seed = seed
        self.params = NetworkParams.init([input_dim, *cfg.hidden, 1], rng_for(seed, "init"), cfg.dropout, cfg.l2)
        self.adam = AdamState.zeros_like(self.params.arrays(), lr=cfg.lr, beta1=cfg.beta1,
                                         beta2=cfg.beta2, eps=cfg.eps)
        self.buffer = ReplayBuffer(cfg.buffer_capacity)
        self.exploration = ExplorationPolicy(cfg.sigma, cfg.sigma_decay, cfg.sigma_min)
        self.dropout_rng = rng_for(seed, "dropout")
        self.sample_rng = rng_for(seed, "replay")
        self.noise_rng = rng_for(seed, "exploration")
        self.train_steps = 0

    @property
    def input_dim(self) -> int:
        return self.params.input_dim

    def score_suite(self, features: np.ndarray, explore: bool = False,
                    rng: np.random.Generator | None = None) -> np.ndarray:
        return score_suite(self, features, explore, rng)

    def push(self, e: Experience) -> None:
        if e.state.shape != (self.input_dim,):
            raise ValueError("experience state does not match network input")
        push_experience(self.buffer, e)

    def train_step(self, batch: Sequence[Experience]) -> float:
        return train_step(self, batch)

    def train_from_buffer(self, steps: int) -> list[float]:
        losses = []
        for _ in range(steps):
            losses.append(self.train_step(sample_batch(self.buffer, self.config.batch_size, self.sample_rng)))
        return losses

    def to_checkpoint(self) -> dict:
        return {
            "version": CHECKPOINT_VERSION,
            "config": asdict(self.config),
            "seed": self.seed,
            "params": {"weights": [w.tolist() for w in self.params.weights],
                       "biases": [b.tolist() for b in self.params.biases]},
            "adam": {"step": self.adam.step, "m": [a.tolist() for a in self.adam.m],
                     "v": [a.tolist() for a in self.adam.v]},
            "exploration_sigma": self.exploration.sigma,
            "train_steps": self.train_steps,
            "buffer": {"size": len(self.buffer), "insertions": self.buffer.insertions,
                       "capacity": self.buffer.capacity},
        }

    @classmethod
    def from_checkpoint(cls, data: dict) -> "DQNAgent":
        if data.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {data.get('version')!r}")
        cfg = AgentConfig(**data["config"])
        weights = [np.asarray(w, dtype=float) for w in data["params"]["weights"]]
        agent = cls(weights[0].shape[0], cfg, data.get("seed", 0))
        agent.params = NetworkParams(weights, [np.asarray(b, dtype=float) for b in data["params"]["biases"]],
                                     cfg.dropout, cfg.l2)
        shapes = [a.shape for a in agent.params.arrays()]
        agent.adam.m = [np.asarray(a, dtype=float).reshape(s) for a, s in zip(data["adam"]["m"], shapes)]
        agent.adam.v = [np.asarray(a, dtype=float).reshape(s) for a, s in zip(data["adam"]["v"], shapes)]
        agent.adam.step = data["adam"]["step"]
        agent.exploration.sigma = data["exploration_sigma"]
        agent.train_steps = data.get("train_steps", 0)
        return agent


def score_suite(agent: DQNAgent, features: np.ndarray, explore: bool = False,
                rng: np.random.Generator | None = None) -> np.ndarray:
    """Noiseless Q-values, plus one independent N(0, sigma^2) draw per target when exploring."""
    scores = forward_batch(agent.params, features, training=False)
    if explore and agent.exploration.sigma > 0:
        rng = rng if rng is not None else agent.noise_rng
        scores = scores + rng.normal(0.0, agent.exploration.sigma, size=scores.shape)
    return scores


def train_step(agent: DQNAgent, batch: Sequence[Experience]) -> float:
    """One Adam step on MSE(Q(state), reward) + L2; returns the pre-update loss.

    The regression target is the immediate reward (no bootstrapping from next_state).
    """
    if not batch:
        raise ValueError("empty training batch")
    X = np.stack([e.state for e in batch])
    y = np.array([e.reward for e in batch], dtype=float)
    params = agent.params
    masks = _dropout_masks(params, X.shape[0], agent.dropout_rng) if params.dropout > 0 else None
    loss, grads = loss_and_grads(params, X, y, masks)
    if not math.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads):
        raise TrainingError(f"non-finite loss {loss!r} at step {agent.train_steps}")
    agent.adam.apply(params.arrays(), grads)
    agent.train_steps += 1
    return loss
