"""Cost-sensitive multiclass classification by per-action cost regression.

All actions share one weight vector; what distinguishes them is that each
action's feature vector is conjoined with its label.  Training regresses
each action's score onto its cost, prediction takes the cheapest action.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from .binio import FormatError
from .features import DEFAULT_HASH_BITS, SparseVector


@dataclass
class CostSensitiveExample:
    actions: List[Tuple[SparseVector, float]]

    def __post_init__(self):
        if not self.actions:
            raise ValueError("cost-sensitive example with no actions")
        for _, c in self.actions:
            if not np.isfinite(c) or c < 0:
                raise ValueError(f"costs must be finite and non-negative, got {c}")


class LinearScorer:
    """Dense hashed weight vector trained by normalised squared-loss SGD.

    The step for an action with features x is
    ``eta_t * (cost - w.x) * x / |x|^2`` with ``eta_t = eta0 / (1 + decay * t)``;
    dividing by the squared feature norm keeps the update stable regardless
    of how many features fire.
    """

    def __init__(self, bits: int = DEFAULT_HASH_BITS, eta0: float = 0.5, decay: float = 1e-6,
                 weights=None, updates: int = 0):
        self.bits = bits
        self.eta0 = eta0
        self.decay = decay
        self.weights = np.zeros(1 << bits, dtype=np.float32) if weights is None else weights
        self.updates = updates

    def score(self, x: SparseVector) -> float:
        if not len(x):
            return 0.0
        return float(np.dot(self.weights[x.indices], x.values))

    def scores(self, xs: Sequence[SparseVector]) -> np.ndarray:
        return np.array([self.score(x) for x in xs], dtype=np.float64)

    def learning_rate(self) -> float:
        return self.eta0 / (1.0 + self.decay * self.updates)

    def update(self, x: SparseVector, target: float):
        if x.bits != self.bits:
            raise ValueError(f"feature vector has {x.bits} hash bits, scorer has {self.bits}")
        if len(x):
            norm = float(np.dot(x.values, x.values))
            err = target - self.score(x)
            step = np.float32(self.learning_rate() * err / norm)
            self.weights[x.indices] += step * x.values
        self.updates += 1

    @classmethod
    def average(cls, scorers: Sequence["LinearScorer"], coefficients: Sequence[float]) -> "LinearScorer":
        """Weighted average of several scorers (coefficients renormalised)."""
        total = float(sum(coefficients))
        if not scorers or total <= 0:
            raise ValueError("need at least one scorer with positive weight")
        w = np.zeros_like(scorers[0].weights, dtype=np.float64)
        for s, c in zip(scorers, coefficients):
            w += (c / total) * s.weights
        first = scorers[0]
        return cls(first.bits, first.eta0, first.decay, w.astype(np.float32),
                   sum(s.updates for s in scorers))

    # -- serialisation: header (hash bits, weight count, update count) + raw float32 LE

    def to_bytes(self) -> bytes:
        head = struct.pack("<IQQ", self.bits, len(self.weights), self.updates)
        return head + self.weights.astype("<f4").tobytes()

    @classmethod
    def from_bytes(cls, data: bytes, eta0: float = 0.5, decay: float = 1e-6) -> "LinearScorer":
        if len(data) < 20:
            raise FormatError("truncated weight block")
        bits, count, updates = struct.unpack("<IQQ", data[:20])
        if bits > 32 or count != 1 << bits:
            raise FormatError(f"weight block header inconsistent (bits={bits}, count={count})")
        body = data[20:]
        if len(body) != 4 * count:
            raise FormatError(f"weight block holds {len(body)} bytes, expected {4 * count}")
        weights = np.frombuffer(body, dtype="<f4").astype(np.float32)
        return cls(bits, eta0, decay, weights, updates)


def train_csc(scorer: LinearScorer, example: CostSensitiveExample) -> LinearScorer:
    """One regression update per action toward that action's cost."""
    for x, cost in example.actions:
        scorer.update(x, cost)
    return scorer


def predict_csc(scorer: LinearScorer, actions: Sequence[SparseVector]) -> int:
    """Index of the lowest predicted cost; ties go to the earliest action."""
    if not actions:
        raise ValueError("no actions to choose from")
    return int(np.argmin(scorer.scores(actions)))
