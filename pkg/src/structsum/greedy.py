"""Budget-constrained greedy selection with cost-scaled gains.

Each round picks the candidate maximizing gain / cost**r over the remaining
pool, adds it only when it fits the byte budget and its gain is
non-negative, and removes it from the pool either way. For monotone
submodular objectives with unit costs and r = 1 this is the classic
(1 - 1/e)-approximate greedy; r < 1 softens the cost scaling.

Note the acceptance-or-not decision does not stop the scan: a rejected
candidate simply leaves the pool, so later, cheaper candidates still get
their turn. Zero-gain candidates that fit the budget are accepted.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Sequence

from .corpus import DocumentSet
from .scoring import (
    CoverageScorer,
    PairwiseScorer,
    SplitPairwiseScorer,
    Summary,
    score as _score_dispatch,
)


@dataclass(frozen=True)
class GreedyConfig:
    budget_bytes: int
    r: float = 0.3
    tie_break: str = "lowest-id"

    def __post_init__(self):
        if self.budget_bytes < 0:
            raise ValueError("budget_bytes must be >= 0")
        if not (0.0 < self.r <= 1.0):
            raise ValueError("r must be in (0, 1]")
        if self.tie_break != "lowest-id":
            raise ValueError("only lowest-id tie breaking is supported")

    def to_dict(self) -> dict:
        return {"budget_bytes": self.budget_bytes, "r": self.r, "tie_break": self.tie_break}

    @classmethod
    def from_dict(cls, d: dict) -> "GreedyConfig":
        return cls(
            budget_bytes=int(d["budget_bytes"]),
            r=float(d["r"]),
            tie_break=d.get("tie_break", "lowest-id"),
        )


def _cost_fn(x: DocumentSet, cost) -> Callable[[int], int]:
    if cost is None:
        return lambda sid: x.sentences[sid].cost
    if callable(cost):
        return cost
    if isinstance(cost, Sequence):
        table = list(cost)
        return lambda sid: table[sid]
    raise TypeError(f"cost must be a callable or sequence, not {type(cost).__name__}")


def greedy_maximize(
    x: DocumentSet,
    gain: Callable,
    cost=None,
    cfg: GreedyConfig | None = None,
) -> Summary:
    """Run the budgeted greedy loop.

    ``gain`` is called as gain(current_summary, candidate_id) and may carry
    state; when it exposes a ``commit(candidate_id)`` method, the method is
    invoked exactly once per accepted candidate, in acceptance order.
    ``cost`` maps a sentence id to a positive cost (a callable or a
    sequence) and defaults to the byte costs of ``x``.
    """
    if cfg is None:
        raise ValueError("greedy_maximize requires a GreedyConfig")
    cost = _cost_fn(x, cost)
    pool = list(range(x.num_sentences))
    selected: list[int] = []
    total = 0
    while pool:
        current = Summary(tuple(selected), total)
        best_id = -1
        best_ratio = 0.0
        best_gain = 0.0
        for sid in pool:
            g = gain(current, sid)
            c = cost(sid)
            if c <= 0:
                raise ValueError(f"sentence {sid} has non-positive cost {c}")
            ratio = g / c ** cfg.r
            if best_id < 0 or ratio > best_ratio:
                best_id, best_ratio, best_gain = sid, ratio, g
        if total + cost(best_id) <= cfg.budget_bytes and best_gain >= 0.0:
            selected.append(best_id)
            total += cost(best_id)
            if hasattr(gain, "commit"):
                gain.commit(best_id)
        pool.remove(best_id)
    return Summary(tuple(selected), total)


_MAX_EXHAUSTIVE = 20


def exhaustive_maximize(
    x: DocumentSet,
    scorer,
    cfg: GreedyConfig,
    cost=None,
) -> Summary:
    """Score every budget-feasible subset and return the best.

    ``scorer`` may be a scorer object or a callable mapping a Summary to a
    float. Guarded to small instances; intended as a test-time oracle.
    Ties keep the first subset in (size, lexicographic) order, so the empty
    summary wins when everything scores zero.
    """
    n = x.num_sentences
    if n > _MAX_EXHAUSTIVE:
        raise ValueError(f"exhaustive search refused for n={n} > {_MAX_EXHAUSTIVE}")
    cost = _cost_fn(x, cost)
    best = Summary.empty()
    best_score = _score_one(x, best, scorer)
    for size in range(1, n + 1):
        for combo in itertools.combinations(range(n), size):
            c = sum(cost(sid) for sid in combo)
            if c > cfg.budget_bytes:
                continue
            y = Summary(combo, c)
            s = _score_one(x, y, scorer)
            if s > best_score:
                best, best_score = y, s
    return best


def _score_one(x: DocumentSet, y: Summary, scorer) -> float:
    if isinstance(scorer, (PairwiseScorer, SplitPairwiseScorer, CoverageScorer)):
        return _score_dispatch(x, y, scorer)
    if callable(scorer):
        return float(scorer(y))
    raise TypeError(f"cannot score with {type(scorer).__name__}")
