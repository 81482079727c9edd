"""The Best-of-K game loop: queries, the three feedback channels, accounting.

A query names a set of arms; nature draws a fresh reward vector per play and
the observation depends on the feedback model:

* ``bandit`` -- only the max bit over the queried arms,
* ``marked`` -- nothing if every queried arm is 0, otherwise one arm chosen
  uniformly among those that read 1,
* ``semi``   -- the bit of every queried arm.

Stateless apart from the per-run ledger; ledgers are single-writer.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import IO, Iterable

import numpy as np

from .errors import DomainError
from .measures import Measure, sample
from .theory import MODELS

__all__ = ["Observation", "QueryLedger", "ObservationTrace", "validate_query", "observe", "play"]


def validate_query(arms: Iterable[int], n: int, k: int | None = None,
                   exact_k: bool = False) -> tuple[int, ...]:
    """Check a query against the arm count and optional size bound; returns it sorted."""
    q = tuple(sorted(int(a) for a in arms))
    if not q:
        raise DomainError("query must be nonempty")
    if len(set(q)) != len(q):
        raise DomainError("query arms must be distinct")
    if q[0] < 0 or q[-1] >= n:
        raise DomainError("arm index out of range")
    if k is not None:
        if exact_k and len(q) != k:
            raise DomainError(f"exact-k mode requires |query| == {k}")
        if len(q) > k:
            raise DomainError(f"query size {len(q)} exceeds k={k}")
    return q


@dataclass(frozen=True)
class Observation:
    """One feedback event; carries the query it answers.

    Exactly one payload field is set per model: ``bit`` (bandit),
    ``marked`` (marked; None encodes the empty marking), ``bits`` (semi,
    aligned with the sorted query).
    """

    model: str
    query: tuple[int, ...]
    bit: int | None = None
    marked: int | None = None
    bits: tuple[int, ...] | None = None

    def payload(self):
        if self.model == "bandit":
            return self.bit
        if self.model == "marked":
            return self.marked
        return self.bits


@dataclass
class QueryLedger:
    """Query accounting: total plays, optionally per-subset counts."""

    total_queries: int = 0
    per_subset: dict[tuple[int, ...], int] | None = None

    @classmethod
    def with_subset_counts(cls) -> "QueryLedger":
        return cls(per_subset={})

    def record(self, query: tuple[int, ...], count: int = 1) -> None:
        self.total_queries += count
        if self.per_subset is not None:
            self.per_subset[query] = self.per_subset.get(query, 0) + count


class ObservationTrace:
    """Line-delimited observation records {t, query, model, payload} for replay."""

    def __init__(self, stream: IO[str]):
        self._stream = stream
        self._t = 0

    def write(self, obs: Observation) -> None:
        self._t += 1
        rec = {"t": self._t, "query": list(obs.query), "model": obs.model,
               "payload": obs.payload() if not isinstance(obs.payload(), tuple)
               else list(obs.payload())}
        self._stream.write(json.dumps(rec, sort_keys=True) + "\n")


def observe(x: np.ndarray, query: Iterable[int], model: str,
            rng: np.random.Generator) -> Observation:
    """Apply one feedback channel to a realized reward vector."""
    if model not in MODELS:
        raise DomainError(f"unknown model {model!r}")
    q = validate_query(query, n=len(x))
    vals = np.asarray([x[a] for a in q], dtype=np.uint8)
    if model == "bandit":
        return Observation(model=model, query=q, bit=int(vals.max()))
    if model == "semi":
        return Observation(model=model, query=q, bits=tuple(int(v) for v in vals))
    winners = [a for a, v in zip(q, vals) if v == 1]
    if not winners:
        return Observation(model=model, query=q, marked=None)
    return Observation(model=model, query=q, marked=int(winners[int(rng.random() * len(winners))]))


def play(env: Measure, query: Iterable[int], model: str, rng: np.random.Generator,
         ledger: QueryLedger, trace: ObservationTrace | None = None) -> Observation:
    """Draw a fresh reward vector, observe it, and charge one query to the ledger."""
    q = validate_query(query, n=env.n)
    x = sample(env, rng)
    obs = observe(x, q, model, rng)
    ledger.record(q)
    if trace is not None:
        trace.write(obs)
    return obs
