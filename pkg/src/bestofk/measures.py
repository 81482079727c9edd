"""Reward distributions over {0,1}^n and exact expected rewards.

Four measure families are supported:

* ``ProductMeasure`` -- n independent Bernoulli arms.
* ``PlantedMeasure`` -- one hidden k-subset made jointly dependent through a
  parity coupling while every proper sub-collection stays independent; the
  planted set beats every other k-subset by exactly ``p * mu**k``.
* ``CoverageMeasure`` -- arms are indicator sets over a finite universe; arm i
  fires when a uniform element lands in its set.
* ``JointTableMeasure`` -- an explicit joint table over {0,1}^k.

Arms are 0-based everywhere.  All randomness flows through explicit
``numpy.random.Generator`` instances; measures themselves are immutable and
safe to share across workers.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import DomainError

__all__ = [
    "ProductMeasure",
    "PlantedMeasure",
    "CoverageMeasure",
    "JointTableMeasure",
    "Measure",
    "make_planted",
    "planted_gap",
    "from_coverage",
    "sample",
    "sample_matrix",
    "expected_max",
    "marginal_means",
    "optimal_subset",
    "measure_to_dict",
    "measure_from_dict",
    "dumps",
    "loads",
]

# Sum of a loaded joint table may deviate from 1 by at most this much before
# the load is rejected; smaller deviations are renormalized and recorded.
TABLE_NORMALIZATION_TOL = 1e-9


@dataclass(frozen=True)
class ProductMeasure:
    """n independent Bernoulli arms with means ``means``."""

    means: tuple[float, ...]

    def __post_init__(self):
        if len(self.means) < 1:
            raise DomainError("need at least one arm")
        if any(not (0.0 <= m <= 1.0) for m in self.means):
            raise DomainError("every mean must lie in [0, 1]")
        object.__setattr__(self, "means", tuple(float(m) for m in self.means))

    @property
    def n(self) -> int:
        return len(self.means)


@dataclass(frozen=True)
class PlantedMeasure:
    """Parity-coupled hard instance hiding ``planted_set`` among independent arms.

    Latent variables: Y ~ Bernoulli(p), Z_i ~ Bernoulli(1/2), U_i ~ Bernoulli(2*mu).
    Every arm is Z_i * U_i except the first planted arm, whose Z is replaced by
    the complement of the parity of the other planted Zs whenever Y = 1.  All
    marginals equal mu; all strict sub-collections of the planted set are
    mutually independent.

    The dataclass itself tolerates p = 0 (the fully independent degenerate
    case, used by exact-table cross-checks); the public constructor
    ``make_planted`` requires p > 0.
    """

    n: int
    k: int
    mu: float
    p: float
    planted_set: tuple[int, ...]

    def __post_init__(self):
        if not (2 <= self.k <= self.n):
            raise DomainError(f"need 2 <= k <= n, got k={self.k}, n={self.n}")
        if not (0.0 < self.mu <= 0.5):
            raise DomainError(f"need 0 < mu <= 1/2, got mu={self.mu}")
        if not (0.0 <= self.p <= 1.0):
            raise DomainError(f"need 0 <= p <= 1, got p={self.p}")
        s = tuple(sorted(int(i) for i in self.planted_set))
        if len(s) != self.k or len(set(s)) != self.k:
            raise DomainError("planted_set must hold k distinct arms")
        if s[0] < 0 or s[-1] >= self.n:
            raise DomainError("planted_set arm out of range")
        object.__setattr__(self, "planted_set", s)
        object.__setattr__(self, "mu", float(self.mu))
        object.__setattr__(self, "p", float(self.p))


@dataclass(frozen=True)
class CoverageMeasure:
    """Arm i fires iff a uniform element of a size-m universe lies in ``sets[i]``."""

    m: int
    sets: tuple[frozenset[int], ...]

    def __post_init__(self):
        if self.m < 1:
            raise DomainError("universe size m must be >= 1")
        if len(self.sets) < 1:
            raise DomainError("need at least one arm")
        frozen = tuple(frozenset(int(e) for e in s) for s in self.sets)
        for i, s in enumerate(frozen):
            for e in s:
                if not (0 <= e < self.m):
                    raise DomainError(f"set {i} holds element {e} outside [0, {self.m})")
        object.__setattr__(self, "sets", frozen)

    @property
    def n(self) -> int:
        return len(self.sets)


@dataclass(frozen=True)
class JointTableMeasure:
    """Explicit joint table over {0,1}^k.

    ``probs[j]`` is the probability of the atom whose bit i equals
    ``(j >> i) & 1`` (arm i maps to bit i).  A loaded table whose mass deviates
    from 1 by at most ``TABLE_NORMALIZATION_TOL`` is renormalized; the applied
    correction is kept in ``normalization_correction``.
    """

    k: int
    probs: tuple[float, ...]
    normalization_correction: float = field(default=0.0, compare=False)

    def __post_init__(self):
        if self.k < 1:
            raise DomainError("dimension k must be >= 1")
        if len(self.probs) != 2**self.k:
            raise DomainError(f"need 2**k = {2**self.k} atoms, got {len(self.probs)}")
        probs = np.asarray(self.probs, dtype=float)
        if np.any(probs < -1e-12):
            raise DomainError("negative atom probability")
        probs = np.clip(probs, 0.0, None)
        total = float(probs.sum())
        if abs(total - 1.0) > TABLE_NORMALIZATION_TOL:
            raise DomainError(f"atom mass {total} deviates from 1 beyond {TABLE_NORMALIZATION_TOL}")
        object.__setattr__(self, "normalization_correction", total - 1.0)
        object.__setattr__(self, "probs", tuple(float(x) for x in probs / total))

    @property
    def n(self) -> int:
        return self.k


Measure = Union[ProductMeasure, PlantedMeasure, CoverageMeasure, JointTableMeasure]


def make_planted(n: int, k: int, mu: float, p: float,
                 planted_set: Sequence[int] | None = None) -> PlantedMeasure:
    """Build the planted dependent measure with gap ``p * mu**k``.

    Requires 2 <= k <= n, 0 < mu <= 1/2 (the coupling needs 2*mu <= 1) and
    0 < p <= 1.  ``planted_set`` defaults to arms 0..k-1 and may be any k
    distinct arms to relabel the hidden subset.
    """
    if not (0.0 < p <= 1.0):
        raise DomainError(f"need 0 < p <= 1, got p={p}")
    if planted_set is None:
        planted_set = tuple(range(k))
    return PlantedMeasure(n=n, k=k, mu=mu, p=p, planted_set=tuple(planted_set))


def planted_gap(mu: float, p: float, k: int) -> float:
    """Reward gap of the planted instance: ``p * mu**k``."""
    if k < 2:
        raise DomainError(f"need k >= 2, got k={k}")
    if not (0.0 < mu <= 0.5):
        raise DomainError(f"need 0 < mu <= 1/2, got mu={mu}")
    if not (0.0 < p <= 1.0):
        raise DomainError(f"need 0 < p <= 1, got p={p}")
    return p * mu**k


def from_coverage(m: int, sets: Sequence[Iterable[int]]) -> CoverageMeasure:
    """Coverage measure: arm i is the indicator of ``sets[i]`` under a uniform element."""
    return CoverageMeasure(m=m, sets=tuple(frozenset(s) for s in sets))


def sample_matrix(measure: Measure, rng: np.random.Generator, size: int) -> np.ndarray:
    """Draw ``size`` independent reward vectors; returns a (size, n) uint8 array.

    For ``PlantedMeasure`` the latent draws follow a fixed order (Y, the
    non-leading planted Zs, the leading Z, all Us, then the Zs of independent
    arms) so a given seed reproduces runs bit for bit.
    """
    if size < 0:
        raise DomainError("size must be >= 0")
    if isinstance(measure, ProductMeasure):
        means = np.asarray(measure.means)
        return (rng.random((size, measure.n)) < means).astype(np.uint8)
    if isinstance(measure, PlantedMeasure):
        return _sample_planted(measure, rng, size)
    if isinstance(measure, CoverageMeasure):
        omega = rng.integers(0, measure.m, size=size)
        members = np.zeros((measure.m, measure.n), dtype=np.uint8)
        for i, s in enumerate(measure.sets):
            if s:
                members[np.fromiter(s, dtype=np.int64), i] = 1
        return members[omega]
    if isinstance(measure, JointTableMeasure):
        atoms = rng.choice(2**measure.k, size=size, p=np.asarray(measure.probs))
        bit_positions = np.arange(measure.k)
        return ((atoms[:, None] >> bit_positions) & 1).astype(np.uint8)
    raise TypeError(f"unsupported measure type {type(measure).__name__}")


def _sample_planted(measure: PlantedMeasure, rng: np.random.Generator, size: int) -> np.ndarray:
    n, k, mu, p = measure.n, measure.k, measure.mu, measure.p
    planted = np.asarray(measure.planted_set)
    lead, rest = planted[0], planted[1:]

    y = rng.random(size) < p
    z_rest = rng.random((size, k - 1)) < 0.5
    z_lead = rng.random(size) < 0.5
    u = rng.random((size, n)) < 2.0 * mu
    others = np.asarray([i for i in range(n) if i not in set(measure.planted_set)])
    z_other = rng.random((size, n - k)) < 0.5

    parity = z_rest.sum(axis=1) % 2 == 1
    z = np.zeros((size, n), dtype=bool)
    z[:, rest] = z_rest
    z[:, lead] = np.where(y, ~parity, z_lead)  # Y=1 forces odd parity over the planted set
    if n > k:
        z[:, others] = z_other
    return (z & u).astype(np.uint8)


def sample(measure: Measure, rng: np.random.Generator) -> np.ndarray:
    """Draw one reward vector (length-n uint8 array)."""
    return sample_matrix(measure, rng, 1)[0]


def marginal_means(measure: Measure) -> tuple[float, ...]:
    """Exact marginal mean of every arm."""
    if isinstance(measure, ProductMeasure):
        return measure.means
    if isinstance(measure, PlantedMeasure):
        return (measure.mu,) * measure.n
    if isinstance(measure, CoverageMeasure):
        return tuple(len(s) / measure.m for s in measure.sets)
    if isinstance(measure, JointTableMeasure):
        probs = np.asarray(measure.probs)
        idx = np.arange(2**measure.k)
        return tuple(float(probs[(idx >> i) & 1 == 1].sum()) for i in range(measure.k))
    raise TypeError(f"unsupported measure type {type(measure).__name__}")


def expected_max(measure: Measure, arms: Iterable[int]) -> float:
    """Exact value of E[max over ``arms``] under the measure."""
    s = tuple(sorted(set(int(a) for a in arms)))
    if not s:
        raise DomainError("arms must be nonempty")
    if s[0] < 0 or s[-1] >= _n_of(measure):
        raise DomainError("arm index out of range")

    if isinstance(measure, ProductMeasure):
        return 1.0 - math.prod(1.0 - measure.means[i] for i in s)
    if isinstance(measure, PlantedMeasure):
        mu, k, p = measure.mu, measure.k, measure.p
        if set(measure.planted_set) <= set(s):
            # all-zero mass over the planted block is (1-mu)^k - p*mu^k
            all_zero = ((1.0 - mu) ** k - p * mu**k) * (1.0 - mu) ** (len(s) - k)
        else:
            all_zero = (1.0 - mu) ** len(s)
        return 1.0 - all_zero
    if isinstance(measure, CoverageMeasure):
        union: set[int] = set()
        for i in s:
            union |= measure.sets[i]
        return len(union) / measure.m
    if isinstance(measure, JointTableMeasure):
        probs = np.asarray(measure.probs)
        idx = np.arange(2**measure.k)
        mask = np.zeros(len(idx), dtype=bool)
        for i in s:
            mask |= (idx >> i) & 1 == 1
        return float(probs[mask].sum())
    raise TypeError(f"unsupported measure type {type(measure).__name__}")


def optimal_subset(measure: Measure, k: int, cap: int = 100_000) -> tuple[int, ...] | None:
    """The unique reward-maximizing k-subset, or None if unknown/non-unique.

    Product and planted instances use closed forms; other measures enumerate
    expected_max over C(n, k) subsets when that count stays within ``cap``.
    """
    n = _n_of(measure)
    if not (1 <= k <= n):
        raise DomainError(f"need 1 <= k <= n, got k={k}")
    if isinstance(measure, ProductMeasure):
        order = sorted(range(n), key=lambda i: (-measure.means[i], i))
        if k < n and measure.means[order[k - 1]] == measure.means[order[k]]:
            return None
        return tuple(sorted(order[:k]))
    if isinstance(measure, PlantedMeasure):
        if k == measure.k and measure.p > 0:
            return measure.planted_set
        # fall through to enumeration for mismatched k
    if math.comb(n, k) > cap:
        return None
    best, best_val, runner_up = None, -1.0, -1.0
    for s in combinations(range(n), k):
        v = expected_max(measure, s)
        if v > best_val:
            best, best_val, runner_up = s, v, best_val
        elif v > runner_up:
            runner_up = v
    if best_val - runner_up <= 1e-12:
        return None
    return best


def _n_of(measure: Measure) -> int:
    return measure.n


# ---------------------------------------------------------------------------
# Serialization: structured text documents, exact for binary rationals.
# ---------------------------------------------------------------------------

def measure_to_dict(measure: Measure) -> dict:
    if isinstance(measure, ProductMeasure):
        return {"type": "product", "n": measure.n, "means": list(measure.means)}
    if isinstance(measure, PlantedMeasure):
        return {
            "type": "planted",
            "n": measure.n,
            "k": measure.k,
            "mu": measure.mu,
            "p": measure.p,
            "planted_set": list(measure.planted_set),
        }
    if isinstance(measure, CoverageMeasure):
        return {
            "type": "coverage",
            "n": measure.n,
            "m": measure.m,
            "sets": [sorted(s) for s in measure.sets],
        }
    if isinstance(measure, JointTableMeasure):
        return {"type": "joint_table", "n": measure.n, "k": measure.k,
                "probs": list(measure.probs)}
    raise TypeError(f"unsupported measure type {type(measure).__name__}")


def measure_from_dict(doc: dict) -> Measure:
    kind = doc.get("type")
    if kind == "product":
        return ProductMeasure(means=tuple(doc["means"]))
    if kind == "planted":
        return PlantedMeasure(
            n=int(doc["n"]),
            k=int(doc["k"]),
            mu=float(doc["mu"]),
            p=float(doc["p"]),
            planted_set=tuple(doc.get("planted_set", range(int(doc["k"])))),
        )
    if kind == "coverage":
        return CoverageMeasure(m=int(doc["m"]), sets=tuple(frozenset(s) for s in doc["sets"]))
    if kind == "joint_table":
        return JointTableMeasure(k=int(doc["k"]), probs=tuple(doc["probs"]))
    raise DomainError(f"unknown measure type {kind!r}")


def dumps(measure: Measure) -> str:
    """Serialize to a JSON document; floats round-trip exactly."""
    return json.dumps(measure_to_dict(measure), sort_keys=True)


def loads(text: str) -> Measure:
    return measure_from_dict(json.loads(text))
