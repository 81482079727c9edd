"""Stagewise elimination with variance-adaptive confidence intervals.

One stage: pick the per-query sample size k1 = min(|U|, k), optionally move a
few rejected arms back into the sampling pool (bandit balancing), run 2^t
independent uniform-play passes accumulating per-arm win counts, then accept
arms whose lower confidence bound clears the (k_t+1)-th largest upper bound
and reject arms whose upper bound falls under the k_t-th largest lower bound.
Fresh samples every stage; the budget doubles until k arms are accepted.

``uniform_play``/``play_and_record`` are the single-call reference
implementations; ``stage_play`` is the batched engine behind
``run_identification`` that feeds pre-drawn randomness to the recording
kernels (numba or numpy backend, identical output).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DomainError, IdentifiabilityError, InfeasibleError
from .game import ObservationTrace, QueryLedger, play
from .kernels import queries_per_play, record_plays
from .measures import Measure, marginal_means, sample_matrix
from .theory import MODELS
from .trial import StageRecord, TrialRecord

__all__ = [
    "Interval",
    "SamplingSets",
    "ElimState",
    "ElimConfig",
    "confidence_radius",
    "true_variance_radius",
    "inversion_sample_size",
    "play_and_record",
    "uniform_play",
    "stage_play",
    "balance",
    "balance_set_size",
    "elimination_step",
    "run_identification",
]


# ---------------------------------------------------------------------------
# Empirical Bernstein intervals.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Interval:
    """Empirical mean with its variance-adaptive confidence radius.

    The radius is kept unclipped for comparisons; ``c_clipped`` is the
    [0, 1]-clipped value used for logging only (means live in [0, 1], so
    clipping can never flip an accept/reject decision).
    """

    mu_hat: float
    c_hat: float
    v_hat: float

    @property
    def c_clipped(self) -> float:
        return min(max(self.c_hat, 0.0), 1.0)


def confidence_radius(mu_hat: float, T: int, n: int, t: int, delta: float) -> Interval:
    """Sample-variance Bernstein radius at stage t with T = 2^t samples.

    v_hat = T mu(1-mu)/(T-1);
    c_hat = sqrt(2 v_hat log(8 n t^2/delta) / T) + 8 log(8 n t^2/delta) / (3(T-1)).
    """
    if T < 2:
        raise DomainError("need T >= 2 (sample variance divides by T-1)")
    if not (0.0 <= mu_hat <= 1.0):
        raise DomainError("mu_hat must lie in [0, 1]")
    if not (0.0 < delta < 1.0):
        raise DomainError("delta must lie in (0, 1)")
    if n < 1 or t < 1:
        raise DomainError("need n >= 1 and t >= 1")
    log_term = math.log(8.0 * n * t * t / delta)
    v_hat = T * mu_hat * (1.0 - mu_hat) / (T - 1)
    c_hat = math.sqrt(2.0 * v_hat * log_term / T) + 8.0 * log_term / (3.0 * (T - 1))
    return Interval(mu_hat=mu_hat, c_hat=c_hat, v_hat=v_hat)


def true_variance_radius(V: float, T: float, n: int, delta: float,
                         t: float | None = None) -> float:
    """Oracle-variance radius sqrt(2 V L / T) + 14 L / (3(T-1)), L = log(8 n t^2/delta).

    ``t`` defaults to log2(T), matching the doubling schedule.
    """
    if T <= 1:
        raise DomainError("need T > 1")
    if t is None:
        t = math.log2(T)
    log_term = math.log(8.0 * n * t * t / delta)
    return math.sqrt(2.0 * V * log_term / T) + 14.0 * log_term / (3.0 * (T - 1))


def inversion_sample_size(V: float, gap: float, n: int, delta: float) -> float:
    """Samples guaranteeing the oracle-variance radius drops below ``gap``:

    (16 V/gap^2 + 14/gap) * log((24 n/delta) log((12 n/delta)(16 V/gap^2 + 14/gap))).
    """
    if gap <= 0.0:
        raise DomainError("gap must be positive")
    if V < 0.0:
        raise DomainError("variance must be nonnegative")
    alpha = 16.0 * V / gap**2 + 14.0 / gap
    inner = (12.0 * n / delta) * alpha
    if inner <= 1.0:
        raise DomainError("inversion undefined: inner log argument <= 1")
    return alpha * math.log((24.0 * n / delta) * math.log(inner))


# ---------------------------------------------------------------------------
# Reference sampling path (single calls).
# ---------------------------------------------------------------------------

def play_and_record(
    q_record: Sequence[int],
    q_extra: Sequence[int],
    y: np.ndarray,
    model: str,
    env: Measure,
    rng: np.random.Generator,
    ledger: QueryLedger,
    trace: ObservationTrace | None = None,
) -> np.ndarray:
    """Play q_record + q_extra once; only q_record entries may be credited.

    semi/marked credit each recorded arm observed at 1; bandit credits every
    recorded arm when the query wins.
    """
    rec = tuple(int(a) for a in q_record)
    extra = tuple(int(a) for a in q_extra)
    if set(rec) & set(extra):
        raise DomainError("record and extra sets must be disjoint")
    obs = play(env, rec + extra, model, rng, ledger, trace=trace)
    if model == "bandit":
        if obs.bit == 1:
            for a in rec:
                y[a] += 1
    elif model == "semi":
        rec_set = set(rec)
        for a, b in zip(obs.query, obs.bits):
            if b == 1 and a in rec_set:
                y[a] += 1
    else:
        if obs.marked is not None and obs.marked in set(rec):
            y[obs.marked] += 1
    return y


def _draw_topoff(reject_pool: Sequence[int], accept_pool: Sequence[int], k2: int,
                 rng: np.random.Generator) -> tuple[int, ...]:
    """Top-off set: as many reject arms as possible, accepted arms fill in."""
    if k2 == 0:
        return ()
    reject_pool = list(reject_pool)
    accept_pool = list(accept_pool)
    if len(reject_pool) >= k2:
        return tuple(rng.permutation(np.asarray(reject_pool, dtype=np.int64))[:k2])
    need = k2 - len(reject_pool)
    if len(accept_pool) < need:
        raise InfeasibleError("cannot build a top-off set: pools too small")
    fill = tuple(rng.permutation(np.asarray(accept_pool, dtype=np.int64))[:need])
    return tuple(reject_pool) + fill


def uniform_play(
    u_prime: Sequence[int],
    accept: Sequence[int],
    r_prime: Sequence[int],
    k1: int,
    env: Measure,
    model: str,
    rng: np.random.Generator,
    ledger: QueryLedger,
    exact_k: bool = False,
    k: int | None = None,
    trace: ObservationTrace | None = None,
) -> tuple[np.ndarray, int]:
    """One uniform pass over ``u_prime``: ceil(|U'|/k1) queries, each arm
    recorded at most once.

    The pool is randomly cut into floor(|U'|/k1) blocks of size k1; leftovers
    are played once more, padded back to k1 by arms outside the remainder, but
    only the leftovers are recorded.  In exact-k mode with k1 < k a top-off
    set of k - k1 arms (rejects first, accepted arms as fill-in) joins every
    query unrecorded.
    """
    pool = [int(a) for a in u_prime]
    m = len(pool)
    if m < 1:
        raise DomainError("u_prime must be nonempty")
    if not (1 <= k1 <= m):
        raise DomainError("need 1 <= k1 <= |u_prime|")
    k2 = 0
    if exact_k and k is not None and k1 < k:
        k2 = k - k1
    s_plus = _draw_topoff(r_prime, accept, k2, rng)

    perm = [int(a) for a in rng.permutation(np.asarray(pool, dtype=np.int64))]
    y = np.zeros(env.n, dtype=np.int64)
    p = m // k1
    r = m - p * k1
    for b in range(p):
        block = tuple(perm[b * k1 : (b + 1) * k1])
        play_and_record(block, s_plus, y, model, env, rng, ledger, trace=trace)
    if r > 0:
        remainder = tuple(perm[p * k1 :])
        padding = tuple(perm[: k1 - r])  # uniform (k1-r)-subset of U' minus the remainder
        play_and_record(remainder, padding + s_plus, y, model, env, rng, ledger, trace=trace)
    return y, queries_per_play(m, k1)


# ---------------------------------------------------------------------------
# Batched stage engine (hot path).
# ---------------------------------------------------------------------------

CHUNK_PLAYS = 4096  # fixed so the rng stream is identical across backends


def stage_play(
    env: Measure,
    u_prime: Sequence[int],
    accept: Sequence[int],
    r_prime: Sequence[int],
    k1: int,
    k2: int,
    model: str,
    plays: int,
    rng: np.random.Generator,
    backend: str | None = None,
) -> tuple[np.ndarray, int]:
    """Run ``plays`` uniform passes, returning (win counts, queries issued).

    Equivalent in distribution to summing ``plays`` calls of ``uniform_play``;
    all randomness is pre-drawn per chunk and handed to the recording kernel.
    """
    urec = np.asarray(sorted(int(a) for a in u_prime), dtype=np.int64)
    m = len(urec)
    if not (1 <= k1 <= m):
        raise DomainError("need 1 <= k1 <= |u_prime|")
    reject_pool = np.asarray(sorted(int(a) for a in r_prime), dtype=np.int64)
    accept_pool = np.asarray(sorted(int(a) for a in accept), dtype=np.int64)
    if k2 > 0 and len(reject_pool) + len(accept_pool) < k2:
        raise InfeasibleError("cannot build a top-off set: pools too small")

    q = queries_per_play(m, k1)
    n = env.n
    y = np.zeros(n, dtype=np.int64)
    done = 0
    while done < plays:
        b = min(CHUNK_PLAYS, plays - done)
        bits = sample_matrix(env, rng, b * q).reshape(b, q, n)
        perm = np.argsort(rng.random((b, m)), axis=1)
        if k2 > 0:
            if len(reject_pool) >= k2:
                keys = np.argsort(rng.random((b, len(reject_pool))), axis=1)
                topoff = reject_pool[keys[:, :k2]]
            else:
                need = k2 - len(reject_pool)
                keys = np.argsort(rng.random((b, len(accept_pool))), axis=1)
                fill = accept_pool[keys[:, :need]]
                topoff = np.concatenate(
                    [np.broadcast_to(reject_pool, (b, len(reject_pool))), fill], axis=1
                )
        else:
            topoff = np.zeros((b, 0), dtype=np.int64)
        if model == "marked":
            mark_u = rng.random((b, q))
        else:
            mark_u = np.zeros((b, q))
        record_plays(bits, perm, topoff, urec, k1, model, mark_u, y, backend=backend)
        done += b
    return y, plays * q


# ---------------------------------------------------------------------------
# Balancing, elimination state, and the main loop.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SamplingSets:
    """Sampling pools for one stage: U' = U + B, R' = R - B."""

    u_prime: tuple[int, ...]
    r_prime: tuple[int, ...]
    balancing: tuple[int, ...]


def balance_set_size(u_size: int, k1: int) -> int:
    """|B| = max{0, ceil(5 k1/2 - |U| - 1/2)}."""
    return max(0, math.ceil(2.5 * k1 - u_size - 0.5))


def balance(undecided: Sequence[int], rejected: Sequence[int], k1: int,
            rng: np.random.Generator) -> SamplingSets:
    """Move |B| uniformly chosen rejected arms into the sampling pool.

    Keeps the bandit occlusion constants in check (pair-exclusion probability
    at least 1/2, low-mean fraction bounded); infeasible when the reject set
    cannot supply |B| arms, which the n >= ceil(7k/2) guard rules out.
    """
    undecided = tuple(sorted(int(a) for a in undecided))
    rejected = tuple(sorted(int(a) for a in rejected))
    size = balance_set_size(len(undecided), k1)
    if size > len(rejected):
        raise InfeasibleError(
            f"balancing needs {size} reject arms but only {len(rejected)} exist"
        )
    if size == 0:
        return SamplingSets(u_prime=undecided, r_prime=rejected, balancing=())
    picked = tuple(
        int(a) for a in rng.permutation(np.asarray(rejected, dtype=np.int64))[:size]
    )
    u_prime = tuple(sorted(undecided + picked))
    r_prime = tuple(sorted(set(rejected) - set(picked)))
    return SamplingSets(u_prime=u_prime, r_prime=r_prime, balancing=picked)


@dataclass(frozen=True, eq=False)
class ElimState:
    """Algorithm state at one stage: the U/A/R partition plus stage bookkeeping."""

    n: int
    k: int
    undecided: tuple[int, ...]
    accepted: tuple[int, ...]
    rejected: tuple[int, ...]
    t: int
    sample_size: int
    rewards: np.ndarray
    k1: int
    k2: int
    exact_k_mode: bool

    def __post_init__(self):
        parts = set(self.undecided) | set(self.accepted) | set(self.rejected)
        total = len(self.undecided) + len(self.accepted) + len(self.rejected)
        if parts != set(range(self.n)) or total != self.n:
            raise DomainError("undecided/accepted/rejected must partition the arms")
        if len(self.accepted) > self.k or len(self.rejected) > self.n - self.k:
            raise DomainError("accepted/rejected sizes exceed their caps")
        if self.k1 != min(len(self.undecided), self.k):
            raise DomainError("k1 must equal min(|U|, k)")
        if self.sample_size != 2**self.t:
            raise DomainError("sample size must equal 2^t")


def elimination_step(
    state: ElimState,
    mu_hat: dict[int, float],
    c_hat: dict[int, float],
) -> tuple[ElimState, tuple[int, ...], tuple[int, ...]]:
    """Apply the accept/reject rules on one snapshot of intervals.

    Accept i when mu_i - c_i clears the (k_t+1)-th largest upper bound over
    the undecided set; reject i when mu_i + c_i falls under the k_t-th
    largest lower bound.  Once n-k arms are rejected the leftovers are
    accepted.  Returns the advanced state (t+1, budget doubled) plus the
    newly accepted/rejected arms.
    """
    U = state.undecided
    if set(mu_hat) != set(U) or set(c_hat) != set(U):
        raise DomainError("need exactly one interval per undecided arm")
    k_t = state.k - len(state.accepted)
    uppers = {i: mu_hat[i] + c_hat[i] for i in U}
    lowers = {i: mu_hat[i] - c_hat[i] for i in U}
    upper_sorted = sorted(uppers.values(), reverse=True)
    lower_sorted = sorted(lowers.values(), reverse=True)
    accept_bar = upper_sorted[k_t]  # (k_t+1)-th largest
    reject_bar = lower_sorted[k_t - 1]  # k_t-th largest
    accepted_now = tuple(i for i in U if lowers[i] > accept_bar)
    rejected_now = tuple(i for i in U if uppers[i] < reject_bar)

    new_a = tuple(sorted(state.accepted + accepted_now))
    new_r = tuple(sorted(state.rejected + rejected_now))
    decided = set(accepted_now) | set(rejected_now)
    new_u = tuple(i for i in U if i not in decided)
    if len(new_r) == state.n - state.k and new_u:
        accepted_now = accepted_now + new_u
        new_a = tuple(sorted(new_a + new_u))
        new_u = ()
    t = state.t + 1
    k1 = min(len(new_u), state.k)
    advanced = ElimState(
        n=state.n,
        k=state.k,
        undecided=new_u,
        accepted=new_a,
        rejected=new_r,
        t=t,
        sample_size=2**t,
        rewards=np.zeros(state.n, dtype=np.int64),
        k1=k1,
        k2=state.k - k1 if state.exact_k_mode and 0 < k1 < state.k else 0,
        exact_k_mode=state.exact_k_mode,
    )
    return advanced, accepted_now, rejected_now


@dataclass(frozen=True)
class ElimConfig:
    """Knobs for run_identification.

    ``exact_k``/``use_balance`` default per feedback model (exact-k on for
    bandit and marked, balancing on for bandit when n >= ceil(7k/2)).
    ``stage_cap`` bounds the doubling loop; hitting it flags the trial
    inconclusive rather than returning a silent guess.
    """

    exact_k: bool | None = None
    use_balance: bool | None = None
    stage_cap: int = 40
    backend: str | None = None
    keep_stage_log: bool = True


def run_identification(
    env: Measure,
    model: str,
    k: int,
    delta: float,
    config: ElimConfig | None = None,
    rng: np.random.Generator | None = None,
) -> TrialRecord:
    """Identify the best k-subset under the given feedback model.

    Returns the accepted arms, total queries, and a per-stage log.  When the
    environment exposes marginal means, bandit mode rejects instances with a
    unit mean (they are unidentifiable from max-only feedback).
    """
    if model not in MODELS:
        raise DomainError(f"unknown model {model!r}")
    if rng is None:
        raise DomainError("an explicit seeded generator is required")
    cfg = config or ElimConfig()
    n = env.n
    if not (1 <= k <= n):
        raise DomainError("need 1 <= k <= n")
    run_warnings: list[str] = []

    if k == n:
        # the answer is forced; sampling would be pointless
        return TrialRecord(returned=tuple(range(n)), total_queries=0, stages=0)

    if model == "bandit":
        means = marginal_means(env)
        if any(m >= 1.0 for m in means):
            raise IdentifiabilityError("bandit identification needs every mean < 1")

    exact_k = cfg.exact_k if cfg.exact_k is not None else model in ("bandit", "marked")
    use_balance = cfg.use_balance if cfg.use_balance is not None else model == "bandit"
    if model != "bandit":
        use_balance = False
    if use_balance and n < math.ceil(7 * k / 2):
        use_balance = False
        msg = f"balancing disabled: n={n} < ceil(7k/2)={math.ceil(7 * k / 2)}"
        run_warnings.append(msg)
        warnings.warn(msg, stacklevel=2)

    state = ElimState(
        n=n,
        k=k,
        undecided=tuple(range(n)),
        accepted=(),
        rejected=(),
        t=1,
        sample_size=2,
        rewards=np.zeros(n, dtype=np.int64),
        k1=min(n, k),
        k2=0,
        exact_k_mode=exact_k,
    )
    total_queries = 0
    stage_log: list[StageRecord] = []

    while state.t <= cfg.stage_cap:
        t, big_t = state.t, state.sample_size
        u_before, a_before, r_before = state.undecided, state.accepted, state.rejected
        k1 = min(len(u_before), k)
        if use_balance:
            sets = balance(u_before, r_before, k1, rng)
        else:
            sets = SamplingSets(u_prime=u_before, r_prime=r_before, balancing=())
        k2 = k - k1 if (exact_k and k1 < k) else 0
        y, queries = stage_play(
            env,
            sets.u_prime,
            a_before,
            sets.r_prime,
            k1,
            k2,
            model,
            big_t,
            rng,
            backend=cfg.backend,
        )
        total_queries += queries
        mu_hat = {i: y[i] / big_t for i in u_before}
        c_hat = {
            i: confidence_radius(mu_hat[i], big_t, n, t, delta).c_hat for i in u_before
        }
        state = ElimState(
            n=n,
            k=k,
            undecided=u_before,
            accepted=a_before,
            rejected=r_before,
            t=t,
            sample_size=big_t,
            rewards=y,
            k1=k1,
            k2=k2,
            exact_k_mode=exact_k,
        )
        state, accepted_now, rejected_now = elimination_step(state, mu_hat, c_hat)
        if cfg.keep_stage_log:
            stage_log.append(
                StageRecord(
                    t=t,
                    undecided=len(u_before),
                    accepted=len(a_before),
                    rejected=len(r_before),
                    balancing=len(sets.balancing),
                    sample_size=big_t,
                    queries=queries,
                    mu_hat=mu_hat,
                    c_hat=c_hat,
                    accepted_now=accepted_now,
                    rejected_now=rejected_now,
                )
            )
        if len(state.accepted) >= k:
            return TrialRecord(
                returned=tuple(sorted(state.accepted)),
                total_queries=total_queries,
                stages=t,
                warnings=tuple(run_warnings),
                stage_log=tuple(stage_log),
            )

    return TrialRecord(
        returned=tuple(sorted(state.accepted)),
        total_queries=total_queries,
        stages=cfg.stage_cap,
        inconclusive=True,
        warnings=tuple(run_warnings),
        stage_log=tuple(stage_log),
    )
