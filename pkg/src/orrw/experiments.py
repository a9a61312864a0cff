"""Replicated, seeded Monte Carlo estimators tied to the closed forms.

Every estimator takes a master seed; replica r draws from stream r (see
:mod:`orrw._kernels`), so results are reproducible bit-for-bit and
independent of the thread pool.  Estimates carry normal-approximation
standard errors, Wilson intervals for frequencies, and a z-score against
the analytic reference where one exists.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict

import numpy as np

from . import analytic
from . import _kernels as K
from .errors import DomainError
from .tree import TreeModel, parse_model, sparse_tree
from .walk import (
    StoppingCondition,
    WalkState,
    excursion_batch,
    fresh_subtree,
    hit_level,
    return_to_root,
    run_until,
    step_budget,
)

Z975 = 1.959963984540054


def wilson_interval(p: float, n: int, z: float = Z975) -> tuple[float, float]:
    """Wilson score interval for a binomial frequency (sane near 0 and 1)."""
    if n <= 0:
        return 0.0, 1.0
    denom = 1.0 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1.0 - p) / n + z * z / (4.0 * n * n)) / denom
    return max(0.0, center - half), min(1.0, center + half)


@dataclass(frozen=True)
class EstimateRecord:
    """One estimate with uncertainty and its analytic reference."""

    experiment: str
    params: dict
    estimate: float
    stderr: float
    n: int
    n_truncated: int = 0
    reference: float | None = None
    z: float | None = None
    wilson_low: float | None = None
    wilson_high: float | None = None

    def csv_row(self) -> dict:
        """The documented flat schema: experiment, params..., estimate, stderr, n, reference, z."""
        row = {"experiment": self.experiment}
        row.update(self.params)
        row.update(
            estimate=self.estimate,
            stderr=self.stderr,
            n=self.n,
            reference=self.reference,
            z=self.z,
        )
        return row


@dataclass(frozen=True)
class RunConfig:
    """A fully resolved experiment invocation (echoed into manifests)."""

    kind: str
    seed: int
    replicas: int = 1
    model: str | None = None
    params: dict = field(default_factory=dict)
    budget: int | None = None
    threads: int = 1
    out: str | None = None
    format: str = "csv"

    def as_dict(self) -> dict:
        return asdict(self)


def _freq_record(experiment, params, hits, n, n_truncated, reference) -> EstimateRecord:
    p = hits / n if n else float("nan")
    stderr = math.sqrt(p * (1.0 - p) / n) if n else float("nan")
    z = None
    if reference is not None and n:
        z = (p - reference) / stderr if stderr > 0 else math.inf * np.sign(p - reference)
        if p == reference:
            z = 0.0
    lo, hi = wilson_interval(p, n)
    return EstimateRecord(
        experiment, params, p, stderr, n, n_truncated, reference, z, lo, hi
    )


def _chunks(total: int, threads: int) -> list[tuple[int, int]]:
    threads = max(1, min(threads, total)) if total else 1
    size = -(-total // threads)
    return [(s, min(size, total - s)) for s in range(0, total, size)]


def _map_chunks(fn, total: int, threads: int) -> list:
    parts = _chunks(total, threads)
    if threads <= 1 or len(parts) <= 1:
        return [fn(s, c) for s, c in parts]
    with ThreadPoolExecutor(max_workers=len(parts)) as pool:
        futs = [pool.submit(fn, s, c) for s, c in parts]
        return [f.result() for f in futs]


def halfline_escape(
    m: int, M: int, a: float, replicas: int, seed: int, threads: int = 1
) -> EstimateRecord:
    """Frequency of hitting M before 0 from m with the [0, m] prefix crossed."""
    if not 1 <= m < M:
        raise DomainError("need 1 <= m < M")
    if a <= 0:
        raise DomainError("a must be > 0")
    wins = sum(
        _map_chunks(
            lambda s, c: K.halfline_escape_batch(m, M, a, c, K.seed_arg(seed), s),
            replicas,
            threads,
        )
    )
    ref = analytic.escape_product(m, M, a)
    return _freq_record(
        "escape", {"m": m, "M": M, "a": a, "seed": seed}, wins, replicas, 0, ref
    )


def excursion_stats(
    d: int,
    k: int,
    n0: int,
    a: float,
    replicas: int,
    seed: int,
    threads: int = 1,
    step_cap: int = 100_000_000,
):
    """Excursion Monte Carlo on one block: fixed-target hit and Z moments.

    Returns (records, aux) where aux carries per-target hit counts, the raw
    completed count, and the truncation count.  References: the fixed-target
    probability and mean use the distance-convention ruin product, the mean
    is also reported against the level convention, and the second moment
    against the d^(2 n0) cap.
    """
    spec = fresh_subtree(d, k, n0)
    out = _map_chunks(
        lambda s, c: excursion_batch(spec, a, seed, c, base_index=s, step_cap=step_cap),
        replicas,
        threads,
    )
    z = np.concatenate([o[0] for o in out])
    trunc = np.concatenate([o[2] for o in out]).astype(bool)
    hits = np.vstack([o[3] for o in out])
    done = ~trunc
    n = int(done.sum())
    n_trunc = int(trunc.sum())
    params = {"d": d, "k": k, "n0": n0, "a": a, "seed": seed}

    m_lo, m_hi = analytic.spine_product_range(k, n0, "distance")
    target_ref = analytic.escape_product(m_lo, m_hi, a)
    rec_target = _freq_record(
        "excursion_target_hit",
        params,
        int(hits[done, 0].sum()),
        n,
        n_trunc,
        target_ref,
    )

    zz = z[done].astype(float)
    mean = float(zz.mean())
    se = float(zz.std(ddof=1) / math.sqrt(n))
    ref_mean = analytic.offspring_mean(k, n0, a, d, "distance")
    rec_mean = EstimateRecord(
        "excursion_mean",
        params,
        mean,
        se,
        n,
        n_trunc,
        ref_mean,
        (mean - ref_mean) / se if se > 0 else 0.0,
    )
    ref_mean_level = analytic.offspring_mean(k, n0, a, d, "level")
    rec_mean_level = EstimateRecord(
        "excursion_mean_level_ref",
        params,
        mean,
        se,
        n,
        n_trunc,
        ref_mean_level,
        (mean - ref_mean_level) / se if se > 0 else 0.0,
    )

    z2 = zz**2
    mean2 = float(z2.mean())
    se2 = float(z2.std(ddof=1) / math.sqrt(n))
    cap = analytic.offspring_second_moment_cap(n0, d)
    rec_second = EstimateRecord(
        "excursion_second_moment",
        params,
        mean2,
        se2,
        n,
        n_trunc,
        cap,
        (mean2 - cap) / se2 if se2 > 0 else 0.0,
    )

    aux = {
        "per_target_hits": hits[done].sum(axis=0),
        "n_completed": n,
        "n_truncated": n_trunc,
        "z_values": z[done],
    }
    return [rec_target, rec_mean, rec_mean_level, rec_second], aux


def root_return_probe(
    d: int,
    a: float,
    k: int,
    n: int,
    replicas: int,
    budget: int,
    seed: int,
    threads: int = 1,
) -> EstimateRecord:
    """From a fresh walk run to level 2^k: frequency of reaching 2^(k+n) first.

    Each replica walks from the root to level 2^k, then races the return to
    the root against level 2^(k+n) under a total step budget.  Budget
    exhaustion is counted separately and excluded from the frequency, which
    is checked one-sided against :func:`analytic.escape_bound`.
    """
    model = sparse_tree(d)
    lo, hi = 2**k, 2 ** (k + n)
    stop2 = StoppingCondition.first_of(return_to_root(), hit_level(hi))

    def chunk(start, count):
        escaped = returned = unresolved = 0
        for r in range(start, start + count):
            st = WalkState.create(model, a, seed, replica=r)
            trig, _, steps = run_until(
                st, StoppingCondition.first_of(hit_level(lo), step_budget(budget))
            )
            if trig == "step_budget":
                unresolved += 1
                continue
            trig, _, _ = run_until(
                st,
                StoppingCondition.first_of(stop2, step_budget(budget - steps))
                if budget > steps
                else stop2,
            )
            if trig == "hit_level":
                escaped += 1
            elif trig == "return_to_root":
                returned += 1
            else:
                unresolved += 1
        return escaped, returned, unresolved

    parts = _map_chunks(chunk, replicas, threads)
    escaped = sum(p[0] for p in parts)
    returned = sum(p[1] for p in parts)
    unresolved = sum(p[2] for p in parts)
    ref = analytic.escape_bound(k, n, a, d)
    return _freq_record(
        "probe",
        {"d": d, "a": a, "k": k, "n": n, "budget": budget, "seed": seed},
        escaped,
        escaped + returned,
        unresolved,
        ref,
    )


SWEEP_STATISTICS = ("returns_to_root", "max_level", "final_level")
SWEEP_QUANTILES = (0.25, 0.5, 0.75)


def phase_sweep(
    d: int,
    a_grid: list[float],
    budget: int,
    replicas: int,
    seed: int,
    threads: int = 1,
) -> list[EstimateRecord]:
    """Fixed-budget runs across reinforcement values; quartiles per statistic.

    Emits monotone desk-scale statistics only (returns to the root, maximum
    level reached, final level); no recurrence verdict is drawn.
    """
    model = sparse_tree(d)
    records = []
    for ai, a in enumerate(a_grid):
        def chunk(start, count, a=a, ai=ai):
            rows = np.empty((count, 3), np.int64)
            for i, r in enumerate(range(start, start + count)):
                st = WalkState.create(model, a, seed, replica=ai * replicas + r)
                run_until(st, step_budget(budget))
                rows[i, 0] = st.root_visits
                rows[i, 1] = st.max_level
                rows[i, 2] = st.store.level[st.position]
            return rows

        data = np.vstack(_map_chunks(chunk, replicas, threads))
        for si, stat in enumerate(SWEEP_STATISTICS):
            for q in SWEEP_QUANTILES:
                records.append(
                    EstimateRecord(
                        "sweep",
                        {
                            "d": d,
                            "a": a,
                            "budget": budget,
                            "statistic": stat,
                            "quantile": q,
                            "seed": seed,
                        },
                        float(np.quantile(data[:, si], q)),
                        float("nan"),
                        replicas,
                    )
                )
    return records
