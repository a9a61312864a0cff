"""Inhomogeneous branching process driven by excursion offspring laws.

Generation i of the process uses the offspring law of the excursion hit
count at block index ``k0 + i``.  Two law modes:

* ``sampler`` — every individual draws a genuinely independent excursion
  through the junction samplers (exact law, depth-independent cost);
* ``empirical`` — a per-level histogram is estimated once and reused, which
  is faster but adds estimation noise.

Population growth is capped; hitting the cap is classified as survival
(supercritical growth makes later extinction negligible at that size, so
the bias direction is toward none).
"""

from __future__ import annotations

from dataclasses import dataclass

import math

import numpy as np

from . import analytic
from . import _kernels as K
from .errors import DomainError
from .experiments import EstimateRecord, wilson_interval
from .junction import sample_offspring, skeleton

_LAW_STREAM = -1  # purpose index for empirical-law estimation streams


@dataclass(frozen=True)
class OffspringLaw:
    """Offspring distribution for one generation.

    ``mode == "sampler"``: draw fresh excursions at block index k.
    ``mode == "empirical"``: draw from ``probs`` (histogram over 0..d^n0,
    estimated from ``samples`` excursions).
    """

    mode: str
    d: int
    n0: int
    a: float
    k: int
    probs: np.ndarray | None = None
    samples: int = 0

    def __post_init__(self):
        if self.mode not in ("sampler", "empirical"):
            raise DomainError(f"unknown law mode {self.mode!r}")
        if self.mode == "empirical":
            p = np.asarray(self.probs, dtype=float)
            if p.ndim != 1 or len(p) != self.d**self.n0 + 1:
                raise DomainError("histogram must cover 0..d^n0")
            if abs(p.sum() - 1.0) > 1e-9 or np.any(p < 0):
                raise DomainError("histogram masses must be a distribution")
            object.__setattr__(self, "probs", p)

    def draw(self, n: int, seed: int, base_index: int = 0) -> np.ndarray:
        if self.mode == "sampler":
            return sample_offspring(
                skeleton(self.d, self.k, self.n0), self.a, seed, n, base_index
            )
        out = np.empty(n, np.int64)
        K.empirical_offspring_batch(
            np.cumsum(self.probs), K.seed_arg(seed), base_index, n, out
        )
        return out


def empirical_law(d: int, n0: int, a: float, k: int, samples: int, seed: int) -> OffspringLaw:
    """Estimate one level's offspring histogram from fresh excursions."""
    z = sample_offspring(skeleton(d, k, n0), a, seed, samples)
    probs = np.bincount(z, minlength=d**n0 + 1) / samples
    return OffspringLaw("empirical", d, n0, a, k, probs, samples)


@dataclass(frozen=True)
class BranchingTrajectory:
    """Populations B_0..B_I with extinction/cap bookkeeping and raw moments."""

    populations: tuple[int, ...]
    extinct_at: int | None
    capped: bool
    offspring_sums: np.ndarray
    offspring_sumsq: np.ndarray
    offspring_counts: np.ndarray

    @property
    def survived(self) -> bool:
        return self.extinct_at is None

    def population_at(self, generation: int) -> int:
        """B_generation; a capped trajectory reports the cap onwards."""
        if generation < len(self.populations):
            return self.populations[generation]
        return self.populations[-1] if self.extinct_at is None else 0


def simulate(
    k0: int,
    n0: int,
    a: float,
    d: int,
    generations: int,
    law_mode: str = "sampler",
    seed: int = 0,
    population_cap: int = 100_000,
    laws: list[OffspringLaw] | None = None,
    replica: int = 0,
    empirical_samples: int = 4096,
) -> BranchingTrajectory:
    """One trajectory: generation i reproduces per the level k0+i law.

    Individual j of generation i draws from stream j of a (seed, replica,
    generation) sub-seed, so trajectories are reproducible regardless of
    batch or thread layout.
    """
    if k0 < 1 or generations < 1:
        raise DomainError("need k0 >= 1 and generations >= 1")
    if population_cap < 1:
        raise DomainError("population cap must be >= 1")
    if laws is None and law_mode == "empirical":
        laws = build_empirical_laws(
            k0, n0, a, d, generations, empirical_samples, seed
        )
    traj_seed = int(K.stream_state(K.seed_arg(seed), replica))
    pops = [1]
    sums = np.zeros(generations)
    sumsq = np.zeros(generations)
    counts = np.zeros(generations, np.int64)
    extinct_at = None
    capped = False
    for i in range(generations):
        cur = pops[-1]
        if cur == 0:
            break
        if law_mode == "sampler" and laws is None:
            law = OffspringLaw("sampler", d, n0, a, k0 + i)
        else:
            law = laws[i]
        gseed = int(K.stream_state(K.seed_arg(traj_seed), i))
        z = law.draw(cur, gseed)
        sums[i] = z.sum()
        sumsq[i] = float((z.astype(float) ** 2).sum())
        counts[i] = cur
        nxt = int(z.sum())
        pops.append(nxt)
        if nxt == 0:
            extinct_at = i + 1
            break
        if nxt >= population_cap:
            capped = True
            break
    return BranchingTrajectory(tuple(pops), extinct_at, capped, sums, sumsq, counts)


def build_empirical_laws(
    k0: int,
    n0: int,
    a: float,
    d: int,
    generations: int,
    samples: int,
    seed: int,
) -> list[OffspringLaw]:
    """Per-level histograms, estimated on a dedicated stream family."""
    law_seed = int(K.stream_state(K.seed_arg(seed), _LAW_STREAM))
    return [
        empirical_law(
            d, n0, a, k0 + i, samples, int(K.stream_state(K.seed_arg(law_seed), i))
        )
        for i in range(generations)
    ]


@dataclass(frozen=True)
class SurvivalSummary:
    record: EstimateRecord
    moments: analytic.MomentSequence | None
    moment_bound: float | None
    delta: float


def survival_estimate(
    k0: int,
    n0: int,
    a: float,
    d: int,
    generations: int,
    replicas: int,
    seed: int,
    law_mode: str = "sampler",
    population_cap: int = 100_000,
    empirical_samples: int = 4096,
) -> SurvivalSummary:
    """Survival frequency by the stated horizon vs the moment lower bound.

    Replica r simulates one trajectory on its own stream family; survival
    means a positive (or capped) population at the horizon.  The moment
    bound is :func:`analytic.survival_lower_bound` fed with the empirical
    per-generation offspring moments pooled over replicas.
    """
    laws = None
    if law_mode == "empirical":
        laws = build_empirical_laws(k0, n0, a, d, generations, empirical_samples, seed)
    survived = 0
    sums = np.zeros(generations)
    sumsq = np.zeros(generations)
    counts = np.zeros(generations, np.int64)
    for r in range(replicas):
        traj = simulate(
            k0,
            n0,
            a,
            d,
            generations,
            law_mode,
            seed,
            population_cap,
            laws,
            replica=r,
        )
        if traj.survived:
            survived += 1
        sums += traj.offspring_sums
        sumsq += traj.offspring_sumsq
        counts += traj.offspring_counts
    p = survived / replicas
    stderr = math.sqrt(p * (1 - p) / replicas)
    moments = None
    bound = None
    if np.all(counts > 0):
        means = sums / counts
        second = sumsq / counts
        moments = analytic.MomentSequence(means, np.maximum(second, means))
        bound = analytic.survival_lower_bound(moments, generations)
    dlt = analytic.delta(d, n0)
    lo, hi = wilson_interval(p, replicas)
    z = (p - dlt) / stderr if stderr > 0 else math.inf
    record = EstimateRecord(
        "branching_survival",
        {
            "d": d,
            "a": a,
            "n0": n0,
            "k0": k0,
            "generations": generations,
            "law_mode": law_mode,
            "population_cap": population_cap,
            "seed": seed,
        },
        p,
        stderr,
        replicas,
        0,
        dlt,
        z,
        lo,
        hi,
    )
    return SurvivalSummary(record, moments, bound, dlt)
