"""Closed-form quantities: ruin products, escape bounds, branching moments.

Everything here is a pure function of its arguments.  The central object is
the ruin product ``prod_{j=m}^{M-1} j/(j+a)`` — the probability that a
one-dimensional reinforced walk at position m, with everything behind it
already crossed, reaches M before 0.  For integer ``a`` the product
telescopes to ``prod_{i<a} (m+i)/(M+i)`` and is evaluated exactly; otherwise
it is evaluated in log space through ``lgamma``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .tree import TreeModel


def critical_parameter(model: TreeModel) -> float:
    """Reinforcement threshold separating transient from recurrent behavior."""
    if model.kind == "sparse" and model.d >= 2:
        return math.log2(model.d)
    if model.kind == "weighted" and model.arity == 3 and model.decay == 0.5:
        return 2.0
    raise DomainError(
        f"no known critical parameter for {model.designation}"
    )


@dataclass(frozen=True)
class ResistanceResult:
    partial_sum: float
    classification: str  # "finite" | "divergent"
    limit: float | None
    terms: int


def effective_resistance(model: TreeModel, truncation_terms: int = 64) -> ResistanceResult:
    """Root-to-infinity resistance of the sparse tree: 1 + sum 2^k / d^(k+1).

    The series has ratio 2/d: divergent for d in {1, 2}, otherwise the limit
    is ``1 + 1/(d - 2)``.
    """
    if model.kind == "weighted":
        raise DomainError("resistance series implemented for sparse trees only")
    if truncation_terms < 1:
        raise DomainError("need at least one term")
    d = 1 if model.kind == "halfline" else model.d
    partial = 1.0
    for k in range(truncation_terms):
        partial += 2.0**k / float(d) ** (k + 1)
    if d >= 3:
        return ResistanceResult(partial, "finite", 1.0 + 1.0 / (d - 2), truncation_terms)
    return ResistanceResult(partial, "divergent", None, truncation_terms)


def ruin_step_probability(j: int, a: float) -> float:
    """Chance of gaining one level before full ruin: j / (j + a)."""
    if j < 1:
        raise DomainError("j must be >= 1")
    if a <= 0:
        raise DomainError("a must be > 0")
    return j / (j + a)


def escape_product_log(m: int, M: int, a: float) -> float:
    """log of prod_{j=m}^{M-1} j/(j+a) via lgamma (stable for huge ranges)."""
    if not 1 <= m < M:
        raise DomainError("need 1 <= m < M")
    if a <= 0:
        raise DomainError("a must be > 0")
    return (
        math.lgamma(M)
        - math.lgamma(m)
        - (math.lgamma(M + a) - math.lgamma(m + a))
    )


def escape_product(m: int, M: int, a: float) -> float:
    """prod_{j=m}^{M-1} j/(j+a), exact for integer a, log-space otherwise."""
    if not 1 <= m < M:
        raise DomainError("need 1 <= m < M")
    if a <= 0:
        raise DomainError("a must be > 0")
    if float(a).is_integer():
        # Numerator m..M-1 and denominator m+a..M+a-1 share all but a terms.
        out = 1.0
        for i in range(int(a)):
            out *= (m + i) / (M + i)
        return out
    return math.exp(escape_product_log(m, M, a))


def spine_product_range(k: int, n0: int, convention: str = "level") -> tuple[int, int]:
    """(m, M) for the excursion ruin product at block index k.

    Both conventions start the product at the anchor-to-center distance
    ``m = 2**(k*n0) - 2**(k*n0 - 1)``.  The ``"level"`` convention ends it at
    the upper-boundary level index ``M = 2**((k+1)*n0)``; the ``"distance"``
    convention ends it at the anchor-to-boundary graph distance
    ``M = 2**((k+1)*n0) - 2**(k*n0 - 1)``, which is what the excursion's
    one-dimensional reduction yields (the simulation modules discriminate).
    """
    if k < 1 or n0 < 1:
        raise DomainError("need k >= 1 and n0 >= 1")
    if convention not in ("level", "distance"):
        raise DomainError(f"unknown product convention {convention!r}")
    m = 2 ** (k * n0) - 2 ** (k * n0 - 1)
    M = 2 ** ((k + 1) * n0)
    if convention == "distance":
        M -= 2 ** (k * n0 - 1)
    return m, M


def escape_bound(k: int, n: int, a: float, d: int) -> float:
    """Upper bound on P[no root return before level 2^(k+n) | at level 2^k].

    ``exp(k ln d - n (a ln 2 - ln d) - a ln(1 - a 2^-k))``; requires
    ``a * 2**-k < 1`` (the bound is vacuous otherwise) and exceeds 1 for
    small k, becoming summable along the recurrence level sequence.
    """
    if k < 1 or n < 1:
        raise DomainError("need k >= 1 and n >= 1")
    if d < 2:
        raise DomainError("need d >= 2")
    if a <= 0:
        raise DomainError("a must be > 0")
    if a * 2.0**-k >= 1.0:
        raise DomainError("need a * 2**-k < 1")
    return math.exp(
        k * math.log(d)
        - n * (a * math.log(2) - math.log(d))
        - a * math.log1p(-a * 2.0**-k)
    )


def recurrence_level_sequence(a: float, d: int, count: int) -> list[int]:
    """k_0 = 1, k_i = k_(i-1) (1 + 2 ceil(ln(d+1) / (a ln 2 - ln d)))."""
    if count < 1:
        raise DomainError("count must be >= 1")
    if d < 1:
        raise DomainError("need d >= 1")
    gap = a * math.log(2) - math.log(d)
    if gap <= 0:
        raise DomainError("level sequence needs a > log2(d)")
    mult = math.ceil(math.log(d + 1) / gap)
    seq = [1]
    for _ in range(count - 1):
        seq.append(seq[-1] + 2 * seq[-1] * mult)
    return seq


def _n0_condition_log(n0: int, a: float, d: int, k: int) -> float:
    m, M = spine_product_range(k, n0, "level")
    return n0 * math.log(d) + escape_product_log(m, M, a)


def n0_condition_profile(a: float, d: int, n0: int, k_max: int) -> dict:
    """Per-k values of d^n0 * ruin product (log scale) plus the k -> inf limit.

    The level-convention ratio m/M equals 2^-(n0+1) for every k, so the
    limit of the log product is ``a * ln 2^-(n0+1)``.
    """
    logs = [_n0_condition_log(n0, a, d, k) for k in range(1, k_max + 1)]
    limit = n0 * math.log(d) + a * math.log(2.0 ** -(n0 + 1))
    worst = int(np.argmin(logs)) + 1
    return {"k_logs": logs, "limit_log": limit, "worst_k": worst}


def _n0_condition_holds(a: float, d: int, n0: int, k_max: int) -> bool:
    if float(a).is_integer():
        # Exact rational check; equality at the boundary must count.
        from fractions import Fraction

        ai = int(a)
        if Fraction(d**n0, 2 ** (ai * (n0 + 1))) < 2:
            return False
        for k in range(1, k_max + 1):
            m, M = spine_product_range(k, n0, "level")
            prod = Fraction(d**n0)
            for i in range(ai):
                prod *= Fraction(m + i, M + i)
            if prod < 2:
                return False
        return True
    prof = n0_condition_profile(a, d, n0, k_max)
    floor = math.log(2.0) - 1e-12
    return prof["limit_log"] >= floor and min(prof["k_logs"]) >= floor


def find_n0(a: float, d: int, k_max: int = 64) -> int:
    """Smallest n0 with d^n0 * (level-range ruin product) >= 2 for all k.

    Checked for k in [1, k_max] and in the k -> inf limit; exact rational
    arithmetic for integer a so boundary equality counts.  Exists exactly
    when 0 < a < log2(d).
    """
    if d < 2:
        raise DomainError("need d >= 2")
    if k_max < 1:
        raise DomainError("k_max must be >= 1")
    if a <= 0 or a >= math.log2(d):
        raise DomainError("n0 is finite only for 0 < a < log2(d)")
    for n0 in range(1, 4096):
        if _n0_condition_holds(a, d, n0, k_max):
            return n0
    raise DomainError("n0 search exceeded 4096; parameters too close to critical")


def offspring_mean(k: int, n0: int, a: float, d: int, convention: str = "level") -> float:
    """Expected upper-boundary hits of one excursion: d^n0 times ruin product."""
    if d < 1:
        raise DomainError("need d >= 1")
    m, M = spine_product_range(k, n0, convention)
    return d**n0 * escape_product(m, M, a)


def offspring_second_moment_cap(n0: int, d: int) -> float:
    """Crude cap E[Z^2] <= d^(2 n0) (Z is at most the boundary size d^n0)."""
    if n0 < 1 or d < 1:
        raise DomainError("need n0 >= 1 and d >= 1")
    return float(d) ** (2 * n0)


def delta(d: int, n0: int) -> float:
    """Generation-independent survival lower bound d^(-2 n0)."""
    if n0 < 1 or d < 2:
        raise DomainError("need d >= 2 and n0 >= 1")
    return float(d) ** (-2 * n0)


@dataclass(frozen=True)
class MomentSequence:
    """Per-generation offspring means and second moments."""

    means: np.ndarray
    second_moments: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.means, dtype=float)
        s = np.asarray(self.second_moments, dtype=float)
        object.__setattr__(self, "means", m)
        object.__setattr__(self, "second_moments", s)
        if m.shape != s.shape or m.ndim != 1:
            raise DomainError("means and second moments must be 1-d and aligned")
        if np.any(m <= 0):
            raise DomainError("offspring means must be positive")
        if np.any(s < m - 1e-12):
            raise DomainError("second moments must dominate means")

    def cumulative_products(self) -> np.ndarray:
        """P_j = prod_{i<j} m_i for j = 0..len (P_0 = 1)."""
        return np.concatenate([[1.0], np.cumprod(self.means)])


def survival_lower_bound(ms: MomentSequence, generations: int) -> float:
    """Lower bound on P[generation-i population > 0] from first two moments.

    ``[1/P_i + sum_{j<i} ((s_j - m_j)/m_j) / P_{j+1}]^-1`` clamped to [0, 1],
    where P_j is the cumulative mean population.
    """
    i = generations
    if not 1 <= i <= len(ms.means):
        raise DomainError("generations must be in [1, len(means)]")
    P = ms.cumulative_products()
    acc = 1.0 / P[i]
    for j in range(i):
        acc += ((ms.second_moments[j] - ms.means[j]) / ms.means[j]) / P[j + 1]
    return min(1.0, max(0.0, 1.0 / acc))
