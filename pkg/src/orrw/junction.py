"""Collapsed excursion sampling on the junction skeleton.

An excursion tree on ``sparse:<d>`` is a small set of branching vertices
(junctions) joined by long unary paths (segments): the anchor, the center,
and the d-ary layers down to the upper boundary.  Both samplers here draw
the excursion's boundary hit-set from its exact law without stepping through
the segments, so the cost is independent of how deep in the tree the block
sits — step-by-step excursions become physically impossible a few levels up
(a block at index k spans ~2^(k n0) vertices), while these stay O(1).

* a = 1: the walk is Markov, so distinct-junction visits form a Markov
  chain whose exit law out of each junction is the harmonic measure of its
  incident segments (conductance 1/length).
* general a > 0: segment crossing states are tracked as frontier prefixes
  and entries are collapsed into frontier events (see
  ``_kernels.junction_frontier_batch``).

Agreement of both samplers with direct step-by-step excursions is covered
by the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .errors import DomainError

_MOVE_CAP = 2**31


@dataclass(frozen=True)
class JunctionSkeleton:
    """Branch-point graph of one excursion tree.

    Junction 0 is the absorbing anchor, junction 1 the center; layer g
    (1 <= g <= n0) holds the d^g junctions at level 2^(k n0 + g).
    ``seg_len[j]`` is the length of the unary path from ``up[j]`` down to j;
    ``leaf_idx`` maps boundary junctions to their slot in path-lexicographic
    order (-1 elsewhere).
    """

    d: int
    k: int
    n0: int
    up: np.ndarray
    seg_len: np.ndarray
    child_base: np.ndarray
    n_child: np.ndarray
    leaf_idx: np.ndarray

    @property
    def n_junctions(self) -> int:
        return self.up.shape[0]

    @property
    def n_leaves(self) -> int:
        return self.d**self.n0


def skeleton(d: int, k: int, n0: int) -> JunctionSkeleton:
    if d < 1 or k < 1 or n0 < 1:
        raise DomainError("need d >= 1, k >= 1, n0 >= 1")
    if (k + 1) * n0 > 60:
        raise DomainError("boundary level beyond 2^60 is out of integer range")
    total = 2 + sum(d**g for g in range(1, n0 + 1))
    up = np.full(total, -1, np.int64)
    seg_len = np.zeros(total, np.int64)
    child_base = np.full(total, -1, np.int64)
    n_child = np.zeros(total, np.int64)
    leaf_idx = np.full(total, -1, np.int64)

    base_exp = k * n0
    up[1] = 0
    seg_len[1] = 2 ** (base_exp - 1)  # anchor sits half a level-block below
    layer_start = [1]  # layer 0 = the center
    nxt = 2
    for g in range(1, n0 + 1):
        layer_start.append(nxt)
        nxt += d**g
    for g in range(1, n0 + 1):
        start = layer_start[g]
        pstart = layer_start[g - 1]
        length = 2 ** (base_exp + g - 1)
        for i in range(d ** g):
            j = start + i
            p = pstart + i // d
            up[j] = p
            seg_len[j] = length
            if child_base[p] < 0:
                child_base[p] = j
            n_child[p] += 1
    leaves = layer_start[n0]
    for i in range(d**n0):
        leaf_idx[leaves + i] = i
    return JunctionSkeleton(d, k, n0, up, seg_len, child_base, n_child, leaf_idx)


def markov_tables(skel: JunctionSkeleton):
    """Cumulative harmonic-measure rows for the a = 1 junction chain."""
    J = skel.n_junctions
    nbrs: list[int] = []
    cums: list[float] = []
    off = np.zeros(J + 1, np.int64)
    for j in range(J):
        off[j] = len(nbrs)
        if j == 0:
            continue
        ids = [int(skel.up[j])]
        cond = [1.0 / float(skel.seg_len[j])]
        for i in range(int(skel.n_child[j])):
            c = int(skel.child_base[j]) + i
            ids.append(c)
            cond.append(1.0 / float(skel.seg_len[c]))
        total = sum(cond)
        acc = 0.0
        for nid, w in zip(ids, cond):
            acc += w / total
            nbrs.append(nid)
            cums.append(acc)
    off[J] = len(nbrs)
    return (
        np.asarray(nbrs, np.int64),
        np.asarray(cums, np.float64),
        off,
    )


def sample_offspring(
    skel: JunctionSkeleton,
    a: float,
    seed: int,
    n: int,
    base_index: int = 0,
    with_hits: bool = False,
):
    """n independent excursion hit counts (and optionally hit-sets).

    Dispatches to the Markov chain when a == 1, else to the frontier-event
    sampler.  Raises if any draw exhausts its internal move cap (never seen
    in practice; the cap only guards against runaway loops).
    """
    if a <= 0:
        raise DomainError("a must be > 0")
    z_out = np.empty(n, np.int64)
    trunc = np.empty(n, np.uint8)
    hits = np.empty((n, skel.n_leaves), np.uint8)
    if a == 1.0:
        nbr, cum, off = markov_tables(skel)
        K.junction_markov_batch(
            nbr,
            cum,
            off,
            skel.leaf_idx,
            skel.n_leaves,
            _MOVE_CAP,
            K.seed_arg(seed),
            base_index,
            n,
            z_out,
            trunc,
            hits,
        )
    else:
        frontier = np.zeros(skel.n_junctions, np.int64)
        K.junction_frontier_batch(
            skel.up,
            skel.seg_len,
            skel.child_base,
            skel.n_child,
            skel.leaf_idx,
            skel.n_leaves,
            float(a),
            _MOVE_CAP,
            K.seed_arg(seed),
            base_index,
            n,
            z_out,
            trunc,
            hits,
            frontier,
        )
    if trunc.any():
        raise RuntimeError("junction sampler exhausted its move cap")
    if with_hits:
        return z_out, hits
    return z_out
