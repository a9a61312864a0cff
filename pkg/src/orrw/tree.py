"""Infinite tree models and the lazy node arena.

Three models share one interface: the sparse tree ``sparse:<d>`` whose
vertices branch into d children exactly at the power-of-two levels (one
child elsewhere, one child at the root), the half-line ``halfline``
(identical to ``sparse:1``), and the weighted k-ary tree
``weighted:<arity>:<decay>`` where every vertex has ``arity`` children and
the edge into a level-L vertex carries base conductance ``decay**L``.

Vertices are dense integer ids in an append-only arena (:class:`NodeStore`);
id 0 is the root.  Each tree edge is keyed by its deeper endpoint, so the
walk modules store one crossed flag per vertex.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import DomainError
from ._kernels import KIND_SPARSE, KIND_WEIGHTED

_INT64_MAX = 2**63 - 1


@dataclass(frozen=True)
class TreeModel:
    """Which infinite tree, plus its branching and conductance rules."""

    kind: str  # "sparse" | "weighted" | "halfline"
    d: int = 1
    arity: int = 3
    decay: Fraction = Fraction(1, 2)

    def __post_init__(self):
        if self.kind not in ("sparse", "weighted", "halfline"):
            raise DomainError(f"unknown tree kind {self.kind!r}")
        if self.kind == "sparse" and self.d < 1:
            raise DomainError("sparse tree needs d >= 1")
        if self.kind == "weighted":
            if self.arity < 2:
                raise DomainError("weighted tree needs arity >= 2")
            if not (0 < self.decay < 1):
                raise DomainError("decay must lie in (0, 1)")

    @property
    def designation(self) -> str:
        if self.kind == "sparse":
            return f"sparse:{self.d}"
        if self.kind == "weighted":
            return f"weighted:{self.arity}:{self.decay.numerator}/{self.decay.denominator}"
        return "halfline"

    def kernel_params(self):
        """(kind code, branching parameter, decay float) for the kernels."""
        if self.kind == "weighted":
            return KIND_WEIGHTED, self.arity, float(self.decay)
        if self.kind == "halfline":
            return KIND_SPARSE, 1, 1.0
        return KIND_SPARSE, self.d, 1.0


def sparse_tree(d: int) -> TreeModel:
    return TreeModel("sparse", d=d)


def half_line() -> TreeModel:
    return TreeModel("halfline")


def weighted_kary(arity: int, decay) -> TreeModel:
    return TreeModel("weighted", arity=arity, decay=Fraction(decay))


def parse_model(text: str) -> TreeModel:
    """Parse a designation string: sparse:<d> | weighted:<arity>:<p/q> | halfline."""
    parts = text.strip().split(":")
    try:
        if parts[0] == "sparse" and len(parts) == 2:
            return sparse_tree(int(parts[1]))
        if parts[0] == "halfline" and len(parts) == 1:
            return half_line()
        if parts[0] == "weighted" and len(parts) == 3:
            return weighted_kary(int(parts[1]), Fraction(parts[2]))
    except (ValueError, ZeroDivisionError) as exc:
        raise DomainError(f"bad model designation {text!r}: {exc}") from None
    raise DomainError(f"bad model designation {text!r}")


def child_count(model: TreeModel, level: int) -> int:
    """Number of children of any vertex at the given level."""
    if level < 0:
        raise DomainError("level must be >= 0")
    if model.kind == "weighted":
        return model.arity
    if model.kind == "halfline":
        return 1
    if level == 0:
        return 1
    return model.d if level & (level - 1) == 0 else 1


def base_conductance(model: TreeModel, child_endpoint_level: int) -> Fraction:
    """Unreinforced conductance of the edge keyed by its deeper endpoint."""
    if child_endpoint_level < 1:
        raise DomainError("edges are keyed by their deeper endpoint (level >= 1)")
    if model.kind == "weighted":
        return model.decay**child_endpoint_level
    return Fraction(1)


def level_population(model: TreeModel, m: int) -> int:
    """Number of vertices at level 2**m of a sparse tree: d**m."""
    if model.kind == "weighted":
        raise DomainError("level_population applies to sparse trees")
    if m < 0:
        raise DomainError("m must be >= 0")
    d = 1 if model.kind == "halfline" else model.d
    out = d**m
    if out > _INT64_MAX:
        raise DomainError(f"level population d**m = {d}**{m} exceeds 64-bit range")
    return out


class NodeStore:
    """Append-only arena of materialized vertices.

    Parallel numpy arrays (parent id, level, first-child id or -1 while
    unexpanded, child count, parent-edge crossed flag) sized ``capacity``
    with ``size`` live entries.  A store belongs to a single walk run; the
    flat arrays are handed directly to the kernels.
    """

    __slots__ = ("parent", "level", "first_child", "nchild", "crossed", "size")

    def __init__(self, capacity: int = 1024):
        capacity = max(capacity, 8)
        self.parent = np.empty(capacity, np.int64)
        self.level = np.empty(capacity, np.int64)
        self.first_child = np.empty(capacity, np.int64)
        self.nchild = np.empty(capacity, np.int64)
        self.crossed = np.empty(capacity, np.uint8)
        self.parent[0] = -1
        self.level[0] = 0
        self.first_child[0] = -1
        self.nchild[0] = 0
        self.crossed[0] = 0
        self.size = 1

    @property
    def capacity(self) -> int:
        return self.parent.shape[0]

    def grow(self, need: int | None = None):
        new_cap = max(2 * self.capacity, need or 0)
        for name in ("parent", "level", "first_child", "nchild", "crossed"):
            old = getattr(self, name)
            arr = np.empty(new_cap, old.dtype)
            arr[: self.size] = old[: self.size]
            setattr(self, name, arr)

    def _check(self, v: int):
        if not 0 <= v < self.size:
            raise DomainError(f"vertex {v} not materialized (size {self.size})")

    def is_expanded(self, v: int) -> bool:
        self._check(v)
        return self.first_child[v] >= 0

    def children(self, v: int) -> list[int]:
        self._check(v)
        fc = int(self.first_child[v])
        if fc < 0:
            return []
        return list(range(fc, fc + int(self.nchild[v])))

    def expand(self, v: int, model: TreeModel) -> list[int]:
        """Materialize v's children (idempotent); returns their ids."""
        self._check(v)
        if self.first_child[v] >= 0:
            return self.children(v)
        nc = child_count(model, int(self.level[v]))
        if self.size + nc > self.capacity:
            self.grow(self.size + nc)
        base = self.size
        self.first_child[v] = base
        self.nchild[v] = nc
        self.parent[base : base + nc] = v
        self.level[base : base + nc] = self.level[v] + 1
        self.first_child[base : base + nc] = -1
        self.nchild[base : base + nc] = 0
        self.crossed[base : base + nc] = 0
        self.size += nc
        return list(range(base, base + nc))

    def ancestor_at_level(self, v: int, target_level: int) -> int:
        """The unique vertex at target_level on the root-to-v path."""
        self._check(v)
        lv = int(self.level[v])
        if target_level > lv or target_level < 0:
            raise DomainError(
                f"target level {target_level} above vertex level {lv}"
            )
        while lv > target_level:
            v = int(self.parent[v])
            lv -= 1
        return v
