"""The reinforced walk itself: step kernel wrappers, stops, excursions.

A walk's state is (tree model, node arena, position, reinforcement a, step
count, RNG stream).  Edge weights are base conductance times ``a`` once the
edge has been crossed; jump probabilities are the normalized incident
weights.  Everything here defers the inner loops to :mod:`orrw._kernels`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .errors import DomainError
from .tree import NodeStore, TreeModel, base_conductance

_STATUS_NAMES = {
    K.STATUS_HIT_VERTEX: "hit_vertex",
    K.STATUS_HIT_LEVEL: "hit_level",
    K.STATUS_RETURN_ROOT: "return_to_root",
    K.STATUS_BUDGET: "step_budget",
}


@dataclass(frozen=True)
class StoppingCondition:
    """First-of conjunction of stop triggers; unset slots never fire."""

    hit_vertices: tuple[int, ...] = ()
    hit_level: int | None = None
    return_to_root: bool = False
    step_budget: int | None = None

    def __post_init__(self):
        if (
            not self.hit_vertices
            and self.hit_level is None
            and not self.return_to_root
            and self.step_budget is None
        ):
            raise DomainError("stopping condition needs at least one trigger")
        if self.step_budget is not None and self.step_budget <= 0:
            raise DomainError("step budget must be positive")

    @staticmethod
    def first_of(*conds: "StoppingCondition") -> "StoppingCondition":
        verts: tuple[int, ...] = ()
        lvl = None
        root = False
        budget = None
        for c in conds:
            verts = verts + c.hit_vertices
            if c.hit_level is not None:
                if lvl is not None and lvl != c.hit_level:
                    raise DomainError("conflicting hit_level triggers")
                lvl = c.hit_level
            root = root or c.return_to_root
            if c.step_budget is not None:
                budget = c.step_budget if budget is None else min(budget, c.step_budget)
        return StoppingCondition(verts, lvl, root, budget)


def hit_vertex(*targets: int) -> StoppingCondition:
    return StoppingCondition(hit_vertices=tuple(targets))


def hit_level(level: int) -> StoppingCondition:
    return StoppingCondition(hit_level=level)


def return_to_root() -> StoppingCondition:
    return StoppingCondition(return_to_root=True)


def step_budget(max_steps: int) -> StoppingCondition:
    return StoppingCondition(step_budget=max_steps)


@dataclass
class WalkState:
    """One walk run: owns its arena and its RNG stream."""

    model: TreeModel
    a: float
    store: NodeStore = field(default_factory=NodeStore)
    position: int = 0
    steps: int = 0
    rng_state: int = 0
    root_visits: int = 0
    max_level: int = 0

    def __post_init__(self):
        if self.a <= 0:
            raise DomainError("reinforcement parameter a must be > 0")

    @classmethod
    def create(cls, model: TreeModel, a: float, seed: int, replica: int = 0) -> "WalkState":
        state = int(K.stream_state(K.seed_arg(seed), replica))
        return cls(model=model, a=a, rng_state=state)


def transition_weights(state: WalkState) -> list[tuple[int, float]]:
    """(neighbor id, absolute weight) pairs, parent first then children."""
    st = state.store
    pos = state.position
    st.expand(pos, state.model)
    out: list[tuple[int, float]] = []
    if pos != 0:
        w = float(base_conductance(state.model, int(st.level[pos])))
        out.append((int(st.parent[pos]), w * (state.a if st.crossed[pos] else 1.0)))
    for c in st.children(pos):
        w = float(base_conductance(state.model, int(st.level[c])))
        out.append((c, w * (state.a if st.crossed[c] else 1.0)))
    return out


def _run(state: WalkState, stop: StoppingCondition) -> str:
    kind, d, decay = state.model.kernel_params()
    targets = np.asarray(stop.hit_vertices, dtype=np.int64)
    lvl = -1 if stop.hit_level is None else stop.hit_level
    budget = -1 if stop.step_budget is None else state.steps + stop.step_budget
    while True:
        st = state.store
        out = K.walk_steps(
            st.parent,
            st.level,
            st.first_child,
            st.nchild,
            st.crossed,
            st.size,
            st.capacity,
            kind,
            d,
            decay,
            state.a,
            state.position,
            state.steps,
            K.seed_arg(state.rng_state),
            targets,
            lvl,
            1 if stop.return_to_root else 0,
            budget,
            state.root_visits,
            state.max_level,
        )
        status, state.position, state.steps, rng, st.size = out[0], int(out[1]), int(out[2]), out[3], int(out[4])
        state.rng_state = int(rng)
        state.root_visits = int(out[5])
        state.max_level = int(out[6])
        if status == K.STATUS_GROW:
            st.grow()
            continue
        return _STATUS_NAMES[status]


def step(state: WalkState) -> int:
    """Take one reinforced step; returns the new position."""
    before = state.steps
    _run(state, step_budget(1))
    assert state.steps == before + 1
    return state.position


def run_until(state: WalkState, stop: StoppingCondition) -> tuple[str, int, int]:
    """Iterate steps until the first trigger fires: (trigger, position, steps)."""
    trigger = _run(state, stop)
    return trigger, state.position, state.steps


@dataclass(frozen=True)
class SubtreeSpec:
    """The finite excursion tree: center, lower anchor, upper boundary."""

    store: NodeStore
    model: TreeModel
    center: int
    lower: int
    upper: tuple[int, ...]
    k: int
    n0: int
    boundary_level: int

    @property
    def spine_ids(self) -> list[int]:
        """Vertices strictly below lower up to and including center."""
        out = []
        v = self.center
        while v != self.lower:
            out.append(v)
            v = int(self.store.parent[v])
        return out


def build_subtree(
    store: NodeStore,
    x: int,
    k: int,
    n0: int,
    model: TreeModel,
    max_vertices: int = 50_000_000,
) -> SubtreeSpec:
    """Materialize the excursion tree around x (level 2^(k n0), sparse only).

    Expands every descendant of x down to level 2^((k+1) n0) in breadth-first
    order (so the boundary occupies a contiguous id block) and locates the
    anchor at level 2^(k n0 - 1).
    """
    if model.kind == "weighted":
        raise DomainError("excursion subtrees are defined on sparse trees")
    if k < 1 or n0 < 1:
        raise DomainError("need k >= 1 and n0 >= 1")
    center_level = 2 ** (k * n0)
    if int(store.level[x]) != center_level:
        raise DomainError(
            f"center must sit at level {center_level}, got {int(store.level[x])}"
        )
    boundary_level = 2 ** ((k + 1) * n0)
    d = 1 if model.kind == "halfline" else model.d
    est = 2 * d**n0 * (boundary_level - center_level)
    if est > max_vertices:
        raise DomainError(
            f"subtree would need ~{est} vertices (cap {max_vertices})"
        )
    lower = store.ancestor_at_level(x, 2 ** (k * n0 - 1))
    frontier = [x]
    for _ in range(center_level, boundary_level):
        nxt: list[int] = []
        for v in frontier:
            nxt.extend(store.expand(v, model))
        frontier = nxt
    upper = tuple(frontier)
    if len(upper) != d**n0:
        raise DomainError("boundary size mismatch; store was tampered with")
    if upper != tuple(range(upper[0], upper[0] + len(upper))):
        raise DomainError("boundary ids not contiguous; expansion order broken")
    return SubtreeSpec(store, model, x, lower, upper, k, n0, boundary_level)


def spine_crossed_template(spec: SubtreeSpec) -> np.ndarray:
    """Initial crossed flags: only the lower-anchor-to-center path is crossed."""
    tpl = np.zeros(spec.store.size, np.uint8)
    tpl[spec.spine_ids] = 1
    return tpl


@dataclass(frozen=True)
class ExcursionOutcome:
    z: int
    hit_set: np.ndarray  # uint8 per upper-boundary vertex, in id order
    steps: int
    truncated: bool


def excursion(
    spec: SubtreeSpec,
    a: float,
    rng_state: int,
    step_cap: int = 100_000_000,
) -> tuple[ExcursionOutcome, int]:
    """One excursion from the center: absorb at the anchor, reflect above.

    The anchor-to-center path starts crossed (not counted as steps); the
    boundary vertices expose only their parent edge.  Returns the outcome
    and the advanced RNG state.
    """
    if a <= 0:
        raise DomainError("a must be > 0")
    st = spec.store
    crossed = spine_crossed_template(spec)
    hit_row = np.zeros(len(spec.upper), np.uint8)
    z, steps, trunc, state = K.excursion_run(
        st.parent,
        st.level,
        st.first_child,
        st.nchild,
        crossed,
        a,
        spec.center,
        spec.lower,
        spec.boundary_level,
        spec.upper[0],
        len(spec.upper),
        K.seed_arg(rng_state),
        step_cap,
        hit_row,
    )
    return ExcursionOutcome(int(z), hit_row, int(steps), bool(trunc)), int(state)


def excursion_batch(
    spec: SubtreeSpec,
    a: float,
    seed: int,
    n: int,
    base_index: int = 0,
    step_cap: int = 100_000_000,
):
    """n independent excursions (replica r on stream base_index + r).

    Returns (z, steps, truncated, hits) arrays; hits has shape
    (n, boundary size).
    """
    st = spec.store
    tpl = spine_crossed_template(spec)
    work = np.empty_like(tpl)
    z_out = np.empty(n, np.int64)
    steps_out = np.empty(n, np.int64)
    trunc_out = np.empty(n, np.uint8)
    hits_out = np.empty((n, len(spec.upper)), np.uint8)
    K.excursion_batch(
        st.parent,
        st.level,
        st.first_child,
        st.nchild,
        work,
        tpl,
        a,
        spec.center,
        spec.lower,
        spec.boundary_level,
        spec.upper[0],
        len(spec.upper),
        K.seed_arg(seed),
        base_index,
        n,
        step_cap,
        z_out,
        steps_out,
        trunc_out,
        hits_out,
    )
    return z_out, steps_out, trunc_out, hits_out


def fresh_subtree(d: int, k: int, n0: int, max_vertices: int = 50_000_000) -> SubtreeSpec:
    """A standalone excursion tree on sparse:<d> with nothing else crossed.

    Grows a fresh arena along first children from the root to level
    2^(k n0), then materializes the excursion tree around that vertex.
    """
    from .tree import sparse_tree

    model = sparse_tree(d)
    store = NodeStore()
    v = 0
    for _ in range(2 ** (k * n0)):
        v = store.expand(v, model)[0]
    return build_subtree(store, v, k, n0, model, max_vertices)
