"""Hot simulation loops, numba-compiled with a pure-Python fallback.

Backend selection
-----------------
When numba is importable and the environment variable ``ORRW_NUMBA`` is not
set to ``0``/``false``/``off``, every function below is compiled with
``@njit(cache=True, nogil=True)``.  Otherwise the identical function bodies
run as plain Python over the same numpy arrays.  Both paths produce
bit-identical results for the same seed (the benchmark script in
``benchmarks/`` measures the speed gap).  The original Python body of each
compiled kernel stays reachable through ``fn.py_func``, which the test suite
uses to compare paths inside one process.

Random streams
--------------
All randomness derives from a single 64-bit master seed via splitmix64:

* ``mix64(z)`` is the splitmix64 finalizer
  (``z ^= z>>30; z *= 0xBF58476D1CE4E5B9; z ^= z>>27; z *= 0x94D049BB133111EB;
  z ^= z>>31``, all mod 2^64).
* Stream ``i`` of seed ``s`` starts in state
  ``stream_state(s, i) = mix64(s + 0x9E3779B97F4A7C15 * (i + 1))``.
* Each draw advances ``state += 0x9E3779B97F4A7C15`` and outputs
  ``mix64(state)``; uniforms are ``(output >> 11) * 2**-53``.

Replica ``r`` of an experiment uses stream ``r``; nested structures (one
branching trajectory, one generation, one individual) derive sub-seeds by
re-applying ``stream_state``.  This scheme is the whole reproducibility
contract: runs are deterministic in (seed, parameters) and independent of
thread scheduling.

Integer caution: in the compiled path the state is a wrapping ``uint64``; in
the fallback path it is an arbitrary-precision Python int masked to 64 bits.
Wrappers must pass seeds through :func:`seed_arg` so each backend receives
the type it expects.
"""

import math
import os

import numpy as np

_flag = os.environ.get("ORRW_NUMBA", "1").strip().lower()
_enabled = _flag not in ("0", "false", "off", "no")

if _enabled:
    try:
        from numba import njit as _njit

        USING_NUMBA = True
    except ImportError:  # pragma: no cover - numba is a declared dependency
        USING_NUMBA = False
else:
    USING_NUMBA = False

if USING_NUMBA:

    def kernel(fn):
        return _njit(cache=True, nogil=True)(fn)

else:

    def kernel(fn):
        return fn


MASK64 = 0xFFFFFFFFFFFFFFFF
GOLDEN64 = 0x9E3779B97F4A7C15

# Walk stop statuses / kernel exit codes.
STATUS_HIT_VERTEX = 1
STATUS_HIT_LEVEL = 2
STATUS_RETURN_ROOT = 3
STATUS_BUDGET = 4
STATUS_GROW = 5

KIND_SPARSE = 0
KIND_WEIGHTED = 1


if USING_NUMBA:

    @kernel
    def _u64(x):
        return np.uint64(x)

else:

    def _u64(x):
        return int(x) & MASK64


def seed_arg(x):
    """Cast a seed/state for kernel entry (uint64 when compiled, int when not)."""
    if USING_NUMBA:
        return np.uint64(int(x) & MASK64)
    return int(x) & MASK64


@kernel
def mix64(z):
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 & MASK64
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & MASK64
    return z ^ (z >> 31)


@kernel
def stream_state(seed, index):
    """Initial state of stream `index` derived from a 64-bit seed."""
    return mix64((seed + GOLDEN64 * _u64(index + 1)) & MASK64)


@kernel
def _draw_u01(state):
    """Advance a stream one step; return (new state, uniform in [0, 1))."""
    state = (state + GOLDEN64) & MASK64
    return state, float(mix64(state) >> 11) * 2.0**-53


@kernel
def _child_count(kind, d, lvl):
    # Sparse rule: d children exactly at the power-of-two levels, else one.
    if kind == KIND_WEIGHTED:
        return d
    if lvl == 0:
        return 1
    if lvl & (lvl - 1) == 0:
        return d
    return 1


@kernel
def _expand_at(parent, level, first_child, nchild, crossed, size, kind, d, v):
    """Materialize v's children (caller guarantees capacity); new store size."""
    if first_child[v] >= 0:
        return size
    nc = _child_count(kind, d, level[v])
    first_child[v] = size
    nchild[v] = nc
    for i in range(nc):
        parent[size + i] = v
        level[size + i] = level[v] + 1
        first_child[size + i] = -1
        nchild[size + i] = 0
        crossed[size + i] = 0
    return size + nc


@kernel
def walk_steps(
    parent,
    level,
    first_child,
    nchild,
    crossed,
    size,
    cap,
    kind,
    d,
    decay,
    a,
    pos,
    steps,
    state,
    targets,
    hit_level,
    return_root,
    budget,
    root_visits,
    max_level,
):
    """Advance the reinforced walk until a stop condition fires.

    The store arrays form an append-only arena (parent id, level, first-child
    id or -1 while unexpanded, child count, parent-edge crossed flag).  Edge
    weights are taken relative to the current vertex's parent edge so the
    weighted-tree geometric conductances never underflow: the parent edge
    carries factor 1, each child edge factor ``decay`` (1 for sparse trees),
    times ``a`` on crossed edges.  Neighbor sampling scans the parent first,
    then children in id order; the last neighbor absorbs float residue.

    Stops (checked in this order after each step): current vertex in
    ``targets``; level equals ``hit_level``; back at the root when
    ``return_root``; total ``steps`` reached ``budget``.  Any stop slot is
    disabled with -1 (``return_root`` with 0).  Returns
    ``(status, pos, steps, state, size, root_visits, max_level)`` where
    status ``STATUS_GROW`` means the arena is full and no step was taken.
    """
    while True:
        if budget >= 0 and steps >= budget:
            return STATUS_BUDGET, pos, steps, state, size, root_visits, max_level
        if size + d + 1 > cap:
            return STATUS_GROW, pos, steps, state, size, root_visits, max_level
        size = _expand_at(
            parent, level, first_child, nchild, crossed, size, kind, d, pos
        )

        wpar = 0.0
        if pos != 0:
            wpar = a if crossed[pos] == 1 else 1.0
        total = wpar
        fc = first_child[pos]
        nc = nchild[pos]
        for i in range(nc):
            c = fc + i
            w = a if crossed[c] == 1 else 1.0
            if kind == KIND_WEIGHTED:
                w *= decay
            total += w

        state, u = _draw_u01(state)
        r = u * total
        nxt = pos
        if pos != 0 and r < wpar:
            crossed[pos] = 1
            nxt = parent[pos]
        else:
            r -= wpar
            for i in range(nc):
                c = fc + i
                w = a if crossed[c] == 1 else 1.0
                if kind == KIND_WEIGHTED:
                    w *= decay
                if r < w or i == nc - 1:
                    crossed[c] = 1
                    nxt = c
                    break
                r -= w

        pos = nxt
        steps += 1
        lv = level[pos]
        if lv > max_level:
            max_level = lv
        if pos == 0:
            root_visits += 1

        for i in range(targets.shape[0]):
            if pos == targets[i]:
                return STATUS_HIT_VERTEX, pos, steps, state, size, root_visits, max_level
        if hit_level >= 0 and lv == hit_level:
            return STATUS_HIT_LEVEL, pos, steps, state, size, root_visits, max_level
        if return_root == 1 and pos == 0:
            return STATUS_RETURN_ROOT, pos, steps, state, size, root_visits, max_level


@kernel
def halfline_escape_batch(m, M, a, n, seed, base_index):
    """Ruin walks on {0..M} from m with the prefix [0, m] already crossed.

    Replica r uses stream ``base_index + r``.  Returns the number of
    replicas that hit M before 0.  Left neighbor is sampled before right,
    matching the tree kernel's parent-first order.
    """
    wins = 0
    for r in range(n):
        state = stream_state(seed, _u64(base_index + r))
        pos = m
        cmax = m
        while 0 < pos < M:
            wl = a
            wr = a if pos < cmax else 1.0
            state, u = _draw_u01(state)
            if u * (wl + wr) < wl:
                pos -= 1
            else:
                pos += 1
                if pos > cmax:
                    cmax = pos
        if pos == M:
            wins += 1
    return wins


@kernel
def excursion_run(
    parent,
    level,
    first_child,
    nchild,
    crossed,
    a,
    start,
    absorb,
    boundary_level,
    upper_base,
    n_upper,
    state,
    step_cap,
    hit_row,
):
    """One reinforced excursion on a pre-built finite subtree.

    Starts at ``start``, absorbs on first visit to ``absorb``, reflects at
    ``boundary_level`` (vertices there expose only their parent edge).  The
    ``crossed`` array must already hold the initial edge state; it is mutated.
    Upper-boundary vertices occupy the contiguous id range
    ``[upper_base, upper_base + n_upper)``; ``hit_row`` (length ``n_upper``,
    zeroed by the caller) records which were visited.  Returns
    ``(z, steps, truncated, state)``.
    """
    pos = start
    steps = 0
    z = 0
    while pos != absorb:
        if steps >= step_cap:
            return z, steps, 1, state
        wpar = a if crossed[pos] == 1 else 1.0
        nc = 0 if level[pos] == boundary_level else nchild[pos]
        fc = first_child[pos]
        total = wpar
        for i in range(nc):
            c = fc + i
            total += a if crossed[c] == 1 else 1.0
        state, u = _draw_u01(state)
        r = u * total
        if r < wpar or nc == 0:
            crossed[pos] = 1
            pos = parent[pos]
        else:
            r -= wpar
            for i in range(nc):
                c = fc + i
                w = a if crossed[c] == 1 else 1.0
                if r < w or i == nc - 1:
                    crossed[c] = 1
                    pos = c
                    break
                r -= w
        steps += 1
        if level[pos] == boundary_level:
            idx = pos - upper_base
            if hit_row[idx] == 0:
                hit_row[idx] = 1
                z += 1
    return z, steps, 0, state


@kernel
def excursion_batch(
    parent,
    level,
    first_child,
    nchild,
    crossed,
    crossed_init,
    a,
    start,
    absorb,
    boundary_level,
    upper_base,
    n_upper,
    seed,
    base_index,
    n,
    step_cap,
    z_out,
    steps_out,
    trunc_out,
    hits_out,
):
    """Independent excursions; replica r uses stream ``base_index + r``."""
    size = crossed.shape[0]
    for r in range(n):
        for i in range(size):
            crossed[i] = crossed_init[i]
        for t in range(n_upper):
            hits_out[r, t] = 0
        state = stream_state(seed, _u64(base_index + r))
        z, steps, trunc, state = excursion_run(
            parent,
            level,
            first_child,
            nchild,
            crossed,
            a,
            start,
            absorb,
            boundary_level,
            upper_base,
            n_upper,
            state,
            step_cap,
            hits_out[r],
        )
        z_out[r] = z
        steps_out[r] = steps
        trunc_out[r] = trunc


@kernel
def junction_markov_batch(
    nbr_flat,
    cum_flat,
    off,
    leaf_idx,
    n_leaves,
    move_cap,
    seed,
    base_index,
    n,
    z_out,
    trunc_out,
    hits_out,
):
    """Excursion hit-sets sampled on the junction skeleton, a = 1 only.

    With no reinforcement the walk is Markov, so the sequence of distinct
    junctions visited is itself a Markov chain whose transition law out of a
    junction is the harmonic measure of its incident segments (cumulative
    rows in ``cum_flat``/``nbr_flat``, offsets in ``off``).  Junction 0 is
    the absorbing lower boundary, junction 1 the start; ``leaf_idx`` maps a
    junction to its upper-boundary slot or -1.
    """
    for r in range(n):
        state = stream_state(seed, _u64(base_index + r))
        for t in range(n_leaves):
            hits_out[r, t] = 0
        pos = 1
        moves = 0
        z = 0
        trunc = 0
        while pos != 0:
            if moves >= move_cap:
                trunc = 1
                break
            lo = off[pos]
            hi = off[pos + 1]
            state, u = _draw_u01(state)
            nxt = nbr_flat[hi - 1]
            for i in range(lo, hi):
                if u < cum_flat[i]:
                    nxt = nbr_flat[i]
                    break
            pos = nxt
            moves += 1
            li = leaf_idx[pos]
            if li >= 0 and hits_out[r, li] == 0:
                hits_out[r, li] = 1
                z += 1
        z_out[r] = z
        trunc_out[r] = trunc


@kernel
def _log_ruin_tail(m, a):
    """log of prod_{j>=m} style ruin factors: lgamma(m) - lgamma(m + a).

    ``exp(_log_ruin_tail(M, a) - _log_ruin_tail(m, a))`` equals
    ``prod_{j=m}^{M-1} j / (j + a)``.
    """
    return math.lgamma(m) - math.lgamma(m + a)


@kernel
def _advance_run_endpoint(g, N, a, u):
    """Endpoint of a frontier advance run that starts at frontier g.

    The run advances g -> g+1 -> ... with step probabilities j/(j+a) and
    stops on the first failure; ``P[F >= f] = prod_{j=g}^{f-1} j/(j+a)``.
    Inverts that tail at uniform ``u`` by bisection on the lgamma form.
    Returns N when the run crosses the whole segment.
    """
    lg = _log_ruin_tail(float(g), a)
    if u <= 0.0:
        return N
    target = lg + math.log(u)
    if _log_ruin_tail(float(N), a) >= target:
        return N
    lo = g
    hi = N - 1
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if _log_ruin_tail(float(mid), a) >= target:
            lo = mid
        else:
            hi = mid - 1
    return lo


@kernel
def junction_frontier_batch(
    up,
    seg_len,
    child_base,
    n_child,
    leaf_idx,
    n_leaves,
    a,
    event_cap,
    seed,
    base_index,
    n,
    z_out,
    trunc_out,
    hits_out,
    frontier,
):
    """Excursion hit-sets on the junction skeleton for any a > 0.

    State per segment (a segment is the unary path above each junction, of
    length ``seg_len``): the crossed prefix measured from its top end.  A
    sojourn at a junction is resolved event-by-event: each entry into an
    incident segment either changes nothing (the walk returns with the
    prefix untouched) or triggers an event - a frontier advance run, a full
    crossing, or a crossing of an already-crossed segment.  Per entry those
    fire with probability 1 (untouched segment), 1/(c+a) (prefix c), or
    1/len (fully crossed, either direction), so the next event is sampled
    directly from entry weights times event probabilities; advance-run
    endpoints come from :func:`_advance_run_endpoint`.  This reproduces the
    step-walk's hit-set law exactly (the no-op entries carry no state) at a
    cost polylogarithmic in segment length, which is what makes deep
    subtrees reachable at all.
    """
    J = up.shape[0]
    for r in range(n):
        state = stream_state(seed, _u64(base_index + r))
        for j in range(J):
            frontier[j] = 0
        frontier[1] = seg_len[1]  # lower spine is pre-crossed
        for t in range(n_leaves):
            hits_out[r, t] = 0
        pos = 1
        z = 0
        events = 0
        trunc = 0
        while pos != 0:
            if events >= event_cap:
                trunc = 1
                break
            nc = n_child[pos]
            if nc == 0:
                # Reflecting leaf: the only exit is up, taken with prob. 1.
                pos = up[pos]
            else:
                mass_up = a / float(seg_len[pos])
                total = mass_up
                for i in range(nc):
                    c = child_base[pos] + i
                    fc = frontier[c]
                    if fc == 0:
                        total += 1.0
                    elif fc < seg_len[c]:
                        total += a / (float(fc) + a)
                    else:
                        total += a / float(seg_len[c])
                state, u = _draw_u01(state)
                rpick = u * total
                events += 1
                if rpick < mass_up:
                    pos = up[pos]
                else:
                    rpick -= mass_up
                    pick = child_base[pos] + nc - 1
                    for i in range(nc):
                        c = child_base[pos] + i
                        fc = frontier[c]
                        if fc == 0:
                            w = 1.0
                        elif fc < seg_len[c]:
                            w = a / (float(fc) + a)
                        else:
                            w = a / float(seg_len[c])
                        if rpick < w or i == nc - 1:
                            pick = c
                            break
                        rpick -= w
                    fc = frontier[pick]
                    N = seg_len[pick]
                    if fc == N:
                        pos = pick
                    else:
                        g = fc + 1
                        state, u2 = _draw_u01(state)
                        F = _advance_run_endpoint(g, N, a, u2)
                        frontier[pick] = F
                        if F == N:
                            pos = pick
            li = leaf_idx[pos]
            if li >= 0 and hits_out[r, li] == 0:
                hits_out[r, li] = 1
                z += 1
        z_out[r] = z
        trunc_out[r] = trunc


@kernel
def empirical_offspring_batch(cdf, seed, base_index, n, z_out):
    """Draw n offspring counts from a histogram CDF, one stream each."""
    k = cdf.shape[0]
    for r in range(n):
        state = stream_state(seed, _u64(base_index + r))
        state, u = _draw_u01(state)
        v = k - 1
        for i in range(k):
            if u < cdf[i]:
                v = i
                break
        z_out[r] = v
