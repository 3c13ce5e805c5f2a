"""Split ``V`` into blocks ``M_0 .. M_{k-1}`` of size ``m`` with ``M_0`` = roots.

The procedure runs in three phases on two independent layers:

1. first step (layer 1): random initial sets ``W_1 .. W_{k-1}``, with the
   vertices that see fewer than ``T`` roots (``Z``) kept out of ``W_1``;
   then the barred sets ``B_i`` and deficient sets ``X_ij``;
2. repair (layer 2): every deficient ``x in X_ij`` recruits ``T`` fresh
   layer-2 neighbours into ``M_j``;
3. fill-in: the remaining vertices are assigned to blocks avoiding ``B_i``,
   via a capacitated matching.

Afterwards every ``x in M_i`` has at least ``T`` neighbours in ``M_j`` for each
adjacent block index ``j``, counting layer-1 edges and the repair edges.

Vertex sets are bitmask ints throughout (see :mod:`combembed.graph`).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .graph import Graph, iter_bits, mask_of
from .matching import max_assignment
from .params import ParamSet


class Phase(str, enum.Enum):
    INITIALIZED = "initialized"
    FIRST_STEP_DONE = "first_step_done"
    REPAIRED = "repaired"
    FILLED = "filled"


class PartitionFailure(Exception):
    """A legitimate unsuccessful run of the procedure (not a bug)."""

    outcome = "partition_failure"

    def __init__(self, msg: str, state: "PartitionState"):
        super().__init__(msg)
        self.state = state

    def to_dict(self) -> dict:
        return {"kind": self.outcome, "message": str(self)}


class StuckInRepair(PartitionFailure):
    outcome = "stuck_in_repair"

    def __init__(self, x: int, i: int, j: int, available: int, state):
        super().__init__(f"vertex {x} in X[{i},{j}] has only {available} available "
                         f"layer-2 neighbours", state)
        self.x, self.i, self.j, self.available = x, i, j, available

    def to_dict(self) -> dict:
        return {**super().to_dict(), "x": self.x, "i": self.i, "j": self.j,
                "available": self.available}


class NegativeDeficit(PartitionFailure):
    outcome = "fill_infeasible"

    def __init__(self, block: int, size: int, state):
        super().__init__(f"block {block} already holds {size} > m vertices after repair", state)
        self.block, self.size = block, size

    def to_dict(self) -> dict:
        return {**super().to_dict(), "reason": "negative_deficit", "block": self.block,
                "size": self.size}


class FillInfeasible(PartitionFailure):
    outcome = "fill_infeasible"

    def __init__(self, violator, blocks, state):
        super().__init__(f"{len(violator)} unassigned vertices fit only in blocks "
                         f"{sorted(blocks)} with fewer free slots", state)
        self.violator = frozenset(violator)
        self.blocks = frozenset(blocks)

    def to_dict(self) -> dict:
        return {**super().to_dict(), "reason": "hall_violator",
                "violator": sorted(self.violator), "violator_blocks": sorted(self.blocks)}


def neighbor_blocks(i: int, k: int) -> tuple[int, ...]:
    """L(i) = {i-1, i+1} ∩ {0..k-1}."""
    return tuple(j for j in (i - 1, i + 1) if 0 <= j < k)


@dataclass
class PartitionState:
    n: int
    k: int
    m: int
    T: int
    roots: tuple[int, ...]
    W: list[int]
    Z: int = 0
    B: list[int] = field(default_factory=list)  # B[0] unused
    X: dict[tuple[int, int], int] = field(default_factory=dict)
    block: list[int] = field(default_factory=list)
    repair_edges: list[tuple[int, int]] = field(default_factory=list)
    phase: Phase = Phase.INITIALIZED
    barred_done: bool = False
    deficient_done: bool = False
    max_b_multiplicity: int = 0
    min_available: int | None = None
    min_available_nbrs: int | None = None
    fill_augmentations: int = 0

    @property
    def R(self) -> int:
        return ((1 << self.n) - 1) & ~mask_of(self.roots)

    @property
    def W_all(self) -> int:
        out = 0
        for w in self.W:
            out |= w
        return out

    def members(self, i: int) -> list[int]:
        return [v for v, b in enumerate(self.block) if b == i]

    def blocks(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in range(self.k)]
        for v, b in enumerate(self.block):
            if b >= 0:
                out[b].append(v)
        # Roots stay in their given order so block 0 lines up with the spine.
        out[0] = list(self.roots)
        return out

    def block_masks(self) -> list[int]:
        out = [0] * self.k
        for v, b in enumerate(self.block):
            if b >= 0:
                out[b] |= 1 << v
        return out

    def unassigned_mask(self) -> int:
        return mask_of(v for v, b in enumerate(self.block) if b < 0)

    def snapshot(self) -> dict:
        sizes = [0] * self.k
        for b in self.block:
            if b >= 0:
                sizes[b] += 1
        return {
            "phase": self.phase.value,
            "block_sizes": sizes,
            "W_sizes": [w.bit_count() for w in self.W],
            "Z_size": self.Z.bit_count(),
            "B_sizes": [b.bit_count() for b in self.B[1:]],
            "X_sizes": {f"{i},{j}": x.bit_count() for (i, j), x in sorted(self.X.items())},
            "max_B_multiplicity": self.max_b_multiplicity,
            "repair_edges": len(self.repair_edges),
            "min_available": self.min_available,
            "min_available_nbrs": self.min_available_nbrs,
            "fill_augmentations": self.fill_augmentations,
        }


def _check_roots(n: int, roots, m: int) -> tuple[int, ...]:
    roots = tuple(int(r) for r in roots)
    if len(roots) != m or len(set(roots)) != m:
        raise ValueError(f"need {m} distinct roots, got {len(roots)}")
    if any(not 0 <= r < n for r in roots):
        raise ValueError("root out of range")
    return roots


def first_step(g1: Graph, roots, params: ParamSet, seed: int) -> PartitionState:
    """Compute ``Z`` and sample ``W_1 .. W_{k-1}``.

    Each ``x in R`` independently joins each allowed ``W_i`` with probability
    ``alpha/k``: all of ``W_1..W_{k-1}`` if ``x`` is not in ``Z``, only
    ``W_2..W_{k-1}`` if it is. With ``k == 1`` the roots are all of ``V`` and
    the state is returned already filled.
    """
    n, k, m, T = g1.n, params.k, params.m, params.T
    if params.n != n:
        raise ValueError("graph and parameters disagree on n")
    roots = _check_roots(n, roots, m)
    w0 = mask_of(roots)
    state = PartitionState(n=n, k=k, m=m, T=T, roots=roots, W=[w0] + [0] * (k - 1),
                           B=[0] * k, block=[-1] * n)
    for r in roots:
        state.block[r] = 0
    if k == 1:
        state.phase = Phase.FILLED
        state.barred_done = state.deficient_done = True
        return state

    rows = g1.rows
    z = 0
    for x in iter_bits(state.R):
        if (rows[x] & w0).bit_count() < T:
            z |= 1 << x
    state.Z = z

    alpha = params.alpha
    scale = k / alpha
    u = np.random.default_rng(seed).random(n)
    in_z = np.zeros(n, dtype=bool)
    for x in iter_bits(z):
        in_z[x] = True
    # Index within the allowed range; values past the range mean "left out".
    slot = np.floor(u * scale).astype(np.int64)
    target = np.where(in_z, slot + 2, slot + 1)
    limit_free = alpha * (k - 1) / k
    limit_z = alpha * (k - 2) / k
    placed = np.where(in_z, u < limit_z, u < limit_free)
    target = np.minimum(target, k - 1)
    W = state.W
    for x in iter_bits(state.R):
        if placed[x]:
            i = int(target[x])
            W[i] |= 1 << x
            state.block[x] = i
    state.phase = Phase.FIRST_STEP_DONE
    return state


def _low_sets(g1: Graph, state: PartitionState, candidates: int) -> list[int]:
    """For each j, the candidates with fewer than T layer-1 neighbours in W_j."""
    rows, T = g1.rows, state.T
    low = [0] * state.k
    for x in iter_bits(candidates):
        row = rows[x]
        for j, wj in enumerate(state.W):
            if (row & wj).bit_count() < T:
                low[j] |= 1 << x
    return low


def compute_barred(g1: Graph, state: PartitionState, params: ParamSet | None = None) -> PartitionState:
    """``B_i = {x in R \\ W : some j in L(i) has |N1(x) ∩ W_j| < T}`` for i in 1..k-1."""
    if state.phase != Phase.FIRST_STEP_DONE:
        raise ValueError(f"compute_barred needs phase first_step_done, not {state.phase.value}")
    k = state.k
    outside = state.R & ~state.W_all
    low = _low_sets(g1, state, outside)
    B = [0] * k
    for i in range(1, k):
        for j in neighbor_blocks(i, k):
            B[i] |= low[j]
    state.B = B
    mult = 0
    for x in iter_bits(outside):
        mult = max(mult, sum((B[i] >> x) & 1 for i in range(1, k)))
    state.max_b_multiplicity = mult
    state.barred_done = True
    return state


def compute_deficient(g1: Graph, state: PartitionState, params: ParamSet | None = None) -> PartitionState:
    """``X_ij = {x in W_i : |N1(x) ∩ W_j| < T}`` for i in 0..k-1, j in L(i)."""
    if state.phase != Phase.FIRST_STEP_DONE:
        raise ValueError(f"compute_deficient needs phase first_step_done, not {state.phase.value}")
    rows, T, W, k = g1.rows, state.T, state.W, state.k
    X = {}
    for i in range(k):
        for j in neighbor_blocks(i, k):
            xs = 0
            for x in iter_bits(W[i]):
                if (rows[x] & W[j]).bit_count() < T:
                    xs |= 1 << x
            X[(i, j)] = xs
    if k > 1 and X[(1, 0)]:
        raise AssertionError("W_1 meets Z; first step is broken")
    state.X = X
    state.deficient_done = True
    return state


def repair(g2: Graph, state: PartitionState, params: ParamSet | None = None) -> PartitionState:
    """Give every deficient vertex T fresh layer-2 neighbours in the block it lacks.

    Deficient sets are handled in lexicographic ``(i, j)`` order, vertices in
    ascending id, and the lowest-id available neighbours are taken. A vertex
    is available for block ``j`` if it is unassigned and not in ``B_j``.

    Raises:
        StuckInRepair: some deficient vertex has fewer than T available
            layer-2 neighbours.
    """
    if state.k == 1:
        state.phase = Phase.REPAIRED
        return state
    if not (state.barred_done and state.deficient_done):
        raise ValueError("repair needs barred and deficient sets")
    T = state.T
    rows = g2.rows
    free = state.unassigned_mask()
    for (i, j), xs in sorted(state.X.items()):
        barred = state.B[j] if j > 0 else 0
        for x in iter_bits(xs):
            avail = free & ~barred
            cand = rows[x] & avail
            count = cand.bit_count()
            g_avail = avail.bit_count()
            if state.min_available is None or g_avail < state.min_available:
                state.min_available = g_avail
            if state.min_available_nbrs is None or count < state.min_available_nbrs:
                state.min_available_nbrs = count
            if count < T:
                raise StuckInRepair(x, i, j, count, state)
            for _ in range(T):
                low = cand & -cand
                cand ^= low
                free ^= low
                zv = low.bit_length() - 1
                state.block[zv] = j
                state.repair_edges.append((x, zv))
    state.phase = Phase.REPAIRED
    return state


def fill_in(state: PartitionState, params: ParamSet | None = None, seed: int | None = None) -> PartitionState:
    """Assign the leftover vertices so every block has m vertices and avoids its barred set.

    Unassigned vertices are processed in ascending id, or in a seeded
    random order when ``seed`` is given.

    Raises:
        NegativeDeficit: repair already pushed some block past m.
        FillInfeasible: no valid completion exists; carries a Hall violator.
    """
    if state.phase != Phase.REPAIRED:
        raise ValueError(f"fill_in needs phase repaired, not {state.phase.value}")
    k, m = state.k, state.m
    if k == 1:
        state.phase = Phase.FILLED
        return state
    sizes = [0] * k
    for b in state.block:
        if b >= 0:
            sizes[b] += 1
    capacity = {}
    for i in range(1, k):
        r = m - sizes[i]
        if r < 0:
            raise NegativeDeficit(i, sizes[i], state)
        capacity[i] = r
    items = [v for v, b in enumerate(state.block) if b < 0]
    if seed is not None:
        items = list(np.random.default_rng(seed).permutation(items))
        items = [int(v) for v in items]
    B = state.B
    allowed = {x: [i for i in range(1, k) if not (B[i] >> x) & 1] for x in items}
    res = max_assignment(items, allowed, capacity)
    state.fill_augmentations = res.augmentations
    if not res.complete:
        raise FillInfeasible(res.violator, res.violator_bins, state)
    for x, i in res.assignment.items():
        state.block[x] = i
    state.phase = Phase.FILLED
    return state


def run_partition(g1: Graph, g2: Graph, roots, params: ParamSet, seed: int) -> PartitionState:
    state = first_step(g1, roots, params, seed)
    if state.phase == Phase.FILLED:
        return state
    compute_barred(g1, state, params)
    compute_deficient(g1, state, params)
    repair(g2, state, params)
    return fill_in(state, params)


def witness_graph(g1: Graph, state: PartitionState) -> Graph:
    """Layer 1 plus the repair star forest."""
    return g1.union(Graph.from_edges(g1.n, state.repair_edges))


def filled_violations(g1: Graph, state: PartitionState) -> list[str]:
    """Every way a filled state breaks its postconditions (empty list if none).

    Checks that blocks partition ``V`` into sizes ``m``, ``M_0`` is the roots,
    ``M_i ∩ B_i = ∅``, the repair edges form a star forest, and every
    ``x in M_i`` has ``>= T`` neighbours in ``M_j`` (``j in L(i)``) within
    layer 1 plus repair edges. Vertices that were never deficient for
    ``(i, j)`` must additionally see ``T`` layer-1 neighbours in ``W_j``.
    """
    out: list[str] = []
    n, k, m, T = state.n, state.k, state.m, state.T
    if any(b < 0 or b >= k for b in state.block):
        out.append("some vertex is unassigned")
        return out
    masks = state.block_masks()
    for i, mk in enumerate(masks):
        if mk.bit_count() != m:
            out.append(f"|M_{i}| = {mk.bit_count()} != {m}")
    if masks[0] != mask_of(state.roots):
        out.append("M_0 differs from the roots")
    for i in range(1, k):
        if masks[i] & state.B[i]:
            out.append(f"M_{i} meets B_{i}")
    centers = {x for x, _ in state.repair_edges}
    leaves = [z for _, z in state.repair_edges]
    if len(set(leaves)) != len(leaves) or centers & set(leaves):
        out.append("repair edges are not a star forest")
    wg = witness_graph(g1, state)
    for i in range(k):
        for j in neighbor_blocks(i, k):
            deficient = state.X.get((i, j), 0)
            for x in iter_bits(masks[i]):
                if (wg.rows[x] & masks[j]).bit_count() < T:
                    out.append(f"vertex {x} in M_{i} sees < T vertices of M_{j}")
                if not (deficient >> x) & 1 and (g1.rows[x] & state.W[j]).bit_count() < T:
                    out.append(f"vertex {x} in M_{i} sees < T layer-1 vertices of W_{j}")
    return out
