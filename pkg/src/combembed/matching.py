"""Bipartite matching with Hall-violator certificates.

``max_matching`` is Hopcroft-Karp. When the matching is not left-perfect the
outcome carries a violator: the left vertices reachable by alternating paths
from the lowest unmatched left vertex. Its neighbourhood is exactly the set
of right vertices reached, all matched back into the set, so
``|N(A)| = |A| - 1``.

``max_assignment`` solves the capacitated version (right side = blocks with
a number of identical slots each) without materialising the slots.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Hashable, Sequence

from .graph import Graph, iter_bits, mask_of

_INF = float("inf")


@dataclass(frozen=True)
class BipartiteInstance:
    left_size: int
    right_size: int
    adj: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        if len(self.adj) != self.left_size:
            raise ValueError("adjacency must list every left vertex")
        for row in self.adj:
            for y in row:
                if not 0 <= y < self.right_size:
                    raise ValueError(f"right index {y} out of range")

    @classmethod
    def from_lists(cls, left_size: int, right_size: int, adj) -> "BipartiteInstance":
        return cls(left_size, right_size, tuple(tuple(sorted(set(r))) for r in adj))

    def neighborhood(self, lefts) -> set[int]:
        out: set[int] = set()
        for x in lefts:
            out.update(self.adj[x])
        return out


@dataclass(frozen=True)
class MatchingOutcome:
    """Either a left-perfect matching or a maximum matching plus a Hall violator.

    ``pairs`` maps left to right. For deficient outcomes ``violator`` is a
    left-side set with ``|violator_nbrs| < |violator|``.
    """

    pairs: dict
    violator: frozenset | None = None
    violator_nbrs: frozenset | None = None

    @property
    def perfect(self) -> bool:
        return self.violator is None

    @property
    def size(self) -> int:
        return len(self.pairs)

    def to_dict(self) -> dict:
        d = {"perfect": self.perfect, "size": self.size}
        if not self.perfect:
            d["violator"] = sorted(self.violator)
            d["violator_nbrs"] = sorted(self.violator_nbrs)
        return d


def _hopcroft_karp(inst: BipartiteInstance) -> tuple[list[int], list[int]]:
    nl, nr = inst.left_size, inst.right_size
    adj = inst.adj
    match_l = [-1] * nl
    match_r = [-1] * nr
    while True:
        dist = [_INF] * nl
        q = deque()
        for x in range(nl):
            if match_l[x] < 0:
                dist[x] = 0
                q.append(x)
        found = False
        while q:
            x = q.popleft()
            for y in adj[x]:
                z = match_r[y]
                if z < 0:
                    found = True
                elif dist[z] == _INF:
                    dist[z] = dist[x] + 1
                    q.append(z)
        if not found:
            return match_l, match_r
        # Layered DFS, iterative to stay clear of the recursion limit.
        it = [0] * nl
        for root in range(nl):
            if match_l[root] >= 0:
                continue
            stack = [root]
            while stack:
                x = stack[-1]
                advanced = False
                row = adj[x]
                while it[x] < len(row):
                    y = row[it[x]]
                    it[x] += 1
                    z = match_r[y]
                    if z < 0:
                        # Augment along the stack.
                        for depth in range(len(stack) - 1, -1, -1):
                            u = stack[depth]
                            prev = match_l[u]
                            match_l[u] = y
                            match_r[y] = u
                            y = prev
                        stack.clear()
                        advanced = True
                        break
                    if dist[z] == dist[x] + 1:
                        stack.append(z)
                        advanced = True
                        break
                if not advanced:
                    dist[x] = _INF
                    stack.pop()


def _violator(inst: BipartiteInstance, match_l, match_r, start: int) -> tuple[set[int], set[int]]:
    seen_l = {start}
    seen_r: set[int] = set()
    q = deque([start])
    while q:
        x = q.popleft()
        for y in inst.adj[x]:
            if y in seen_r:
                continue
            seen_r.add(y)
            z = match_r[y]
            # z < 0 would be an augmenting path, impossible at a maximum matching.
            assert z >= 0
            if z not in seen_l:
                seen_l.add(z)
                q.append(z)
    return seen_l, seen_r


def max_matching(inst: BipartiteInstance) -> MatchingOutcome:
    match_l, match_r = _hopcroft_karp(inst)
    pairs = {x: y for x, y in enumerate(match_l) if y >= 0}
    if len(pairs) == inst.left_size:
        return MatchingOutcome(pairs)
    start = next(x for x, y in enumerate(match_l) if y < 0)
    a, na = _violator(inst, match_l, match_r, start)
    return MatchingOutcome(pairs, frozenset(a), frozenset(na))


def bipartite_max_matching(
    left: Sequence[Hashable], right: Sequence[Hashable], edges
) -> MatchingOutcome:
    """``max_matching`` over arbitrary labels; ``edges`` maps left label to right labels."""
    r_index = {v: j for j, v in enumerate(right)}
    adj = [[r_index[y] for y in edges.get(x, ()) if y in r_index] for x in left]
    out = max_matching(BipartiteInstance.from_lists(len(left), len(right), adj))
    pairs = {left[x]: right[y] for x, y in out.pairs.items()}
    if out.perfect:
        return MatchingOutcome(pairs)
    return MatchingOutcome(pairs, frozenset(left[x] for x in out.violator),
                           frozenset(right[y] for y in out.violator_nbrs))


def block_matchings(g: Graph, blocks: Sequence[Sequence[int]]) -> list[MatchingOutcome]:
    """Match every consecutive pair of blocks ``(M[i-1], M[i])`` in ``g``.

    Outcomes are labelled by vertex id: ``pairs`` maps ``M[i-1] -> M[i]``.
    """
    sizes = {len(b) for b in blocks}
    if len(sizes) > 1:
        raise ValueError("blocks must have equal sizes")
    out = []
    for i in range(1, len(blocks)):
        left = sorted(blocks[i - 1])
        right = sorted(blocks[i])
        r_index = {v: j for j, v in enumerate(right)}
        r_mask = mask_of(right)
        adj = tuple(tuple(r_index[y] for y in iter_bits(g.rows[x] & r_mask)) for x in left)
        res = max_matching(BipartiteInstance(len(left), len(right), adj))
        pairs = {left[x]: right[y] for x, y in res.pairs.items()}
        if res.perfect:
            out.append(MatchingOutcome(pairs))
        else:
            out.append(MatchingOutcome(pairs, frozenset(left[x] for x in res.violator),
                                       frozenset(right[y] for y in res.violator_nbrs)))
    return out


@dataclass(frozen=True)
class AssignmentOutcome:
    """Result of assigning items to capacitated bins.

    On failure ``violator`` is a set of items whose allowed bins have total
    capacity ``< len(violator)``; ``violator_bins`` lists those bins.
    """

    assignment: dict
    violator: frozenset | None = None
    violator_bins: frozenset | None = None
    augmentations: int = field(default=0, compare=False)

    @property
    def complete(self) -> bool:
        return self.violator is None


def max_assignment(
    items: Sequence[int], allowed: dict[int, Sequence[int]], capacity: dict[int, int]
) -> AssignmentOutcome:
    """Maximum assignment of ``items`` to bins respecting ``capacity``.

    ``allowed[x]`` lists the bins item ``x`` may go to. Equivalent to
    matching items to ``capacity[b]`` interchangeable slots per bin.
    Items are processed in the given order; each is placed greedily in its
    allowed bin with the most spare room, otherwise by an augmenting path
    found by BFS over bins.
    """
    load = {b: 0 for b in capacity}
    members: dict[int, list[int]] = {b: [] for b in capacity}
    where: dict[int, int] = {}
    first_fail: tuple[set, set] | None = None
    augmentations = 0

    def allowed_bins(x):
        return [b for b in allowed.get(x, ()) if capacity.get(b, 0) > 0]

    for x in items:
        opts = allowed_bins(x)
        spare = [b for b in opts if load[b] < capacity[b]]
        if spare:
            b = max(spare, key=lambda b: (capacity[b] - load[b], -b))
            where[x] = b
            members[b].append(x)
            load[b] += 1
            continue
        # BFS over bins. parent[b] = (previous bin, item moved from previous into b)
        parent: dict[int, tuple[int | None, int]] = {}
        q = deque()
        for b in opts:
            if b not in parent:
                parent[b] = (None, x)
                q.append(b)
        target = None
        while q and target is None:
            b = q.popleft()
            for y in members[b]:
                for b2 in allowed_bins(y):
                    if b2 in parent:
                        continue
                    parent[b2] = (b, y)
                    if load[b2] < capacity[b2]:
                        target = b2
                        break
                    q.append(b2)
                if target is not None:
                    break
        if target is None:
            if first_fail is None:
                bins = set(parent)
                group = {x}
                for b in bins:
                    group.update(members[b])
                first_fail = (group, bins)
            continue
        augmentations += 1
        b = target
        load[b] += 1
        while True:
            prev, y = parent[b]
            if prev is not None:
                members[prev].remove(y)
            members[b].append(y)
            where[y] = b
            if prev is None:
                break
            b = prev
    if first_fail is None:
        return AssignmentOutcome(where, augmentations=augmentations)
    group, bins = first_fail
    return AssignmentOutcome(where, frozenset(group), frozenset(bins), augmentations)
