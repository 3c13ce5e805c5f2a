"""Rooted path systems and combs: assembly, verification, spine search, brute force.

A comb with ``m`` teeth of ``k`` vertices is a spine path ``v_1 .. v_m``
with a ``k``-vertex path starting at every ``v_r`` (``v_r`` is the first
vertex of its own tooth).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .graph import Graph, iter_bits
from .matching import MatchingOutcome

BRUTE_FORCE_MAX_N = 12


@dataclass(frozen=True)
class CombEmbedding:
    paths: tuple[tuple[int, ...], ...]
    roots: tuple[int, ...]
    spine_edges: tuple[tuple[int, int], ...] | None = None

    def to_dict(self) -> dict:
        d = {"roots": list(self.roots), "paths": [list(p) for p in self.paths]}
        if self.spine_edges is not None:
            d["spine_edges"] = [list(e) for e in self.spine_edges]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "CombEmbedding":
        spine = d.get("spine_edges")
        return cls(
            paths=tuple(tuple(int(v) for v in p) for p in d["paths"]),
            roots=tuple(int(r) for r in d["roots"]),
            spine_edges=None if spine is None else tuple((int(a), int(b)) for a, b in spine),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def with_spine(self) -> "CombEmbedding":
        edges = tuple(zip(self.roots, self.roots[1:]))
        return CombEmbedding(self.paths, self.roots, edges)

    def to_text(self) -> str:
        lines = []
        for r, path in enumerate(self.paths):
            lines.append(f"{r:>4}: " + " - ".join(str(v) for v in path))
            if self.spine_edges is not None and r + 1 < len(self.paths):
                lines.append("   |")
        return "\n".join(lines)


def assemble_paths(blocks: Sequence[Sequence[int]], matchings: Sequence[MatchingOutcome]) -> CombEmbedding:
    """Follow each root through the ``k - 1`` block matchings.

    ``blocks[0]`` gives the roots in spine order; ``matchings[i-1]`` must be a
    perfect matching from ``blocks[i-1]`` to ``blocks[i]``.
    """
    if len(matchings) != len(blocks) - 1:
        raise ValueError("need one matching per consecutive pair of blocks")
    for i, mo in enumerate(matchings, start=1):
        if not mo.perfect:
            raise ValueError(f"matching between blocks {i - 1} and {i} is not perfect")
    roots = tuple(blocks[0])
    paths = []
    for root in roots:
        path = [root]
        for mo in matchings:
            path.append(mo.pairs[path[-1]])
        paths.append(tuple(path))
    return CombEmbedding(tuple(paths), roots)


@dataclass(frozen=True)
class Verdict:
    ok: bool
    reason: str = ""

    def __bool__(self) -> bool:
        return self.ok


def verify_embedding(g: Graph, emb: CombEmbedding, expected_roots: Sequence[int], k: int,
                     require_spine: bool = False) -> Verdict:
    """Accept iff ``emb`` is a valid rooted path system (or comb) in ``g``.

    Rejection carries the first failed check. Never raises on malformed
    embeddings.
    """
    expected = tuple(expected_roots)
    if tuple(emb.roots) != expected:
        return Verdict(False, "roots differ from the expected roots")
    if len(emb.paths) != len(expected):
        return Verdict(False, f"expected {len(expected)} paths, got {len(emb.paths)}")
    seen: set[int] = set()
    for r, path in enumerate(emb.paths):
        if len(path) != k:
            return Verdict(False, f"path {r} has {len(path)} vertices, expected {k}")
        if path[0] != expected[r]:
            return Verdict(False, f"path {r} does not begin at root {expected[r]}")
        for v in path:
            if not (isinstance(v, int) and 0 <= v < g.n):
                return Verdict(False, f"vertex {v!r} out of range")
            if v in seen:
                return Verdict(False, f"vertex {v} used twice (paths not disjoint)")
            seen.add(v)
        for a, b in zip(path, path[1:]):
            if not g.has_edge(a, b):
                return Verdict(False, f"path {r}: {a} and {b} are not adjacent")
    if len(expected) * k == g.n and len(seen) != g.n:
        return Verdict(False, "paths do not cover every vertex")
    if emb.spine_edges is None:
        if require_spine:
            return Verdict(False, "spine edges missing")
    else:
        want = list(zip(expected, expected[1:]))
        if [tuple(e) for e in emb.spine_edges] != want:
            return Verdict(False, "spine edges do not join consecutive roots in order")
        for a, b in want:
            if not g.has_edge(a, b):
                return Verdict(False, f"spine: roots {a} and {b} are not adjacent")
    return Verdict(True)


def is_simple_path(g: Graph, path: Sequence[int]) -> bool:
    return (len(set(path)) == len(path) and all(0 <= v < g.n for v in path)
            and all(g.has_edge(a, b) for a, b in zip(path, path[1:])))


def find_spine(g: Graph, m: int, seed: int = 0, budget: int | None = None) -> list[int] | None:
    """Look for a simple path on ``m`` vertices; ``None`` if none found.

    Extends the path at its end by a random unused neighbour; when the end
    is stuck, performs a Posa rotation (join the end to a random earlier
    path vertex and reverse the segment after it). Restarts from a fresh
    vertex when both ends are stuck or after ``2 m`` rotations without
    growth. All restarts share one budget of ``budget`` rotations (default
    ``50 n``).
    """
    n = g.n
    if m > n:
        raise ValueError("spine longer than the graph")
    if m <= 0:
        return []
    if budget is None:
        budget = 50 * n
    rng = np.random.default_rng(seed)
    rows = g.rows
    if m == 1:
        return [0]
    order = [int(v) for v in rng.permutation(n)]
    spent = 0
    for start in order:
        if spent > budget:
            break
        if not rows[start]:
            spent += 1
            continue
        path = [start]
        used = 1 << start
        flipped = False
        stall = 0
        while len(path) < m and spent <= budget and stall <= 2 * m:
            end = path[-1]
            fresh = rows[end] & ~used
            if fresh:
                nbrs = list(iter_bits(fresh))
                v = nbrs[int(rng.integers(len(nbrs)))]
                path.append(v)
                used |= 1 << v
                flipped = False
                stall = 0
                continue
            spent += 1
            stall += 1
            prev = path[-2] if len(path) > 1 else -1
            pivots = [i for i, v in enumerate(path[:-1]) if rows[end] >> v & 1 and v != prev]
            if pivots:
                i = pivots[int(rng.integers(len(pivots)))]
                path[i + 1:] = path[:i:-1]
                flipped = False
            elif flipped:
                break
            else:
                path.reverse()
                flipped = True
        if len(path) == m:
            return path
    return None


def brute_force_contains_comb(g: Graph, k: int) -> bool:
    """Exact containment test for a comb with ``n/k`` teeth of ``k`` vertices.

    Exhaustive backtracking; refuses graphs with more than 12 vertices.
    """
    n = g.n
    if n > BRUTE_FORCE_MAX_N:
        raise ValueError(f"brute force is limited to n <= {BRUTE_FORCE_MAX_N}")
    if k < 1 or n % k:
        raise ValueError("k must divide n")
    if n == 0:
        return True
    m = n // k
    rows = g.rows
    full = (1 << n) - 1

    def tooth_fits(spine: tuple[int, ...]) -> bool:
        @lru_cache(maxsize=None)
        def hang(idx: int, used: int) -> bool:
            if idx == m:
                return used == full
            return extend(spine[idx], 1, idx, used)

        def extend(end: int, length: int, idx: int, used: int) -> bool:
            if length == k:
                return hang(idx + 1, used)
            for v in iter_bits(rows[end] & ~used):
                if extend(v, length + 1, idx, used | 1 << v):
                    return True
            return False

        spine_mask = 0
        for v in spine:
            spine_mask |= 1 << v
        return hang(0, spine_mask)

    def spines(path: list[int], used: int):
        if len(path) == m:
            yield tuple(path)
            return
        for v in iter_bits(rows[path[-1]] & ~used):
            path.append(v)
            yield from spines(path, used | 1 << v)
            path.pop()

    for s in range(n):
        for spine in spines([s], 1 << s):
            # A spine and its reverse give the same comb.
            if m > 1 and spine[0] > spine[-1]:
                continue
            if tooth_fits(spine):
                return True
    return False
