"""Undirected graphs stored as per-vertex bitmask rows, plus seeded G(n, p) sampling.

Each row is a Python ``int`` whose bit ``v`` is set iff ``v`` is a neighbour.
Intersection counts are then a single ``&`` followed by ``int.bit_count``,
which is what the partition procedure spends most of its time doing.

Vertices are ``0 .. n-1``.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

# Above this edge probability a per-pair Bernoulli draw is cheaper than
# geometric skipping.
DENSE_CUTOFF = 0.1


def mask_of(vertices: Iterable[int]) -> int:
    m = 0
    for v in vertices:
        m |= 1 << v
    return m


def iter_bits(mask: int) -> Iterator[int]:
    """Yield the set bit positions of ``mask`` in ascending order."""
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def as_mask(s) -> int:
    return s if isinstance(s, int) else mask_of(s)


class Graph:
    """Immutable simple undirected graph on ``range(n)``."""

    __slots__ = ("n", "rows")

    def __init__(self, n: int, rows: Sequence[int] | None = None):
        if n < 0:
            raise ValueError("n must be nonnegative")
        self.n = n
        self.rows: tuple[int, ...] = tuple(rows) if rows is not None else (0,) * n
        if len(self.rows) != n:
            raise ValueError("need exactly one adjacency row per vertex")

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]]) -> "Graph":
        rows = [0] * n
        for u, v in edges:
            if u == v:
                raise ValueError(f"self-loop at {u}")
            if not (0 <= u < n and 0 <= v < n):
                raise ValueError(f"edge ({u}, {v}) out of range for n={n}")
            rows[u] |= 1 << v
            rows[v] |= 1 << u
        return cls(n, rows)

    @classmethod
    def complete(cls, n: int) -> "Graph":
        full = (1 << n) - 1
        return cls(n, [full ^ (1 << v) for v in range(n)])

    def has_edge(self, u: int, v: int) -> bool:
        return bool(self.rows[u] >> v & 1)

    def degree(self, x: int) -> int:
        return self.rows[x].bit_count()

    def neighbors(self, x: int) -> list[int]:
        return list(iter_bits(self.rows[x]))

    def count_nbrs_in(self, x: int, s) -> int:
        """|N(x) ∩ s| for a vertex set ``s`` given as a bitmask or iterable."""
        return (self.rows[x] & as_mask(s)).bit_count()

    def edges(self) -> Iterator[tuple[int, int]]:
        for u, row in enumerate(self.rows):
            yield from ((u, v) for v in iter_bits(row >> (u + 1) << (u + 1)))

    def edge_count(self) -> int:
        return sum(r.bit_count() for r in self.rows) // 2

    def union(self, *others: "Graph") -> "Graph":
        rows = list(self.rows)
        for g in others:
            if g.n != self.n:
                raise ValueError("graphs on different vertex sets")
            rows = [a | b for a, b in zip(rows, g.rows)]
        return Graph(self.n, rows)

    def __eq__(self, other) -> bool:
        return isinstance(other, Graph) and self.n == other.n and self.rows == other.rows

    def __hash__(self) -> int:
        return hash((self.n, self.rows))

    def __repr__(self) -> str:
        return f"Graph(n={self.n}, edges={self.edge_count()})"


def count_nbrs_in(g: Graph, x: int, s) -> int:
    return g.count_nbrs_in(x, s)


def edges_between(g: Graph, a: Iterable[int], b: Iterable[int]) -> list[tuple[int, int]]:
    """Edges ``(x, y)`` of ``g`` with ``x`` in ``a`` and ``y`` in ``b``.

    ``a`` and ``b`` must be disjoint.
    """
    a_list = sorted(set(a))
    b_mask = mask_of(b)
    if mask_of(a_list) & b_mask:
        raise ValueError("edges_between needs disjoint vertex sets")
    return [(x, y) for x in a_list for y in iter_bits(g.rows[x] & b_mask)]


@dataclass(frozen=True)
class LayeredGraph:
    """Three independent layers on a common vertex set, with their union."""

    layers: tuple[Graph, Graph, Graph]
    union: Graph

    @property
    def n(self) -> int:
        return self.union.n

    @classmethod
    def from_layers(cls, layers: Sequence[Graph]) -> "LayeredGraph":
        g1, g2, g3 = layers
        return cls((g1, g2, g3), g1.union(g2, g3))


def _rows_from_pairs(n: int, us: np.ndarray, vs: np.ndarray) -> list[int]:
    nbytes = (n + 7) // 8
    packed = np.zeros((n, nbytes), dtype=np.uint8)
    if len(us):
        np.bitwise_or.at(packed, (us, vs >> 3), (1 << (vs & 7)).astype(np.uint8))
        np.bitwise_or.at(packed, (vs, us >> 3), (1 << (us & 7)).astype(np.uint8))
    return [int.from_bytes(packed[u].tobytes(), "little") for u in range(n)]


def _sample_pairs(n: int, p: float, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    us: list[np.ndarray] = []
    vs: list[np.ndarray] = []
    if p <= 0.0 or n < 2:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty
    for u in range(n - 1):
        length = n - 1 - u
        if p > DENSE_CUTOFF:
            offs = np.flatnonzero(rng.random(length) < p)
        else:
            # Row-wise geometric skipping: gaps between successive edges
            # of the row are Geometric(p).
            mean = length * p
            batch = int(mean + 5.0 * np.sqrt(mean) + 8)
            pos = np.cumsum(rng.geometric(p, size=batch)) - 1
            while pos[-1] < length:
                more = np.cumsum(rng.geometric(p, size=batch)) + pos[-1]
                pos = np.concatenate([pos, more])
            offs = pos[pos < length]
        if len(offs):
            us.append(np.full(len(offs), u, dtype=np.int64))
            vs.append(offs.astype(np.int64) + u + 1)
    if not us:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty
    return np.concatenate(us), np.concatenate(vs)


def _gnp(n: int, p: float, entropy) -> Graph:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"edge probability must lie in [0, 1], got {p}")
    if n < 1:
        raise ValueError("n must be positive")
    rng = np.random.default_rng(np.random.SeedSequence(entropy))
    us, vs = _sample_pairs(n, p, rng)
    return Graph(n, _rows_from_pairs(n, us, vs))


def sample_gnp(n: int, p: float, seed: int) -> Graph:
    """Sample G(n, p); the same ``(n, p, seed)`` always yields the same graph."""
    return _gnp(n, p, seed)


def sample_layers(n: int, p: float, seed: int) -> LayeredGraph:
    """Three independent G(n, p) layers.

    Layer ``i`` (1, 2, 3) is drawn from the stream ``SeedSequence([seed, i])``,
    so each layer can be regenerated on its own.
    """
    return LayeredGraph.from_layers([_gnp(n, p, [seed, i]) for i in (1, 2, 3)])


def write_edgelist(g: Graph, path) -> None:
    lines = [str(g.n)] + [f"{u} {v}" for u, v in g.edges()]
    Path(path).write_text("\n".join(lines) + "\n")


def read_edgelist(path) -> Graph:
    """Read the format written by :func:`write_edgelist`: ``n`` then ``u v`` lines."""
    lines = [ln.split() for ln in Path(path).read_text().splitlines()]
    lines = [ln for ln in lines if ln and not ln[0].startswith("#")]
    if not lines:
        raise ValueError(f"{path}: empty edge list")
    n = int(lines[0][0])
    return Graph.from_edges(n, ((int(u), int(v)) for u, v in lines[1:]))
