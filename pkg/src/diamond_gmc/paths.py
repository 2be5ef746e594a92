"""Coarse directed paths on D_n: sampling, coarsening, shared bonds, conditioning.

A level-n path is fixed by one branch choice per decision node.  The nodes
form an s-ary tree of depth n (one node at level 0, s^d nodes at level d).
``CoarsePath.choices`` lists them depth first: the top choice, then the s
sub-diamonds in order, each recursively.  Internally most routines work with
the per-level view ``levels[d]`` (length s^d, nodes ordered by their segment
digits), which makes edge lists and comparisons plain numpy indexing.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Iterator, Optional, Sequence

import numpy as np

from .errors import AddressError, CapExceededError, EmptySupportError
from .lattice import (
    EdgeAddress,
    LatticeParams,
    check_edge,
    decision_count,
    edge_from_index,
    edge_index,
    path_count,
)

DEFAULT_MAX_LEVEL = 12


@lru_cache(maxsize=64)
def _df_positions(s: int, n: int) -> tuple[np.ndarray, ...]:
    """Depth-first position of every level-d decision node, d = 0..n-1."""
    sizes = [(s**k - 1) // (s - 1) for k in range(n + 1)]
    out = [np.zeros(1, dtype=np.int64)]
    for d in range(n - 1):
        step = sizes[n - d - 1]
        nxt = out[-1][:, None] + 1 + np.arange(s, dtype=np.int64)[None, :] * step
        out.append(nxt.ravel())
    for a in out:
        a.setflags(write=False)
    return tuple(out[:n])


def _levels_from_choices(s: int, n: int, choices: np.ndarray) -> list[np.ndarray]:
    return [choices[..., pos] for pos in _df_positions(s, n)]


def _choices_from_levels(s: int, n: int, levels: Sequence[np.ndarray]) -> np.ndarray:
    lead = levels[0].shape[:-1] if n else ()
    out = np.empty(lead + ((s**n - 1) // (s - 1),), dtype=np.int64)
    for pos, lv in zip(_df_positions(s, n), levels):
        out[..., pos] = lv
    return out


@dataclass(frozen=True, eq=False)
class CoarsePath:
    """A level-n coarse path stored as its depth-first decision vector."""

    params: LatticeParams
    level: int
    choices: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.asarray(self.choices, dtype=np.int64).reshape(-1)
        if c.size != decision_count(self.params, self.level):
            raise AddressError(
                f"level-{self.level} path needs {decision_count(self.params, self.level)} choices, got {c.size}"
            )
        if c.size and (c.min() < 1 or c.max() > self.params.b):
            raise AddressError(f"branch choices must lie in 1..{self.params.b}")
        c = c.copy()
        c.setflags(write=False)
        object.__setattr__(self, "choices", c)

    def __eq__(self, other) -> bool:
        if not isinstance(other, CoarsePath):
            return NotImplemented
        return (self.params == other.params and self.level == other.level
                and np.array_equal(self.choices, other.choices))

    def __hash__(self) -> int:
        return hash((self.params, self.level, self.choices.tobytes()))

    def __repr__(self) -> str:
        return f"CoarsePath(b={self.params.b}, s={self.params.s}, level={self.level}, choices={self})"

    def __str__(self) -> str:
        return "".join(str(int(c)) for c in self.choices) if self.choices.size else "-"

    @classmethod
    def parse(cls, params: LatticeParams, level: int, text: str) -> "CoarsePath":
        text = text.strip()
        digits = [] if text in ("", "-") else [int(ch) for ch in text]
        return cls(params, level, np.array(digits, dtype=np.int64))

    @classmethod
    def from_levels(cls, params: LatticeParams, levels: Sequence[np.ndarray]) -> "CoarsePath":
        n = len(levels)
        return cls(params, n, _choices_from_levels(params.s, n, [np.asarray(x) for x in levels]))

    def levels(self) -> list[np.ndarray]:
        return _levels_from_choices(self.params.s, self.level, self.choices)

    def edge_indices(self) -> np.ndarray:
        """Flat level-n cell index of every bond, in traversal order."""
        return _edge_indices(self.params, self.level, self.levels())

    def edges(self) -> list[EdgeAddress]:
        return [edge_from_index(self.params, self.level, int(i)) for i in self.edge_indices()]

    def index(self) -> int:
        """Position of this path in the enumeration order of :func:`enumerate_paths`."""
        out = 0
        for c in self.choices:
            out = out * self.params.b + int(c) - 1
        return out


def _edge_indices(params: LatticeParams, n: int, levels: Sequence[np.ndarray]) -> np.ndarray:
    b, s = params.b, params.s
    k = np.arange(s**n, dtype=np.int64)
    lead = levels[0].shape[:-1] if n else ()
    idx = np.zeros(lead + (s**n,), dtype=np.int64)
    for d in range(n):
        node = k // s ** (n - d)
        seg = (k // s ** (n - d - 1)) % s
        branch = levels[d][..., node]
        idx = idx * (b * s) + (branch - 1) * s + seg
    return idx


def _uniform_levels(params: LatticeParams, lo: int, hi: int, rng, size=()) -> list[np.ndarray]:
    size = tuple(np.atleast_1d(size)) if size != () else ()
    return [rng.integers(1, params.b + 1, size=size + (params.s**d,)) for d in range(lo, hi)]


def _check_level(n: int, max_level: Optional[int]) -> None:
    if n < 0:
        raise ValueError("level must be >= 0")
    if max_level is not None and n > max_level:
        raise CapExceededError(f"path level {n} exceeds cap {max_level}")


# --- sampling ---------------------------------------------------------------


def sample_uniform_path(params: LatticeParams, n: int, rng: np.random.Generator,
                        max_level: Optional[int] = DEFAULT_MAX_LEVEL) -> CoarsePath:
    """Draw a path from the uniform measure on level-n coarse paths."""
    _check_level(n, max_level)
    return CoarsePath(params, n, rng.integers(1, params.b + 1, size=decision_count(params, n)))


def sample_uniform_choices(params: LatticeParams, n: int, size: int, rng: np.random.Generator) -> np.ndarray:
    """Batch version: a (size, D_n) array of depth-first decision vectors."""
    return rng.integers(1, params.b + 1, size=(size, decision_count(params, n)))


def edge_at(p: CoarsePath, k: int) -> EdgeAddress:
    """The k-th bond of ``p``, 1-based."""
    s, n = p.params.s, p.level
    if not 1 <= k <= s**n:
        raise AddressError(f"bond index {k} not in 1..{s**n}")
    letters, pos, k0 = [], 0, k - 1
    for d in range(n):
        seg = (k0 // s ** (n - d - 1)) % s
        letters.append((int(p.choices[pos]), seg + 1))
        pos += 1 + seg * decision_count(p.params, n - d - 1)
    return EdgeAddress(tuple(letters))


def coarsen(p: CoarsePath, m: int) -> CoarsePath:
    """The level-m class ``[p]_m``."""
    if not 0 <= m <= p.level:
        raise AddressError(f"cannot coarsen a level-{p.level} path to level {m}")
    if m == p.level:
        return p
    return CoarsePath.from_levels(p.params, p.levels()[:m]) if m else CoarsePath(p.params, 0, [])


def refine(p: CoarsePath, N: int, rng: np.random.Generator) -> CoarsePath:
    """A uniform refinement of ``p`` to level N."""
    if N < p.level:
        raise AddressError(f"cannot refine a level-{p.level} path to level {N}")
    if N == p.level:
        return p
    return CoarsePath.from_levels(p.params, p.levels() + _uniform_levels(p.params, p.level, N, rng))


def enumerate_paths(params: LatticeParams, n: int, max_count: int = 1 << 20) -> np.ndarray:
    """Every level-n path as rows of depth-first decision vectors, in index order."""
    total = path_count(params, n)
    if total > max_count:
        raise CapExceededError(f"{total} paths exceed enumeration cap {max_count}")
    D = decision_count(params, n)
    idx = np.arange(total, dtype=np.int64)
    out = np.empty((total, D), dtype=np.int64)
    for pos in range(D - 1, -1, -1):
        out[:, pos] = idx % params.b + 1
        idx //= params.b
    return out


def path_edge_matrix(params: LatticeParams, n: int, choices: Optional[np.ndarray] = None) -> np.ndarray:
    """Level-n cell indices along each path: shape (num_paths, s^n)."""
    if choices is None:
        choices = enumerate_paths(params, n)
    choices = np.atleast_2d(choices)
    out = _edge_indices(params, n, _levels_from_choices(params.s, n, choices))
    return np.asarray(out).reshape(choices.shape[0], params.s**n)


# --- shared bonds -----------------------------------------------------------


def _shared_from_levels(s: int, n: int, lp, lq) -> np.ndarray:
    alive = lp[0] == lq[0]
    for d in range(1, n):
        alive = np.repeat(alive, s, axis=-1) & (lp[d] == lq[d])
    return alive.sum(axis=-1) * s  # last level nodes each cover s bonds


def shared_bonds(p: CoarsePath, q: CoarsePath) -> int:
    """Number of bond positions at which the two paths coincide."""
    if p.params != q.params or p.level != q.level:
        raise AddressError("paths must share params and level")
    n, s = p.level, p.params.s
    if n == 0:
        return 1
    return int(_shared_from_levels(s, n, p.levels(), q.levels()))


def shared_bonds_batch(params: LatticeParams, n: int, cp: np.ndarray, cq: np.ndarray) -> np.ndarray:
    """Vectorized shared-bond counts for stacked decision vectors."""
    if n == 0:
        return np.ones(np.broadcast_shapes(cp.shape[:-1], cq.shape[:-1]), dtype=np.int64)
    lp = _levels_from_choices(params.s, n, cp)
    lq = _levels_from_choices(params.s, n, cq)
    return _shared_from_levels(params.s, n, lp, lq)


# --- cell sets and conditioning ---------------------------------------------


@dataclass(frozen=True)
class CellSet:
    """A finite set of distinct cells sharing one level."""

    level: int
    cells: frozenset = frozenset()

    def __post_init__(self):
        cells = frozenset(self.cells)
        for e in cells:
            if not isinstance(e, EdgeAddress) or e.level != self.level:
                raise AddressError(f"every cell must be a level-{self.level} EdgeAddress, got {e!r}")
        object.__setattr__(self, "cells", cells)

    @classmethod
    def of(cls, level: int, cells: Iterable) -> "CellSet":
        items = [c if isinstance(c, EdgeAddress) else EdgeAddress(tuple(c)) for c in cells]
        if len(set(items)) != len(items):
            raise AddressError("cells must be pairwise distinct")
        return cls(level, frozenset(items))

    def __len__(self) -> int:
        return len(self.cells)

    def __iter__(self) -> Iterator[EdgeAddress]:
        return iter(sorted(self.cells))

    def validate(self, params: LatticeParams) -> None:
        for e in self.cells:
            check_edge(params, e)


def _split(words: list[tuple]) -> Optional[tuple[int, dict[int, list[tuple]]]]:
    """Forced branch and per-segment suffixes, or None if two branches collide."""
    branches = {w[0][0] for w in words}
    if len(branches) > 1:
        return None
    groups: dict[int, list[tuple]] = {}
    for w in words:
        groups.setdefault(w[0][1], []).append(w[1:])
    return branches.pop(), groups


def _count_through(params: LatticeParams, n: int, words: list[tuple]) -> int:
    if not words:
        return path_count(params, n)
    if n == 0:
        return 1  # every word is exhausted: the level-0 cell itself
    split = _split(words)
    if split is None:
        return 0
    _, groups = split
    out = 1
    for j in range(1, params.s + 1):
        out *= _count_through(params, n - 1, groups.get(j, []))
        if out == 0:
            return 0
    return out


def count_paths_through(params: LatticeParams, S: CellSet) -> int:
    """Exact number of level-n paths containing every cell of S."""
    S.validate(params)
    return _count_through(params, S.level, [e.letters for e in S.cells])


def forced_choices(params: LatticeParams, S: CellSet) -> Optional[list[dict[int, int]]]:
    """Decision nodes whose branch S forces, per level, or None if Γ_S is empty.

    ``out[d]`` maps a level-d node index (segment digits in base s) to the
    only branch a path through S may take there.
    """
    S.validate(params)
    n, s = S.level, params.s
    out: list[dict[int, int]] = [dict() for _ in range(n)]
    for d in range(n):
        by_node: dict[int, set] = {}
        for e in S.cells:
            node = 0
            for _, j in e.letters[:d]:
                node = node * s + (j - 1)
            by_node.setdefault(node, set()).add(e.letters[d][0])
        for node, br in by_node.items():
            if len(br) > 1:
                return None
            out[d][node] = br.pop()
    return out


def sample_path_through(params: LatticeParams, S: CellSet, rng: np.random.Generator) -> CoarsePath:
    """Uniform sample from the level-n paths through S.

    A node touched by S has exactly one admissible branch (the sub-count of
    every other branch is 0); every free node is uniform, which is the
    proportional-to-count rule since the free sub-diamonds are symmetric.
    """
    forced = forced_choices(params, S)
    if forced is None:
        raise EmptySupportError("no directed path passes through every cell of S")
    levels = _uniform_levels(params, 0, S.level, rng)
    for d, fx in enumerate(forced):
        for node, br in fx.items():
            levels[d][node] = br
    return CoarsePath.from_levels(params, levels) if S.level else CoarsePath(params, 0, [])


def contains_cells(p: CoarsePath, S: CellSet) -> bool:
    if S.level != p.level:
        raise AddressError("cell set and path levels differ")
    on = set(p.edge_indices().tolist())
    return all(edge_index(p.params, e) in on for e in S.cells)
