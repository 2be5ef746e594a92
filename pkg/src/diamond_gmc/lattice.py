"""Diamond hierarchical lattice: addresses, cell measures, coordinates and metric.

Cells (bonds) of the level-n graph D_n are words of letters ``(i, j)`` with
``1 <= i <= b`` (branch) and ``1 <= j <= s`` (segment).  A word also has a
flat integer index in mixed radix ``bs`` with the first letter most
significant, so the ``bs`` children of cell ``c`` are ``c*bs .. c*bs+bs-1`` in
``(i, j)`` row-major order.  Every array-valued routine in the package uses
this ordering.

All measures and coordinates are exact :class:`fractions.Fraction` values.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterator, Sequence, Union

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

from .errors import AddressError, RegimeError

Letter = tuple[int, int]


@dataclass(frozen=True)
class LatticeParams:
    """Branching number ``b`` and segmenting number ``s`` of the lattice."""

    b: int
    s: int

    def __post_init__(self):
        for name in ("b", "s"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or isinstance(v, bool) or v < 2:
                raise ValueError(f"{name} must be an integer >= 2, got {v!r}")

    @property
    def bs(self) -> int:
        return self.b * self.s

    def gmc_regime(self) -> bool:
        return self.s > self.b

    def require_gmc(self) -> None:
        if not self.gmc_regime():
            raise RegimeError(f"operation requires s > b, got b={self.b}, s={self.s}")

    def check_letter(self, letter: Letter) -> None:
        i, j = letter
        if not (1 <= i <= self.b and 1 <= j <= self.s):
            raise AddressError(f"letter {letter} outside {{1..{self.b}}} x {{1..{self.s}}}")

    def letter_index(self, letter: Letter) -> int:
        self.check_letter(letter)
        return (letter[0] - 1) * self.s + (letter[1] - 1)

    def letter_from_index(self, idx: int) -> Letter:
        return (idx // self.s + 1, idx % self.s + 1)

    def letters(self) -> Iterator[Letter]:
        for i in range(1, self.b + 1):
            for j in range(1, self.s + 1):
                yield (i, j)


@dataclass(frozen=True, order=True)
class EdgeAddress:
    """A cell of the lattice named by its word of letters; level = word length."""

    letters: tuple[Letter, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "letters", tuple((int(i), int(j)) for i, j in self.letters))

    @property
    def level(self) -> int:
        return len(self.letters)

    def child(self, i: int, j: int) -> "EdgeAddress":
        return EdgeAddress(self.letters + ((i, j),))

    def parent(self) -> "EdgeAddress":
        if not self.letters:
            raise AddressError("the root cell has no parent")
        return EdgeAddress(self.letters[:-1])

    def ancestor(self, k: int) -> "EdgeAddress":
        if not 0 <= k <= self.level:
            raise AddressError(f"ancestor level {k} not in 0..{self.level}")
        return EdgeAddress(self.letters[:k])

    def is_ancestor_of(self, other: "EdgeAddress") -> bool:
        return other.letters[: self.level] == self.letters

    def __str__(self) -> str:
        return "/".join(f"{i}.{j}" for i, j in self.letters)

    @classmethod
    def parse(cls, text: str) -> "EdgeAddress":
        text = text.strip()
        if text in ("", "-", "root"):
            return cls(())
        try:
            letters = tuple(tuple(int(x) for x in part.split(".")) for part in text.split("/"))
        except ValueError as exc:
            raise AddressError(f"cannot parse edge address {text!r}") from exc
        if any(len(l) != 2 for l in letters):
            raise AddressError(f"cannot parse edge address {text!r}")
        return cls(letters)


@dataclass(frozen=True, order=True)
class VertexAddress:
    """A vertex: either a root (``"A"``/``"B"``) or ``(prefix, branch, cut)``.

    A non-root vertex of generation ``g`` sits inside the level-(g-1) cell
    ``prefix`` on branch ``branch`` after ``cut`` of the ``s`` segments.
    """

    root: str = ""
    prefix: EdgeAddress = EdgeAddress(())
    branch: int = 0
    cut: int = 0

    def __post_init__(self):
        if self.root not in ("", "A", "B"):
            raise AddressError(f"unknown root tag {self.root!r}")
        if not self.root and (self.branch < 1 or self.cut < 1):
            raise AddressError("non-root vertex needs branch >= 1 and cut >= 1")

    @property
    def is_root(self) -> bool:
        return bool(self.root)

    @property
    def generation(self) -> int:
        return 0 if self.root else self.prefix.level + 1

    def __str__(self) -> str:
        if self.root:
            return self.root
        return f"{self.prefix}:{self.branch},{self.cut}"

    @classmethod
    def parse(cls, text: str) -> "VertexAddress":
        text = text.strip()
        if text in ("A", "B"):
            return cls(root=text)
        if ":" not in text:
            raise AddressError(f"cannot parse vertex address {text!r}")
        pre, tail = text.rsplit(":", 1)
        try:
            br, cut = (int(x) for x in tail.split(","))
        except ValueError as exc:
            raise AddressError(f"cannot parse vertex address {text!r}") from exc
        return cls(prefix=EdgeAddress.parse(pre), branch=br, cut=cut)


VERTEX_A = VertexAddress(root="A")
VERTEX_B = VertexAddress(root="B")


def check_edge(params: LatticeParams, e: EdgeAddress) -> None:
    for letter in e.letters:
        params.check_letter(letter)


def check_vertex(params: LatticeParams, v: VertexAddress) -> None:
    if v.root:
        return
    check_edge(params, v.prefix)
    if not 1 <= v.branch <= params.b:
        raise AddressError(f"branch {v.branch} not in 1..{params.b}")
    if not 1 <= v.cut <= params.s - 1:
        raise AddressError(f"cut {v.cut} not in 1..{params.s - 1}")


# --- counting ---------------------------------------------------------------


def edge_count(params: LatticeParams, n: int) -> int:
    """Number of level-n cells, ``(bs)^n``."""
    if n < 0:
        raise ValueError("level must be >= 0")
    return params.bs**n


def decision_count(params: LatticeParams, n: int) -> int:
    """Number of branch choices fixing a level-n path, ``(s^n - 1)/(s - 1)``."""
    if n < 0:
        raise ValueError("level must be >= 0")
    return (params.s**n - 1) // (params.s - 1)


def path_count(params: LatticeParams, n: int) -> int:
    """Number of level-n directed paths, ``b^((s^n - 1)/(s - 1))``."""
    return params.b ** decision_count(params, n)


def cell_measure(params: LatticeParams, e: EdgeAddress) -> Fraction:
    check_edge(params, e)
    return Fraction(1, params.bs**e.level)


def vertex_count(params: LatticeParams, n: int) -> int:
    return 2 + sum(params.bs ** (g - 1) * params.b * (params.s - 1) for g in range(1, n + 1))


# --- flat indices -----------------------------------------------------------


def edge_index(params: LatticeParams, e: EdgeAddress) -> int:
    idx = 0
    for letter in e.letters:
        idx = idx * params.bs + params.letter_index(letter)
    return idx


def edge_from_index(params: LatticeParams, n: int, idx: int) -> EdgeAddress:
    if not 0 <= idx < params.bs**n:
        raise AddressError(f"index {idx} out of range for level {n}")
    letters = []
    for _ in range(n):
        idx, r = divmod(idx, params.bs)
        letters.append(params.letter_from_index(r))
    return EdgeAddress(tuple(reversed(letters)))


def iter_edges(params: LatticeParams, n: int) -> Iterator[EdgeAddress]:
    for idx in range(params.bs**n):
        yield edge_from_index(params, n, idx)


def ancestor_indices(params: LatticeParams, n: int, k: int) -> np.ndarray:
    """Level-k ancestor index of every level-n cell, as an int array."""
    return np.arange(params.bs**n, dtype=np.int64) // params.bs ** (n - k)


def letter_arrays(params: LatticeParams, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Branch and segment letters of every level-n cell, shape (bs^n, n) each."""
    idx = np.arange(params.bs**n, dtype=np.int64)
    digits = np.empty((idx.size, n), dtype=np.int64)
    for pos in range(n - 1, -1, -1):
        digits[:, pos] = idx % params.bs
        idx = idx // params.bs
    return digits // params.s + 1, digits % params.s + 1


# --- coordinates ------------------------------------------------------------


def _left_coordinate(params: LatticeParams, e: EdgeAddress) -> Fraction:
    return sum((Fraction(j - 1, params.s**k) for k, (_, j) in enumerate(e.letters, 1)), Fraction(0))


def projective_coordinate(
    params: LatticeParams, addr: Union[EdgeAddress, VertexAddress]
) -> Union[Fraction, tuple[Fraction, Fraction]]:
    """Exact coordinate of a vertex, or the coordinate interval of a cell."""
    if isinstance(addr, EdgeAddress):
        check_edge(params, addr)
        left = _left_coordinate(params, addr)
        return left, left + Fraction(1, params.s**addr.level)
    check_vertex(params, addr)
    if addr.root:
        return Fraction(0) if addr.root == "A" else Fraction(1)
    return _left_coordinate(params, addr.prefix) + Fraction(addr.cut, params.s**addr.generation)


def edge_endpoints(params: LatticeParams, e: EdgeAddress) -> tuple[VertexAddress, VertexAddress]:
    check_edge(params, e)
    return _endpoint(params, e, left=True), _endpoint(params, e, left=False)


def _endpoint(params: LatticeParams, e: EdgeAddress, left: bool) -> VertexAddress:
    letters = e.letters
    for k in range(len(letters) - 1, -1, -1):
        i, j = letters[k]
        if left and j > 1:
            return VertexAddress(prefix=EdgeAddress(letters[:k]), branch=i, cut=j - 1)
        if not left and j < params.s:
            return VertexAddress(prefix=EdgeAddress(letters[:k]), branch=i, cut=j)
    return VERTEX_A if left else VERTEX_B


def iter_vertices(params: LatticeParams, n: int) -> Iterator[VertexAddress]:
    yield VERTEX_A
    yield VERTEX_B
    for g in range(1, n + 1):
        for pre in iter_edges(params, g - 1):
            for br in range(1, params.b + 1):
                for cut in range(1, params.s):
                    yield VertexAddress(prefix=pre, branch=br, cut=cut)


def random_vertex(params: LatticeParams, n: int, rng: np.random.Generator) -> VertexAddress:
    """A vertex drawn uniformly from V_n."""
    k = int(rng.integers(vertex_count(params, n)))
    if k < 2:
        return VERTEX_A if k == 0 else VERTEX_B
    k -= 2
    per_cell = params.b * (params.s - 1)
    for g in range(1, n + 1):
        size = params.bs ** (g - 1) * per_cell
        if k < size:
            cell, r = divmod(k, per_cell)
            return VertexAddress(
                prefix=edge_from_index(params, g - 1, cell),
                branch=r // (params.s - 1) + 1,
                cut=r % (params.s - 1) + 1,
            )
        k -= size
    raise AssertionError("unreachable")


# --- similitudes ------------------------------------------------------------


def similitude(params: LatticeParams, letter: Letter, addr):
    """Image of a cell or vertex under the contraction onto sub-copy ``letter``."""
    params.check_letter(letter)
    i, j = letter
    if isinstance(addr, EdgeAddress):
        check_edge(params, addr)
        return EdgeAddress((letter,) + addr.letters)
    check_vertex(params, addr)
    if addr.root == "A":
        return VERTEX_A if j == 1 else VertexAddress(prefix=EdgeAddress(()), branch=i, cut=j - 1)
    if addr.root == "B":
        return VERTEX_B if j == params.s else VertexAddress(prefix=EdgeAddress(()), branch=i, cut=j)
    return VertexAddress(
        prefix=EdgeAddress((letter,) + addr.prefix.letters), branch=addr.branch, cut=addr.cut
    )


# --- metric -----------------------------------------------------------------

# Graphs beyond this many vertices only get per-source distance rows.
_ALL_PAIRS_LIMIT = 4096
_graph_lock = threading.Lock()


class _LevelGraph:
    """Unit-bond skeleton of D_n; distances are hop counts times s^-n."""

    def __init__(self, params: LatticeParams, n: int):
        self.params, self.n = params, n
        self.index: dict[VertexAddress, int] = {v: k for k, v in enumerate(iter_vertices(params, n))}
        rows, cols = [], []
        for e in iter_edges(params, n):
            u, v = edge_endpoints(params, e)
            rows.append(self.index[u])
            cols.append(self.index[v])
        size = len(self.index)
        adj = csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(size, size))
        self.adj = adj + adj.T
        self._table = None
        self._rows: dict[int, np.ndarray] = {}
        self._lock = threading.Lock()

    def hops_from(self, src: int) -> np.ndarray:
        if self._table is None and len(self.index) <= _ALL_PAIRS_LIMIT:
            with self._lock:
                if self._table is None:
                    d = shortest_path(self.adj, method="D", unweighted=True)
                    self._table = np.rint(d).astype(np.int64)
        if self._table is not None:
            return self._table[src]
        row = self._rows.get(src)
        if row is None:
            d = shortest_path(self.adj, method="D", unweighted=True, indices=[src])[0]
            row = np.rint(d).astype(np.int64)
            with self._lock:
                self._rows[src] = row
        return row


@lru_cache(maxsize=32)
def _level_graph_cached(params: LatticeParams, n: int) -> _LevelGraph:
    return _LevelGraph(params, n)


def level_graph(params: LatticeParams, n: int) -> _LevelGraph:
    with _graph_lock:
        return _level_graph_cached(params, n)


def metric_distance(params: LatticeParams, v1: VertexAddress, v2: VertexAddress, n: int) -> Fraction:
    """Geodesic distance between two vertices on D_n with bond length s^-n.

    The value does not depend on ``n`` once ``n`` is at least the larger
    generation of the two vertices.
    """
    check_vertex(params, v1)
    check_vertex(params, v2)
    if max(v1.generation, v2.generation) > n:
        raise AddressError(f"level {n} does not contain vertices of generation "
                           f"{max(v1.generation, v2.generation)}")
    g = level_graph(params, n)
    hops = int(g.hops_from(g.index[v1])[g.index[v2]])
    return Fraction(hops, params.s**n)


def cell_distance(params: LatticeParams, e1: EdgeAddress, e2: EdgeAddress) -> tuple[Fraction, Fraction]:
    """Distance estimate between points known only up to their level-n cells.

    Returns ``(estimate, error_bound)``: the estimate is the distance between
    the left endpoints and any pair of points in the two cells is within
    ``error_bound = 2 s^-n`` of it.
    """
    if e1.level != e2.level:
        raise AddressError("cells must share a level")
    n = e1.level
    a, _ = edge_endpoints(params, e1)
    c, _ = edge_endpoints(params, e2)
    return metric_distance(params, a, c, n), Fraction(2, params.s**n)


# --- dimension --------------------------------------------------------------


def lattice_dimension(params: LatticeParams) -> float:
    return 1.0 + math.log(params.b) / math.log(params.s)


def covering_dimension(params: LatticeParams, n: int) -> float:
    """``log(edge_count(n)) / log(s^n)``: the box-counting ratio at scale s^-n."""
    if n < 1:
        raise ValueError("level must be >= 1")
    return math.log(edge_count(params, n)) / math.log(params.s**n)


def parse_params(text: str) -> LatticeParams:
    b, s = (int(x) for x in text.split(","))
    return LatticeParams(b, s)


def sum_cell_measures(params: LatticeParams, cells: Sequence[EdgeAddress]) -> Fraction:
    return sum((cell_measure(params, e) for e in cells), Fraction(0))
