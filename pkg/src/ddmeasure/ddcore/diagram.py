"""Layered, probability-weighted decision diagrams over Pauli letters.

Vertices are integer ids with a layer index; layer 0 holds the root and
layer ``n`` the unique terminal. Every edge runs from layer ``k`` to
``k + 1`` and carries a letter, a weight and a *virtual* flag (edges created
when an identity edge is split). A root-to-terminal path spells a
measurement basis; the product of its weights is the probability of drawing
that basis.

Diagrams returned by the public construction functions are treated as
immutable. The construction passes in :mod:`ddmeasure.ddcore.construct`
mutate private copies.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from ddmeasure.pauli import LETTERS, PauliString

LABEL_ORDER = "XYZ"
PATH_COUNT_LIMIT = 2**64
WEIGHT_SUM_TOL = 1e-9


class DDInvariantError(ValueError):
    """A diagram violates the structural or probabilistic invariants."""


class PathCountOverflow(OverflowError):
    """The number of maximal paths does not fit in 64 unsigned bits."""


@dataclass
class Edge:
    target: int
    weight: float
    virtual: bool = False


@dataclass(frozen=True)
class DDMetrics:
    vertex_count: int
    edge_count: int
    path_count: int

    def __str__(self) -> str:
        return f"{self.vertex_count} {self.edge_count} {self.path_count}"


class DecisionDiagram:
    """Rooted layered DAG whose paths carry a distribution over bases.

    Attributes:
      - ``n``: number of qubits (= number of edges on every maximal path)
      - ``root``, ``terminal``: vertex ids
      - ``layer``: ``dict`` vertex id -> layer index
      - ``out``: ``dict`` vertex id -> ``dict`` letter -> :class:`Edge`
    """

    def __init__(self, n: int, root: int = 0, terminal: int = 1,
                 layer: dict[int, int] | None = None,
                 out: dict[int, dict[str, Edge]] | None = None):
        if n <= 0:
            raise DDInvariantError("a diagram needs at least one qubit")
        self.n = n
        self.root = root
        self.terminal = terminal
        self.layer = {root: 0, terminal: n} if layer is None else layer
        self.out = {root: {}, terminal: {}} if out is None else out
        self._compiled: CompiledDD | None = None

    # -- construction helpers -------------------------------------------
    def add_vertex(self, layer: int) -> int:
        vid = max(self.layer) + 1
        self.layer[vid] = layer
        self.out[vid] = {}
        return vid

    def copy(self) -> DecisionDiagram:
        return DecisionDiagram(self.n, self.root, self.terminal,
                               dict(self.layer), copy.deepcopy(self.out))

    # -- queries --------------------------------------------------------
    @property
    def vertices(self) -> list[int]:
        return sorted(self.layer, key=lambda v: (self.layer[v], v))

    def vertices_at(self, k: int) -> list[int]:
        return sorted(v for v, lay in self.layer.items() if lay == k)

    def edges(self) -> Iterator[tuple[int, str, Edge]]:
        for v in self.vertices:
            for label in sorted(self.out[v], key=LETTERS.index):
                yield v, label, self.out[v][label]

    def in_edges(self) -> dict[int, list[tuple[int, str]]]:
        result: dict[int, list[tuple[int, str]]] = {v: [] for v in self.layer}
        for v, label, e in self.edges():
            result[e.target].append((v, label))
        return result

    @property
    def vertex_count(self) -> int:
        return len(self.layer)

    @property
    def edge_count(self) -> int:
        return sum(len(edges) for edges in self.out.values())

    def root_weights(self) -> dict[str, float]:
        return {label: e.weight for label, e in self.out[self.root].items()}

    def __eq__(self, other) -> bool:
        if not isinstance(other, DecisionDiagram):
            return NotImplemented
        return (self.n, self.root, self.terminal, self.layer, self.out) == (
            other.n, other.root, other.terminal, other.layer, other.out)

    def __repr__(self) -> str:
        return (f"DecisionDiagram(n={self.n}, vertices={self.vertex_count}, "
                f"edges={self.edge_count})")

    @property
    def compiled(self) -> CompiledDD:
        if self._compiled is None:
            self._compiled = compile_dd(self)
        return self._compiled

    # -- maintenance ----------------------------------------------------
    def prune_unreachable(self) -> None:
        """Drop vertices not on any root-to-terminal walk."""
        reach = {self.root}
        for v in self.vertices:
            if v in reach:
                reach.update(e.target for e in self.out[v].values())
        alive = {self.terminal}
        for v in reversed(self.vertices):
            if any(e.target in alive for e in self.out[v].values()):
                alive.add(v)
        keep = reach & alive
        keep.update((self.root, self.terminal))
        for v in list(self.layer):
            if v not in keep:
                del self.layer[v]
                del self.out[v]
        for v in self.out:
            self.out[v] = {lab: e for lab, e in self.out[v].items() if e.target in keep}

    def normalize_vertices(self) -> None:
        """Rescale each vertex's outgoing weights to sum to one."""
        for v, edges in self.out.items():
            total = sum(e.weight for e in edges.values())
            if edges and total <= 0:
                raise DDInvariantError(f"vertex {v} has zero outgoing weight")
            for e in edges.values():
                e.weight /= total

    def validate(self, allow_identity: bool = False, tol: float = WEIGHT_SUM_TOL) -> None:
        """Raise :class:`DDInvariantError` unless the diagram is well formed."""
        if self.layer.get(self.root) != 0:
            raise DDInvariantError("root must sit on layer 0")
        if self.layer.get(self.terminal) != self.n:
            raise DDInvariantError(f"terminal must sit on layer {self.n}")
        if set(self.layer) != set(self.out):
            raise DDInvariantError("vertex tables disagree")
        allowed = LETTERS if allow_identity else LABEL_ORDER
        for v, edges in self.out.items():
            if v == self.terminal:
                if edges:
                    raise DDInvariantError("terminal has outgoing edges")
                continue
            if not edges:
                raise DDInvariantError(f"vertex {v} has no outgoing edge")
            total = 0.0
            for label, e in edges.items():
                if label not in allowed:
                    raise DDInvariantError(f"edge label {label!r} at vertex {v}")
                if e.target not in self.layer:
                    raise DDInvariantError(f"edge {v}->{e.target} to unknown vertex")
                if self.layer[e.target] != self.layer[v] + 1:
                    raise DDInvariantError(f"edge {v}->{e.target} skips a layer")
                if not (0.0 < e.weight <= 1.0 + 1e-12):
                    raise DDInvariantError(f"edge {v}->{e.target} has weight {e.weight}")
                total += e.weight
            if abs(total - 1.0) > tol:
                raise DDInvariantError(
                    f"outgoing weights of vertex {v} sum to {total!r}, not 1")
        reach = {self.root}
        for v in self.vertices:
            if v in reach:
                reach.update(e.target for e in self.out[v].values())
        if reach != set(self.layer):
            raise DDInvariantError("some vertices are unreachable from the root")


@dataclass
class CompiledDD:
    """Per-layer edge arrays for vectorized dynamic programming.

    Vertex ``j`` of layer ``k`` is local index ``j`` in ``layer_ids[k]``.
    For layer ``k`` edge arrays run over edges leaving layer ``k``.
    """

    n: int
    layer_ids: list[list[int]]
    src: list[np.ndarray] = field(default_factory=list)
    dst: list[np.ndarray] = field(default_factory=list)
    label: list[np.ndarray] = field(default_factory=list)
    weight: list[np.ndarray] = field(default_factory=list)
    src_onehot: list[np.ndarray] = field(default_factory=list)
    dst_onehot: list[np.ndarray] = field(default_factory=list)


def compile_dd(dd: DecisionDiagram) -> CompiledDD:
    layer_ids = [dd.vertices_at(k) for k in range(dd.n + 1)]
    local = {v: j for ids in layer_ids for j, v in enumerate(ids)}
    cd = CompiledDD(dd.n, layer_ids)
    for k in range(dd.n):
        src, dst, lab, w = [], [], [], []
        for v in layer_ids[k]:
            for label in LABEL_ORDER:
                e = dd.out[v].get(label)
                if e is not None:
                    src.append(local[v])
                    dst.append(local[e.target])
                    lab.append(LETTERS.index(label))
                    w.append(e.weight)
            if "I" in dd.out[v]:
                raise DDInvariantError("identity edges must be removed before querying")
        src_a = np.array(src, dtype=np.intp)
        dst_a = np.array(dst, dtype=np.intp)
        cd.src.append(src_a)
        cd.dst.append(dst_a)
        cd.label.append(np.array(lab, dtype=np.int8))
        cd.weight.append(np.array(w, dtype=float))
        onehot_s = np.zeros((len(src), len(layer_ids[k])))
        onehot_s[np.arange(len(src)), src_a] = 1.0
        onehot_d = np.zeros((len(src), len(layer_ids[k + 1])))
        onehot_d[np.arange(len(src)), dst_a] = 1.0
        cd.src_onehot.append(onehot_s)
        cd.dst_onehot.append(onehot_d)
    return cd


def _pattern_codes(patterns: Sequence[PauliString] | np.ndarray, n: int) -> np.ndarray:
    if isinstance(patterns, np.ndarray):
        codes = np.atleast_2d(patterns).astype(np.int8)
    else:
        codes = np.array([p.codes() for p in patterns], dtype=np.int8).reshape(-1, n)
    if codes.shape[1] != n:
        raise ValueError(f"patterns must have length {n}")
    return codes


def edge_match(cd: CompiledDD, codes: np.ndarray, k: int) -> np.ndarray:
    """``(L, E_k)`` indicator that layer-``k`` edges agree with each pattern."""
    letter = codes[:, k][:, None]
    return (letter == 0) | (letter == cd.label[k][None, :])


def forward_masses(cd: CompiledDD, codes: np.ndarray) -> list[np.ndarray]:
    """Per layer, probability of reaching each vertex along a covering prefix."""
    f = [np.ones((codes.shape[0], 1))]
    for k in range(cd.n):
        flow = f[-1][:, cd.src[k]] * (edge_match(cd, codes, k) * cd.weight[k])
        f.append(flow @ cd.dst_onehot[k])
    return f


def backward_masses(cd: CompiledDD, codes: np.ndarray) -> list[np.ndarray]:
    """Per layer, probability that a walk from each vertex covers the suffix."""
    b = [None] * (cd.n + 1)
    b[cd.n] = np.ones((codes.shape[0], 1))
    for k in range(cd.n - 1, -1, -1):
        flow = b[k + 1][:, cd.dst[k]] * (edge_match(cd, codes, k) * cd.weight[k])
        b[k] = flow @ cd.src_onehot[k]
    return b


def zeta_many(dd: DecisionDiagram, patterns: Sequence[PauliString] | np.ndarray) -> np.ndarray:
    """Coverage probability of every pattern, one forward sweep for all."""
    cd = dd.compiled
    codes = _pattern_codes(patterns, dd.n)
    if codes.shape[0] == 0:
        return np.zeros(0)
    return forward_masses(cd, codes)[-1][:, 0]


def zeta(dd: DecisionDiagram, p: PauliString) -> float:
    """Probability that a basis drawn from ``dd`` covers ``p``."""
    if p.n != dd.n:
        raise ValueError(f"pattern length {p.n} does not match diagram ({dd.n})")
    return float(zeta_many(dd, [p])[0])


def sample_codes(dd: DecisionDiagram, rng: np.random.Generator, size: int) -> np.ndarray:
    """Draw ``size`` bases by random walks; returns an ``(size, n)`` code array."""
    cd = dd.compiled
    out = np.empty((size, dd.n), dtype=np.int8)
    cur = np.zeros(size, dtype=np.intp)
    for k in range(dd.n):
        width = len(cd.layer_ids[k])
        deg = np.bincount(cd.src[k], minlength=width)
        maxdeg = int(deg.max())
        cum = np.full((width, maxdeg), np.inf)
        nxt = np.zeros((width, maxdeg), dtype=np.intp)
        lab = np.zeros((width, maxdeg), dtype=np.int8)
        slot = np.zeros(width, dtype=np.intp)
        running = np.zeros(width)
        for e in range(len(cd.src[k])):
            s = cd.src[k][e]
            running[s] += cd.weight[k][e]
            cum[s, slot[s]] = running[s]
            nxt[s, slot[s]] = cd.dst[k][e]
            lab[s, slot[s]] = cd.label[k][e]
            slot[s] += 1
        u = rng.random(size) * running[cur]
        choice = np.minimum((u[:, None] >= cum[cur]).sum(axis=1), deg[cur] - 1)
        out[:, k] = lab[cur, choice]
        cur = nxt[cur, choice]
    return out


def sample(dd: DecisionDiagram, rng: np.random.Generator) -> PauliString:
    """One basis drawn by a weighted root-to-terminal walk."""
    return PauliString.from_codes(sample_codes(dd, rng, 1)[0])


def path_count(dd: DecisionDiagram) -> int:
    counts = {dd.terminal: 1}
    for v in reversed(dd.vertices):
        if v == dd.terminal:
            continue
        counts[v] = sum(counts.get(e.target, 0) for e in dd.out[v].values())
        if counts[v] >= PATH_COUNT_LIMIT:
            raise PathCountOverflow(f"path count at vertex {v} exceeds 64 bits")
    return counts[dd.root]


def metrics(dd: DecisionDiagram) -> DDMetrics:
    return DDMetrics(dd.vertex_count, dd.edge_count, path_count(dd))
