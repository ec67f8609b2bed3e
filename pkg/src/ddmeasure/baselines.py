"""Reference measurement schemes expressed as decision diagrams.

* LDF grouping: colour the term conflict graph greedily, largest degree
  first, and measure each colour class in one shared basis.
* LBCS: an independent distribution over ``X, Y, Z`` on every qubit, which
  is a chain-shaped diagram with one vertex per layer.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import networkx as nx
import numpy as np

from ddmeasure.ddcore import DecisionDiagram, Edge, ReducedPauliList, build_from_reduced, zeta_many
from ddmeasure.ddcore.diagram import LABEL_ORDER
from ddmeasure.estimator import IncompatibleDiagram
from ddmeasure.optimize import _terms, reweight_step
from ddmeasure.pauli import Hamiltonian, PauliString, compatible, join


# -- LDF grouping -------------------------------------------------------------

def compatibility_graph(h: Hamiltonian) -> nx.Graph:
    """Conflict graph: one node per measured term, edges join incompatible terms.

    Nodes are indices into ``h.terms``; the identity and zero-coefficient
    terms are left out because they are never measured.
    """
    g = nx.Graph()
    nodes = [i for i, (a, p) in enumerate(h.terms) if a != 0.0 and not p.is_identity]
    for i in nodes:
        g.add_node(i, pauli=h.terms[i][1])
    for a_pos, i in enumerate(nodes):
        p = h.terms[i][1]
        for j in nodes[a_pos + 1:]:
            if not compatible(p, h.terms[j][1]):
                g.add_edge(i, j)
    return g


def ldf_coloring(graph: nx.Graph) -> dict[int, int]:
    """Greedy colouring in non-increasing degree order, ties by node order."""
    return nx.greedy_color(graph, strategy="largest_first")


@dataclass(frozen=True)
class Group:
    pattern: PauliString   # join of the members, may contain I
    members: tuple[int, ...]

    @property
    def basis(self) -> PauliString:
        """Full-weight measurement basis; free positions are measured in Z."""
        n = self.pattern.n
        free = ~self.pattern.support_mask & ((1 << n) - 1)
        return PauliString(n, self.pattern.x, self.pattern.z | free)


@dataclass(frozen=True)
class Grouping:
    groups: tuple[Group, ...]

    def __len__(self) -> int:
        return len(self.groups)

    def l1_weights(self, h: Hamiltonian) -> np.ndarray:
        return np.array([sum(abs(h.terms[i][0]) for i in g.members) for g in self.groups])

    def report(self, h: Hamiltonian) -> str:
        lines = []
        for k, g in enumerate(self.groups):
            names = " ".join(str(h.terms[i][1]) for i in g.members)
            lines.append(f"group {k} basis {g.basis} members {names}")
        return "\n".join(lines) + "\n"


def ldf_grouping(h: Hamiltonian) -> Grouping:
    graph = compatibility_graph(h)
    if graph.number_of_nodes() == 0:
        raise ValueError("Hamiltonian has no non-identity term to group")
    colors = ldf_coloring(graph)
    classes: dict[int, list[int]] = {}
    for node in graph.nodes:
        classes.setdefault(colors[node], []).append(node)
    groups = []
    for color in sorted(classes):
        members = tuple(sorted(classes[color]))
        pattern = PauliString.identity(h.n)
        for i in members:
            pattern = join(pattern, h.terms[i][1])
        groups.append(Group(pattern, members))
    return Grouping(tuple(groups))


def grouping_to_dd(grouping: Grouping, h: Hamiltonian) -> DecisionDiagram:
    """Diagram whose paths come from the group patterns, weighted by l1 mass."""
    weights: dict[PauliString, float] = {}
    for g, w in zip(grouping.groups, grouping.l1_weights(h)):
        if g.pattern.is_identity:
            raise ValueError("group pattern is the identity")
        weights[g.pattern] = weights.get(g.pattern, 0.0) + float(w)
    r = ReducedPauliList(h.n, tuple((w, p) for p, w in weights.items()))
    return build_from_reduced(r, [p for _, p in h.non_identity_terms()])


# -- LBCS ---------------------------------------------------------------------

@dataclass(frozen=True)
class ProductDistribution:
    """Row ``i`` holds ``(beta_i(X), beta_i(Y), beta_i(Z))``."""

    tables: np.ndarray

    def __post_init__(self):
        t = np.array(self.tables, dtype=float)
        if t.ndim != 2 or t.shape[1] != 3 or t.shape[0] == 0:
            raise ValueError("tables must have shape (n, 3)")
        if np.any(t < 0) or not np.all(np.isfinite(t)):
            raise ValueError("probabilities must be finite and non-negative")
        if np.any(np.abs(t.sum(axis=1) - 1.0) > 1e-9):
            raise ValueError("each qubit's table must sum to 1")
        t.flags.writeable = False
        object.__setattr__(self, "tables", t)

    @property
    def n(self) -> int:
        return self.tables.shape[0]

    @classmethod
    def uniform(cls, n: int) -> ProductDistribution:
        return cls(np.full((n, 3), 1.0 / 3.0))

    def zeta(self, p: PauliString) -> float:
        out = 1.0
        for i in p.support:
            out *= self.tables[i, LABEL_ORDER.index(p[i])]
        return out

    def format(self) -> str:
        return "".join(" ".join(f"{x:.17g}" for x in row) + "\n" for row in self.tables)

    @classmethod
    def parse(cls, text: str) -> ProductDistribution:
        rows = [[float(t) for t in ln.split()] for ln in text.splitlines() if ln.strip()]
        return cls(np.array(rows))


def _chain(tables: np.ndarray, keep_zero: bool) -> DecisionDiagram:
    n = tables.shape[0]
    dd = DecisionDiagram(n)
    prev = dd.root
    for i in range(n):
        nxt = dd.terminal if i == n - 1 else dd.add_vertex(i + 1)
        for j, lab in enumerate(LABEL_ORDER):
            if keep_zero or tables[i, j] > 0:
                dd.out[prev][lab] = Edge(nxt, float(tables[i, j]))
        prev = nxt
    return dd


def lbcs_chain(beta: ProductDistribution, h: Hamiltonian | None = None) -> DecisionDiagram:
    """Chain diagram of ``beta``; zero-probability letters get no edge."""
    dd = _chain(beta.tables, keep_zero=False)
    dd.validate()
    if h is not None:
        terms = h.non_identity_terms()
        z = zeta_many(dd, [p for _, p in terms])
        bad = [str(p) for (_, p), zp in zip(terms, z) if zp <= 0]
        if bad:
            raise IncompatibleDiagram(f"product distribution never covers {', '.join(bad)}")
    return dd


def cost_diag_product(beta: ProductDistribution, h: Hamiltonian) -> float:
    """``sum_P alpha_P^2 / prod_i beta_i(P_i)``."""
    total = []
    for a, p in h.non_identity_terms():
        z = beta.zeta(p)
        if z <= 0:
            return math.inf
        total.append(a * a / z)
    return math.fsum(total)


def lbcs_optimize(h: Hamiltonian, delta: float = 0.5, max_iter: int = 20000,
                  tol: float = 1e-14) -> ProductDistribution:
    """Minimize the diagonal cost over product distributions.

    Runs the damped closed-form update on a chain diagram. The start is
    uniform over the letters some term needs on each qubit (uniform over all
    three where no term acts); unneeded letters stay at zero. The undamped
    update oscillates on the H2 fixtures, hence the default ``delta``.
    """
    alphas, codes = _terms(h)
    if codes.shape[0] == 0:
        raise ValueError("Hamiltonian has no non-identity term")
    needed = np.zeros((h.n, 3), dtype=bool)
    for j in range(3):
        needed[:, j] = np.any(codes == j + 1, axis=0)
    needed[~needed.any(axis=1)] = True
    start = needed / needed.sum(axis=1, keepdims=True)
    dd = _chain(start, keep_zero=True)
    best, best_cost = start, cost_diag_product(ProductDistribution(start), h)
    for _ in range(max_iter):
        old_t = _tables_of(dd)
        dd = reweight_step(dd, alphas, codes, delta, 0.0)
        new_t = _tables_of(dd)
        cost = cost_diag_product(ProductDistribution(new_t), h)
        if cost <= best_cost:
            best, best_cost = new_t, cost
        if np.max(np.abs(new_t - old_t)) < tol:
            break
    else:
        warnings.warn("LBCS optimization hit its iteration cap", RuntimeWarning, stacklevel=2)
    return ProductDistribution(best)


def _tables_of(chain: DecisionDiagram) -> np.ndarray:
    t = np.zeros((chain.n, 3))
    v = chain.root
    for i in range(chain.n):
        for j, lab in enumerate(LABEL_ORDER):
            e = chain.out[v].get(lab)
            if e is not None:
                t[i, j] = e.weight
        v = next(iter(chain.out[v].values())).target
    return t
