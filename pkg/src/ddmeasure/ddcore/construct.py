"""Building a decision diagram from a Hamiltonian.

The pipeline is

    preprocess -> build_initial -> normalize -> merge_equivalent
               -> remove_identities -> merge_equivalent

and every stage returns a fresh diagram, leaving its input untouched.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from ddmeasure.ddcore.diagram import (
    LABEL_ORDER,
    DDInvariantError,
    DecisionDiagram,
    Edge,
    compile_dd,
    forward_masses,
)
from ddmeasure.pauli import Hamiltonian, PauliError, PauliString, join


@dataclass(frozen=True)
class ReducedPauliList:
    """Positive weights on distinct, non-identity Pauli patterns."""

    n: int
    terms: tuple[tuple[float, PauliString], ...]

    def __post_init__(self):
        if not self.terms:
            raise ValueError("reduced list is empty")
        seen = set()
        for w, p in self.terms:
            if p.n != self.n:
                raise PauliError(f"term {p} has length {p.n}, expected {self.n}")
            if not w > 0:
                raise ValueError(f"weight of {p} must be positive, got {w}")
            if p.is_identity:
                raise ValueError("reduced list may not contain the identity")
            if p in seen:
                raise ValueError(f"duplicate pattern {p}")
            seen.add(p)

    def __len__(self) -> int:
        return len(self.terms)

    def weight(self, p: PauliString | str) -> float:
        if isinstance(p, str):
            p = PauliString.from_str(p)
        for w, q in self.terms:
            if q == p:
                return w
        return 0.0


def _mask_arrays(paulis: Sequence[PauliString]) -> tuple[np.ndarray, np.ndarray]:
    dtype = np.uint64 if paulis[0].n <= 64 else object
    x = np.array([p.x for p in paulis], dtype=dtype)
    z = np.array([p.z for p in paulis], dtype=dtype)
    return x, z


def compatibility_matrix(paulis: Sequence[PauliString]) -> np.ndarray:
    """Boolean matrix of pairwise compatibility (diagonal set to False)."""
    x, z = _mask_arrays(paulis)
    s = x | z
    shared = s[:, None] & s[None, :]
    diff = (x[:, None] ^ x[None, :]) | (z[:, None] ^ z[None, :])
    compat = (diff & shared) == 0
    compat = np.asarray(compat, dtype=bool)
    np.fill_diagonal(compat, False)
    return compat


def preprocess(h: Hamiltonian) -> ReducedPauliList:
    """Absolute values, identity dropped, compatible terms merged by join.

    Repeatedly picks the term with the most compatible partners (ties go to
    the lexicographically smallest word), replaces each partner ``Q`` by
    ``join(P_high, Q)`` with an equal share of ``|alpha_P_high|`` added, and
    removes ``P_high``. Terms that become equal are summed. Every round
    removes at least one term, so the loop terminates.
    """
    weights: dict[PauliString, float] = {}
    for alpha, p in h.non_identity_terms():
        weights[p] = weights.get(p, 0.0) + abs(alpha)
    if not weights:
        raise ValueError("Hamiltonian has no non-identity term to measure")
    while len(weights) > 1:
        keys = list(weights)
        compat = compatibility_matrix(keys)
        counts = compat.sum(axis=1)
        best = int(counts.max())
        if best == 0:
            break
        p_high = min(k for k, c in zip(keys, counts) if c == best)
        i_high = keys.index(p_high)
        share = weights[p_high] / best
        merged: dict[PauliString, float] = {}
        for j, q in enumerate(keys):
            if j == i_high:
                continue
            w = weights[q]
            if compat[i_high, j]:
                q = join(p_high, q)
                w += share
            merged[q] = merged.get(q, 0.0) + w
        weights = merged
    return ReducedPauliList(h.n, tuple((w, p) for p, w in weights.items()))


def build_initial(r: ReducedPauliList) -> DecisionDiagram:
    """Prefix trie with each term's weight on its final edge."""
    dd = DecisionDiagram(r.n)
    for w, p in r.terms:
        v = dd.root
        letters = p.letters
        for k, ch in enumerate(letters[:-1]):
            e = dd.out[v].get(ch)
            if e is None:
                e = Edge(dd.add_vertex(k + 1), 1.0)
                dd.out[v][ch] = e
            v = e.target
        dd.out[v][letters[-1]] = Edge(dd.terminal, w)
    return dd


def normalize(dd: DecisionDiagram) -> DecisionDiagram:
    """Push outgoing weight sums upward so each vertex sums to one."""
    dd = dd.copy()
    incoming = dd.in_edges()
    for v in reversed(dd.vertices):
        if v == dd.terminal:
            continue
        edges = dd.out[v]
        total = sum(e.weight for e in edges.values())
        if not edges or total <= 0:
            raise DDInvariantError(f"vertex {v} has zero outgoing weight")
        for e in edges.values():
            e.weight /= total
        for src, label in incoming[v]:
            dd.out[src][label].weight *= total
    return dd


def merge_equivalent(dd: DecisionDiagram) -> DecisionDiagram:
    """Unify vertices with identical outgoing (label, weight, target) sets."""
    dd = dd.copy()
    rep: dict[int, int] = {}
    for k in range(dd.n - 1, -1, -1):
        table: dict[tuple, int] = {}
        for v in dd.vertices_at(k):
            for e in dd.out[v].values():
                e.target = rep.get(e.target, e.target)
            sig = tuple(sorted((lab, e.weight, e.target) for lab, e in dd.out[v].items()))
            keeper = table.get(sig)
            if keeper is None:
                table[sig] = v
            else:
                rep[v] = keeper
                for lab, e in dd.out[v].items():
                    kept = dd.out[keeper][lab]
                    kept.virtual = kept.virtual and e.virtual
    for v in rep:
        del dd.out[v]
        del dd.layer[v]
    return dd


def _combine_parallel(dd: DecisionDiagram) -> None:
    for v in dd.vertices:
        edges = dd.out[v]
        ident = edges.get("I")
        if ident is None:
            continue
        parallel = [lab for lab in LABEL_ORDER
                    if lab in edges and edges[lab].target == ident.target]
        if parallel:
            lab = min(parallel, key=lambda s: edges[s].weight)
            edges[lab].weight += ident.weight
            edges[lab].virtual = False
            del edges["I"]


def _split_lonely(dd: DecisionDiagram) -> None:
    for v in dd.vertices:
        edges = dd.out[v]
        if set(edges) == {"I"}:
            ident = edges.pop("I")
            for lab in LABEL_ORDER:
                edges[lab] = Edge(ident.target, ident.weight / 3.0, True)


def _merge_into(dd: DecisionDiagram, v: int, into: int) -> None:
    """Fold vertex ``v``'s outgoing edges into vertex ``into``."""
    if v == into:
        return
    if dd.layer[v] != dd.layer[into]:
        raise DDInvariantError("merge across layers")
    for lab, e in list(dd.out[v].items()):
        if lab == "I":
            raise DDInvariantError("identity edge met during vertex merging")
        mine = dd.out[into].get(lab)
        if mine is None:
            dd.out[into][lab] = Edge(e.target, e.weight, e.virtual)
        elif mine.target == e.target:
            mine.virtual = mine.virtual and e.virtual
        else:
            mine.weight += e.weight
            mine.virtual = mine.virtual and e.virtual
            _merge_into(dd, e.target, mine.target)


def _merge_remaining(dd: DecisionDiagram) -> None:
    for k in range(dd.n - 1, -1, -1):
        for u in dd.vertices_at(k):
            edges = dd.out[u]
            ident = edges.get("I")
            if ident is None:
                continue
            siblings = [lab for lab in LABEL_ORDER if lab in edges]
            lab = min(siblings, key=lambda s: edges[s].weight)
            del edges["I"]
            edges[lab].weight += ident.weight
            edges[lab].virtual = False
            _merge_into(dd, ident.target, edges[lab].target)


def _covers_all(dd: DecisionDiagram, codes: np.ndarray) -> bool:
    return bool(np.all(forward_masses(compile_dd(dd), codes)[-1][:, 0] > 0))


def _prune_virtual(dd: DecisionDiagram, terms: Sequence[PauliString]) -> None:
    codes = np.array([p.codes() for p in terms], dtype=np.int8).reshape(-1, dd.n)
    if not _covers_all(dd, codes):
        raise DDInvariantError("diagram does not cover every term before pruning")
    for k in range(dd.n - 1, -1, -1):
        for v in dd.vertices_at(k):
            for lab in LABEL_ORDER:
                e = dd.out[v].get(lab)
                if e is None or not e.virtual or len(dd.out[v]) == 1:
                    continue
                del dd.out[v][lab]
                if _covers_all(dd, codes):
                    total = sum(x.weight for x in dd.out[v].values())
                    for x in dd.out[v].values():
                        x.weight /= total
                else:
                    dd.out[v][lab] = e
                    dd.out[v] = {s: dd.out[v][s] for s in LABEL_ORDER if s in dd.out[v]}


def remove_identities(dd: DecisionDiagram,
                      terms: Iterable[PauliString] | None = None) -> DecisionDiagram:
    """Eliminate identity edges; with ``terms``, also drop unneeded virtual edges.

    Parallel identity edges fold into the lightest parallel edge; an
    identity edge that is a vertex's only edge splits into three virtual
    edges; any other identity edge is folded into its lightest sibling and
    its target vertex is merged into the sibling's target, bottom layer
    first. Pruning a virtual edge is kept only if every term in ``terms``
    stays coverable.
    """
    dd = dd.copy()
    _combine_parallel(dd)
    _split_lonely(dd)
    _merge_remaining(dd)
    dd.prune_unreachable()
    if terms is not None:
        terms = [p for p in terms if not p.is_identity]
        if terms:
            _prune_virtual(dd, terms)
            dd.prune_unreachable()
    dd.normalize_vertices()
    return dd


def build_from_reduced(r: ReducedPauliList,
                       terms: Iterable[PauliString] | None = None) -> DecisionDiagram:
    dd = build_initial(r)
    dd = normalize(dd)
    dd = merge_equivalent(dd)
    dd = remove_identities(dd, terms)
    dd = merge_equivalent(dd)
    dd.normalize_vertices()
    dd.validate()
    return dd


def build(h: Hamiltonian) -> DecisionDiagram:
    """Decision diagram compatible with every non-identity term of ``h``."""
    r = preprocess(h)
    return build_from_reduced(r, [p for _, p in h.non_identity_terms()])
