"""Randomized single-shot energy estimator, its exact moments and bounds.

A shot draws a basis ``B`` from the diagram and measures every qubit. The
single-shot estimate is

    nu = sum_P alpha_P * [B covers P] / zeta(P) * mu(B, supp P)

which is unbiased for ``Tr(H rho)`` (identity term excluded). Its second
moment is ``sum_{P,Q} alpha_P alpha_Q g(P,Q) Tr(PQ rho)`` with
``g(P, Q) = zeta(join(P, Q)) / (zeta(P) zeta(Q))`` for compatible pairs and
zero otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ddmeasure.ddcore import DecisionDiagram, zeta, zeta_many
from ddmeasure.pauli import (
    Hamiltonian,
    PauliError,
    PauliString,
    compatible,
    covers,
    join,
    pauli_product,
)
from ddmeasure.simulator import StateVector, expectation


class IncompatibleDiagram(ValueError):
    """Some term with non-zero coefficient can never be covered."""


@dataclass(frozen=True)
class ShotRecord:
    basis: PauliString
    outcomes: tuple[int, ...]

    def __post_init__(self):
        if len(self.outcomes) != self.basis.n:
            raise ValueError("outcome count does not match basis length")
        if any(o not in (1, -1) for o in self.outcomes):
            raise ValueError("outcomes must be +1 or -1")
        if not self.basis.is_full_weight:
            raise PauliError(f"basis {self.basis} is not full weight")

    def parity(self, p: PauliString) -> int:
        """``mu(B, supp P)``: product of outcomes on the support of ``p``."""
        out = 1
        for i in p.support:
            out *= self.outcomes[i]
        return out


def term_zetas(h: Hamiltonian, dd: DecisionDiagram) -> np.ndarray:
    """``zeta`` of each non-identity term, raising if any is zero."""
    terms = h.non_identity_terms()
    z = zeta_many(dd, [p for _, p in terms])
    bad = [str(p) for (_, p), zp in zip(terms, z) if not zp > 0]
    if bad:
        raise IncompatibleDiagram(f"terms never covered: {', '.join(bad)}")
    return z


def single_shot_estimate(h: Hamiltonian, dd: DecisionDiagram, shot: ShotRecord,
                         zetas: np.ndarray | None = None) -> float:
    terms = h.non_identity_terms()
    if zetas is None:
        zetas = term_zetas(h, dd)
    total = 0.0
    for (alpha, p), zp in zip(terms, zetas):
        if covers(shot.basis, p):
            total += alpha / zp * shot.parity(p)
    return total


@dataclass
class EstimateTable:
    """Running per-term means of the measured parities."""

    counts: dict[PauliString, int] = field(default_factory=dict)
    means: dict[PauliString, float] = field(default_factory=dict)

    @classmethod
    def for_hamiltonian(cls, h: Hamiltonian) -> EstimateTable:
        terms = [p for _, p in h.non_identity_terms()]
        return cls({p: 0 for p in terms}, {p: 0.0 for p in terms})

    def uncovered(self) -> list[PauliString]:
        return [p for p, c in self.counts.items() if c == 0]


def update_table(table: EstimateTable, h: Hamiltonian, shot: ShotRecord) -> EstimateTable:
    for _, p in h.non_identity_terms():
        if covers(shot.basis, p):
            c = table.counts.get(p, 0)
            mu = table.means.get(p, 0.0)
            table.means[p] = (shot.parity(p) + c * mu) / (c + 1)
            table.counts[p] = c + 1
    return table


def table_estimate(table: EstimateTable, h: Hamiltonian) -> float:
    """``sum_P alpha_P mu_P``; terms never hit contribute zero."""
    return sum(alpha * table.means.get(p, 0.0) for alpha, p in h.non_identity_terms())


def g_factor(p: PauliString, q: PauliString, dd: DecisionDiagram) -> float:
    if not compatible(p, q):
        return 0.0
    zp, zq = zeta(dd, p), zeta(dd, q)
    if zp <= 0 or zq <= 0:
        raise IncompatibleDiagram(f"zeta vanishes for {p if zp <= 0 else q}")
    return zeta(dd, join(p, q)) / (zp * zq)


def _pair_tables(h: Hamiltonian, dd: DecisionDiagram, state: StateVector):
    terms = h.non_identity_terms()
    alphas = np.array([a for a, _ in terms])
    paulis = [p for _, p in terms]
    zp = term_zetas(h, dd)
    pairs, joins, ops = [], [], {}
    for i, p in enumerate(paulis):
        for j in range(i, len(paulis)):
            q = paulis[j]
            if compatible(p, q):
                pairs.append((i, j))
                joins.append(join(p, q))
                prod = pauli_product(p, q)
                ops.setdefault(prod.pauli, None)
                pairs[-1] += (prod,)
    zj = zeta_many(dd, joins) if joins else np.zeros(0)
    ev = {r: expectation(state, r) for r in ops}
    return alphas, zp, pairs, zj, ev


def second_moment(h: Hamiltonian, dd: DecisionDiagram, state: StateVector) -> float:
    """``E[nu^2]`` for one shot."""
    alphas, zp, pairs, zj, ev = _pair_tables(h, dd, state)
    contrib = np.zeros(len(pairs))
    for k, (i, j, prod) in enumerate(pairs):
        # P and Q commute whenever compatible, so phase * <R> is real
        tr = (prod.phase * ev[prod.pauli]).real
        mult = 1.0 if i == j else 2.0
        contrib[k] = mult * alphas[i] * alphas[j] * zj[k] / (zp[i] * zp[j]) * tr
    return float(math.fsum(contrib))


def exact_variance(h: Hamiltonian, dd: DecisionDiagram, state: StateVector,
                   shots: int = 1) -> float:
    """Variance of the mean of ``shots`` single-shot estimates."""
    if shots < 1:
        raise ValueError("shots must be positive")
    mean = math.fsum(a * expectation(state, p) for a, p in h.non_identity_terms())
    var = second_moment(h, dd, state) - mean * mean
    if var < 0:
        if var < -1e-9:
            raise ArithmeticError(f"negative variance {var!r}")
        var = 0.0
    return var / shots


def estimate_energy(h: Hamiltonian, dd: DecisionDiagram, shots: Sequence[ShotRecord]) -> float:
    """Mean of single-shot estimates plus the identity offset."""
    zetas = term_zetas(h, dd)
    if not shots:
        return h.identity_coefficient
    vals = [single_shot_estimate(h, dd, s, zetas) for s in shots]
    return h.identity_coefficient + math.fsum(vals) / len(vals)


def _eta(epsilon: float) -> float:
    return -math.expm1(-epsilon * epsilon / 2.0)


def inconfidence_bound(terms: Sequence[PauliString], bases: Sequence[PauliString],
                       epsilon: float) -> float:
    """``2 sum_l prod_m (1 - eta [B_m covers P_l])``, ``eta = 1 - exp(-eps^2/2)``."""
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    log_keep = math.log1p(-_eta(epsilon))
    total = 0.0
    for p in terms:
        hits = sum(1 for b in bases if covers(b, p))
        total += math.exp(hits * log_keep)
    return 2.0 * total


def shots_bound(terms: Sequence[PauliString], dd: DecisionDiagram, epsilon: float,
                delta: float) -> float:
    """Smallest integer ``M >= ln(2L/delta) / eta * max_l 1/zeta(P_l)``.

    Returns ``math.inf`` when some term has zero coverage probability.
    """
    if not 0 < epsilon < 1 or not 0 < delta < 1:
        raise ValueError("epsilon and delta must lie in (0, 1)")
    z = zeta_many(dd, list(terms))
    if np.any(z <= 0):
        return math.inf
    return shots_bound_from_zetas(z, epsilon, delta)


def shots_bound_from_zetas(zetas: Sequence[float], epsilon: float, delta: float) -> int:
    zmin = float(min(zetas))
    value = math.log(2 * len(zetas) / delta) / _eta(epsilon) / zmin
    return math.ceil(value)
