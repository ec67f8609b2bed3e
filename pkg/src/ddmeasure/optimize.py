"""Diagonal cost and iterative reweighting of decision-diagram edges.

The diagonal cost ``sum_P alpha_P^2 / zeta(P)`` is minimized under the
constraint that every vertex's outgoing weights sum to one. Its stationarity
condition gives a closed-form target for each edge ``e`` leaving ``v``:

    target_e  ~  sum_Q alpha_Q^2 / zeta(Q)^2 * m(Q, e)

where ``m(Q, e)`` is the probability mass of bases that cover ``Q`` and use
``e``. Forward and backward sweeps over the layers give every ``m(Q, e)`` at
once. Each pass moves the weights a fraction ``delta`` of the way to the
targets.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from ddmeasure.ddcore import DecisionDiagram, zeta_many
from ddmeasure.ddcore.diagram import backward_masses, compile_dd, edge_match, forward_masses
from ddmeasure.pauli import Hamiltonian


@dataclass(frozen=True)
class OptimizeConfig:
    passes: int = 10
    delta: float = 0.5
    floor: float = 1e-6

    def __post_init__(self):
        if self.passes < 0:
            raise ValueError("passes must be non-negative")
        if not 0.0 <= self.delta < 1.0:
            raise ValueError("delta must lie in [0, 1)")
        if not 0.0 <= self.floor < 1.0 / 3.0:
            raise ValueError("floor must lie in [0, 1/3)")


def _terms(h: Hamiltonian):
    terms = h.non_identity_terms()
    alphas = np.array([a for a, _ in terms])
    codes = np.array([p.codes() for _, p in terms], dtype=np.int8).reshape(-1, h.n)
    return alphas, codes


def diagonal_cost(dd: DecisionDiagram, h: Hamiltonian) -> float:
    """``sum_P alpha_P^2 / zeta(P)``; infinite if some term is never covered."""
    alphas, codes = _terms(h)
    if codes.shape[0] == 0:
        return 0.0
    z = zeta_many(dd, codes)
    if np.any(z <= 0):
        return math.inf
    return float(math.fsum(alphas**2 / z))


def _targets(dd: DecisionDiagram, alphas: np.ndarray, codes: np.ndarray):
    """Per-layer arrays of target weights aligned with the compiled edges."""
    cd = compile_dd(dd)
    fwd = forward_masses(cd, codes)
    bwd = backward_masses(cd, codes)
    z = fwd[-1][:, 0]
    if np.any(z <= 0):
        raise ValueError("diagram does not cover every term")
    c = alphas**2 / z**2
    out = []
    for k in range(cd.n):
        mass = fwd[k][:, cd.src[k]] * (edge_match(cd, codes, k) * cd.weight[k]) \
            * bwd[k + 1][:, cd.dst[k]]
        num = c @ mass
        per_vertex = num @ cd.src_onehot[k]
        denom = per_vertex[cd.src[k]]
        target = np.where(denom > 0, num / np.where(denom > 0, denom, 1.0), cd.weight[k])
        if np.any(per_vertex <= 0):
            warnings.warn("vertex with zero update mass keeps its weights", RuntimeWarning,
                          stacklevel=3)
        out.append(target)
    return cd, out


def closed_form_update(dd: DecisionDiagram, h: Hamiltonian) -> dict[tuple[int, str], float]:
    """Target weight for every edge, keyed by ``(source vertex, label)``."""
    alphas, codes = _terms(h)
    cd, targets = _targets(dd, alphas, codes)
    result = {}
    for k in range(cd.n):
        for e, t in enumerate(targets[k]):
            v = cd.layer_ids[k][cd.src[k][e]]
            result[(v, "IXYZ"[cd.label[k][e]])] = float(t)
    return result


def _apply_floor(weights: dict[str, float], floor: float) -> dict[str, float]:
    total = sum(weights.values())
    w = {lab: x / total for lab, x in weights.items()}
    if floor <= 0:
        return w
    pinned: set[str] = set()
    while True:
        low = {lab for lab, x in w.items() if lab not in pinned and x < floor}
        if not low:
            return w
        pinned |= low
        free = [lab for lab in w if lab not in pinned]
        free_mass = sum(w[lab] for lab in free)
        budget = 1.0 - floor * len(pinned)
        for lab in pinned:
            w[lab] = floor
        for lab in free:
            w[lab] = w[lab] * budget / free_mass


def reweight_step(dd: DecisionDiagram, alphas: np.ndarray, codes: np.ndarray,
                  delta: float, floor: float) -> DecisionDiagram:
    """One damped move towards the closed-form targets, returned as a copy."""
    cd, targets = _targets(dd, alphas, codes)
    new = dd.copy()
    for k in range(cd.n):
        for j, v in enumerate(cd.layer_ids[k]):
            idx = np.flatnonzero(cd.src[k] == j)
            if idx.size == 0:
                continue
            proposal = {}
            for e in idx:
                lab = "IXYZ"[cd.label[k][e]]
                proposal[lab] = (1.0 - delta) * cd.weight[k][e] + delta * targets[k][e]
            for lab, x in _apply_floor(proposal, floor).items():
                new.out[v][lab].weight = float(x)
    return new


def optimize(dd: DecisionDiagram, h: Hamiltonian, cfg: OptimizeConfig | None = None,
             history: list[float] | None = None) -> DecisionDiagram:
    """Reweight ``dd`` for ``cfg.passes`` damped passes; topology is unchanged.

    If ``history`` is given, the diagonal cost before the first pass and
    after every pass is appended to it.
    """
    cfg = cfg or OptimizeConfig()
    alphas, codes = _terms(h)
    if history is not None:
        history.append(diagonal_cost(dd, h))
    for _ in range(cfg.passes):
        if cfg.delta == 0.0:
            dd = dd.copy()
        else:
            dd = reweight_step(dd, alphas, codes, cfg.delta, cfg.floor)
        if history is not None:
            history.append(diagonal_cost(dd, h))
    return dd
