"""Named measurement schemes with vectorized shot simulation.

Every scheme draws bases, maps measured outcomes to single-shot energy
estimates and knows its exact single-shot variance on a state.

Diagram schemes (``dd``, ``dd-opt``, ``dd-ldf``, ``dd-ldf-opt``, ``lbcs``,
``lbcs-uniform``) use the covering estimator, where every term covered by
the drawn basis contributes. ``ldf`` is the classic grouping estimator:
draw one group with probability proportional to its l1 weight and estimate
only that group's members.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ddmeasure import baselines, estimator
from ddmeasure.ddcore import DecisionDiagram, build, sample_codes
from ddmeasure.optimize import OptimizeConfig, diagonal_cost, optimize
from ddmeasure.pauli import Hamiltonian, PauliString, pauli_product
from ddmeasure.simulator import StateVector, basis_probabilities, expectation, outcomes_from_indices

SCHEMES = ("dd", "dd-opt", "dd-ldf", "dd-ldf-opt", "lbcs", "lbcs-uniform", "ldf")


def _term_arrays(h: Hamiltonian):
    terms = h.non_identity_terms()
    alphas = np.array([a for a, _ in terms])
    codes = np.array([p.codes() for _, p in terms], dtype=np.int8).reshape(-1, h.n)
    return terms, alphas, codes


def coverage_and_parity(term_codes: np.ndarray, bases: np.ndarray,
                        outcomes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``(S, L)`` boolean coverage and ``+-1`` parities on each term's support."""
    supp = term_codes != 0
    agree = (bases[:, None, :] == term_codes[None, :, :]) | ~supp[None, :, :]
    covered = agree.all(axis=2)
    neg = (outcomes[:, None, :] < 0) & supp[None, :, :]
    parity = 1 - 2 * (neg.sum(axis=2) & 1)
    return covered, parity


def simulate_outcomes(state: StateVector, bases: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Born-rule outcomes for each row of ``bases``, one shot per row."""
    out = np.empty(bases.shape, dtype=np.int8)
    if bases.shape[0] == 0:
        return out
    uniq, inverse = np.unique(bases, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    for u, row in enumerate(uniq):
        rows = np.flatnonzero(inverse == u)
        probs = basis_probabilities(state, PauliString.from_codes(row))
        idx = rng.choice(probs.size, size=rows.size, p=probs)
        out[rows] = outcomes_from_indices(idx, state.n)
    return out


@dataclass
class DDScheme:
    name: str
    h: Hamiltonian
    dd: DecisionDiagram
    zetas: np.ndarray = field(init=False)

    def __post_init__(self):
        self.zetas = estimator.term_zetas(self.h, self.dd)

    def draw(self, rng: np.random.Generator, size: int):
        return sample_codes(self.dd, rng, size), None

    def values(self, bases: np.ndarray, tags, outcomes: np.ndarray) -> np.ndarray:
        _, alphas, codes = _term_arrays(self.h)
        covered, parity = coverage_and_parity(codes, bases, outcomes)
        return (covered * parity) @ (alphas / self.zetas)

    def variance(self, state: StateVector) -> float:
        return estimator.exact_variance(self.h, self.dd, state)

    def cost(self) -> float:
        return diagonal_cost(self.dd, self.h)


@dataclass
class GroupingScheme:
    name: str
    h: Hamiltonian
    grouping: baselines.Grouping
    probs: np.ndarray = field(init=False)

    def __post_init__(self):
        w = self.grouping.l1_weights(self.h)
        self.probs = w / w.sum()

    @property
    def zetas(self) -> np.ndarray:
        """Probability that each term's own group is drawn."""
        index = {i: k for k, g in enumerate(self.grouping.groups) for i in g.members}
        pos = [i for i, (a, p) in enumerate(self.h.terms) if a != 0.0 and not p.is_identity]
        return np.array([self.probs[index[i]] for i in pos])

    def draw(self, rng: np.random.Generator, size: int):
        tags = rng.choice(len(self.probs), size=size, p=self.probs)
        bases = np.array([g.basis.codes() for g in self.grouping.groups], dtype=np.int8)
        return bases[tags].reshape(size, self.h.n), tags

    def values(self, bases: np.ndarray, tags: np.ndarray, outcomes: np.ndarray) -> np.ndarray:
        _, alphas, codes = _term_arrays(self.h)
        _, parity = coverage_and_parity(codes, bases, outcomes)
        member = (tags[:, None] == self._term_group()[None, :])
        return (member * parity) @ (alphas / self.zetas)

    def _term_group(self) -> np.ndarray:
        index = {i: k for k, g in enumerate(self.grouping.groups) for i in g.members}
        pos = [i for i, (a, p) in enumerate(self.h.terms) if a != 0.0 and not p.is_identity]
        return np.array([index[i] for i in pos])

    def variance(self, state: StateVector) -> float:
        """``sum_k <H_k^2> / p_k - E^2`` with ``H_k`` the k-th group's terms."""
        total = []
        for g, pk in zip(self.grouping.groups, self.probs):
            sq = 0.0
            for i in g.members:
                ai, pi = self.h.terms[i]
                for j in g.members:
                    aj, pj = self.h.terms[j]
                    # members of a group commute, so phase * <R> is real
                    prod = pauli_product(pi, pj)
                    sq += ai * aj * (prod.phase * expectation(state, prod.pauli)).real
            total.append(sq / pk)
        mean = math.fsum(a * expectation(state, p) for a, p in self.h.non_identity_terms())
        return max(math.fsum(total) - mean * mean, 0.0)

    def cost(self) -> float:
        _, alphas, _ = _term_arrays(self.h)
        return float(math.fsum(alphas**2 / self.zetas))


def make_scheme(name: str, h: Hamiltonian, cfg: OptimizeConfig | None = None):
    """Construct the named scheme for ``h``."""
    cfg = cfg or OptimizeConfig()
    if name == "dd":
        return DDScheme(name, h, build(h))
    if name == "dd-opt":
        return DDScheme(name, h, optimize(build(h), h, cfg))
    if name in ("dd-ldf", "dd-ldf-opt"):
        dd = baselines.grouping_to_dd(baselines.ldf_grouping(h), h)
        if name == "dd-ldf-opt":
            dd = optimize(dd, h, cfg)
        return DDScheme(name, h, dd)
    if name == "lbcs":
        beta = baselines.lbcs_optimize(h)
        return DDScheme(name, h, baselines.lbcs_chain(beta, h))
    if name == "lbcs-uniform":
        beta = baselines.ProductDistribution.uniform(h.n)
        return DDScheme(name, h, baselines.lbcs_chain(beta, h))
    if name == "ldf":
        return GroupingScheme(name, h, baselines.ldf_grouping(h))
    raise ValueError(f"unknown scheme {name!r}; choose from {', '.join(SCHEMES)}")


@dataclass(frozen=True)
class MonteCarloResult:
    shots: int
    mean: float
    stderr: float
    table_energy: float
    hits: np.ndarray

    @property
    def uncovered(self) -> int:
        return int(np.sum(self.hits == 0))


def run_shots(scheme, state: StateVector, shots: int, rng: np.random.Generator,
              chunk: int = 200_000):
    """Simulate ``shots`` single shots; returns ``(values, hits, parity_sums)``.

    ``values`` excludes the identity offset.
    """
    _, _, codes = _term_arrays(scheme.h)
    values = np.empty(shots)
    hits = np.zeros(codes.shape[0], dtype=np.int64)
    psum = np.zeros(codes.shape[0])
    done = 0
    while done < shots:
        size = min(chunk, shots - done)
        bases, tags = scheme.draw(rng, size)
        outcomes = simulate_outcomes(state, bases, rng)
        values[done:done + size] = scheme.values(bases, tags, outcomes)
        covered, parity = coverage_and_parity(codes, bases, outcomes)
        hits += covered.sum(axis=0)
        psum += (covered * parity).sum(axis=0)
        done += size
    return values, hits, psum


def monte_carlo(scheme, state: StateVector, shots: int, rng: np.random.Generator) -> MonteCarloResult:
    """Mean single-shot estimate and the running-mean table estimate."""
    terms, alphas, _ = _term_arrays(scheme.h)
    offset = scheme.h.identity_coefficient
    if shots == 0:
        return MonteCarloResult(0, offset, math.nan, offset, np.zeros(len(terms), dtype=np.int64))
    values, hits, psum = run_shots(scheme, state, shots, rng)
    means = np.divide(psum, hits, out=np.zeros_like(psum), where=hits > 0)
    stderr = float(values.std(ddof=1) / math.sqrt(shots)) if shots > 1 else math.nan
    return MonteCarloResult(shots, offset + float(values.mean()), stderr,
                            offset + float(alphas @ means), hits)
