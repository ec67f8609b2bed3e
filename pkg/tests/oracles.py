"""Reference computations used as test oracles.

Everything here works on plain strings, dense matrices and explicit path
enumeration, independently of the bit-mask and dynamic-programming code in
the package.
"""

from __future__ import annotations

import itertools

import numpy as np

from ddmeasure.ddcore import DecisionDiagram, Edge

MATS = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}
# columns are the +1 and -1 eigenvectors
EIGVECS = {
    "X": np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2),
    "Y": np.array([[1, 1], [1j, -1j]], dtype=complex) / np.sqrt(2),
    "Z": np.eye(2, dtype=complex),
}


def dense(word: str) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for ch in word:
        out = np.kron(out, MATS[ch])
    return out


def dense_h(terms) -> np.ndarray:
    """``terms`` is an iterable of ``(alpha, word)``."""
    terms = list(terms)
    n = len(terms[0][1])
    out = np.zeros((2**n, 2**n), dtype=complex)
    for a, w in terms:
        out += a * dense(w)
    return out


def str_covers(basis: str, p: str) -> bool:
    return all(q == "I" or q == b for b, q in zip(basis, p))


def str_compatible(p: str, q: str) -> bool:
    return all(a == "I" or b == "I" or a == b for a, b in zip(p, q))


def str_join(p: str, q: str) -> str:
    return "".join(a if a != "I" else b for a, b in zip(p, q))


def all_bases(n: int):
    return ("".join(t) for t in itertools.product("XYZ", repeat=n))


def path_distribution(dd: DecisionDiagram) -> dict[str, float]:
    """Every maximal path's word and probability, by depth-first search."""
    out: dict[str, float] = {}

    def walk(v, word, prob):
        if v == dd.terminal:
            out[word] = out.get(word, 0.0) + prob
            return
        for lab, e in dd.out[v].items():
            walk(e.target, word + lab, prob * e.weight)

    walk(dd.root, "", 1.0)
    return out


def brute_zeta(dd: DecisionDiagram, p: str) -> float:
    return sum(pr for w, pr in path_distribution(dd).items() if str_covers(w, p))


def random_dd(rng: np.random.Generator, n: int, max_width: int = 3,
              smooth: float = 0.0) -> DecisionDiagram:
    """Random layered diagram with Dirichlet weights, every vertex used.

    ``smooth`` mixes each vertex's weights with the uniform distribution,
    keeping coverage probabilities away from zero for sampling tests.
    """
    widths = [1] + [int(rng.integers(1, max_width + 1)) for _ in range(n - 1)] + [1]
    ids, nxt = [], 0
    for w in widths:
        ids.append(list(range(nxt, nxt + w)))
        nxt += w
    layer = {v: k for k, vs in enumerate(ids) for v in vs}
    out = {v: {} for v in layer}
    for k in range(n):
        below = ids[k + 1]
        needs = list(below)
        rng.shuffle(needs)
        srcs = ids[k]
        for v in srcs:
            labels = [lab for lab in "XYZ" if rng.random() < 0.6] or [str(rng.choice(list("XYZ")))]
            out[v] = {lab: None for lab in labels}
        # give every lower vertex at least one parent, widening if needed
        slots = [(v, lab) for v in srcs for lab in out[v]]
        free_labels = [(v, lab) for v in srcs for lab in "XYZ" if lab not in out[v]]
        while len(slots) < len(needs):
            v, lab = free_labels.pop(int(rng.integers(len(free_labels))))
            out[v][lab] = None
            slots.append((v, lab))
        rng.shuffle(slots)
        for i, (v, lab) in enumerate(slots):
            target = needs[i] if i < len(needs) else int(rng.choice(below))
            out[v][lab] = target
        for v in srcs:
            w = (1 - smooth) * rng.dirichlet(np.ones(len(out[v]))) + smooth / len(out[v])
            out[v] = {lab: Edge(t, float(x)) for (lab, t), x in zip(out[v].items(), w)}
    root, terminal = ids[0][0], ids[-1][0]
    dd = DecisionDiagram(n, root, terminal, layer, out)
    dd.validate()
    return dd


def random_pattern(rng: np.random.Generator, n: int, p_identity: float = 0.4) -> str:
    return "".join("I" if rng.random() < p_identity else str(rng.choice(list("XYZ")))
                   for _ in range(n))


def compatible_terms(rng: np.random.Generator, dd: DecisionDiagram, count: int):
    """``(alpha, word)`` pairs each covered by some path of ``dd``."""
    dist = path_distribution(dd)
    words = list(dist)
    terms = {}
    while len(terms) < count:
        base = words[int(rng.integers(len(words)))]
        word = "".join("I" if rng.random() < 0.4 else ch for ch in base)
        if set(word) == {"I"}:
            continue
        terms[word] = float(rng.normal())
    return [(a, w) for w, a in terms.items()]


def ground_state_dense(mat: np.ndarray):
    vals, vecs = np.linalg.eigh(mat)
    return vals[0], vecs[:, 0]


def born_outcomes(psi: np.ndarray, basis: str, rng: np.random.Generator, size: int) -> np.ndarray:
    """Sample +-1 outcome rows by projecting onto product eigenvectors."""
    n = len(basis)
    u = np.ones((1, 1), dtype=complex)
    for ch in basis:
        u = np.kron(u, EIGVECS[ch])
    probs = np.abs(u.conj().T @ psi) ** 2
    probs /= probs.sum()
    idx = rng.choice(2**n, size=size, p=probs)
    bits = (idx[:, None] >> np.arange(n - 1, -1, -1)) & 1
    return 1 - 2 * bits


def single_shot_values(terms, zetas: dict[str, float], basis: str, outcomes: np.ndarray) -> np.ndarray:
    """Covering estimator for one basis and a stack of outcome rows."""
    vals = np.zeros(outcomes.shape[0])
    for a, w in terms:
        if str_covers(basis, w):
            supp = [i for i, ch in enumerate(w) if ch != "I"]
            vals += a / zetas[w] * np.prod(outcomes[:, supp], axis=1)
    return vals


def monte_carlo_values(terms, dd: DecisionDiagram, psi: np.ndarray, rng: np.random.Generator,
                       shots: int) -> np.ndarray:
    """Single-shot estimates from enumerated path probabilities and Born sampling."""
    dist = path_distribution(dd)
    words = sorted(dist)
    probs = np.array([dist[w] for w in words])
    zetas = {w: sum(pr for b, pr in dist.items() if str_covers(b, w)) for _, w in terms}
    picks = rng.choice(len(words), size=shots, p=probs / probs.sum())
    vals = np.empty(shots)
    for k, basis in enumerate(words):
        mask = picks == k
        if mask.any():
            out = born_outcomes(psi, basis, rng, int(mask.sum()))
            vals[mask] = single_shot_values(terms, zetas, basis, out)
    return vals


def analytic_second_moment(terms, dd: DecisionDiagram, psi: np.ndarray) -> float:
    """Double sum over every ordered pair using dense products and path sums."""
    dist = path_distribution(dd)
    total = 0.0
    for a, p in terms:
        for b, q in terms:
            if not str_compatible(p, q):
                continue
            both = sum(pr for w, pr in dist.items() if str_covers(w, p) and str_covers(w, q))
            zp = sum(pr for w, pr in dist.items() if str_covers(w, p))
            zq = sum(pr for w, pr in dist.items() if str_covers(w, q))
            tr = np.vdot(psi, dense(p) @ dense(q) @ psi)
            total += a * b * both / (zp * zq) * tr.real
    return total
