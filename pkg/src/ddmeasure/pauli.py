"""Pauli strings, qubit Hamiltonians and phase-correct Pauli algebra.

A Pauli string is stored in symplectic form: two integer bit masks ``x`` and
``z``, one bit per qubit, with qubit ``i`` (the ``i``-th letter from the
left) mapped to bit ``n - 1 - i``. With that convention the masks act
directly on computational-basis indices in the usual Kronecker ordering,
and ``covers``/``compatible``/``join`` reduce to a handful of mask
operations.

    ====== === ===
    letter  x   z
    ====== === ===
    I       0   0
    X       1   0
    Y       1   1
    Z       0   1
    ====== === ===
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, TextIO

import numpy as np

LETTERS = "IXYZ"
# letter -> (x bit, z bit)
_BITS = {"I": (0, 0), "X": (1, 0), "Y": (1, 1), "Z": (0, 1)}
_LETTER_OF = {bits: letter for letter, bits in _BITS.items()}


class PauliError(ValueError):
    """Invalid Pauli string or an operation on mismatched strings."""


class HamiltonianFormatError(ValueError):
    """Malformed Hamiltonian text; ``lineno`` is 1-based (0 if unknown)."""

    def __init__(self, message: str, lineno: int = 0):
        self.lineno = lineno
        if lineno:
            message = f"line {lineno}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class PauliString:
    """Length-``n`` word over ``{I, X, Y, Z}``."""

    n: int
    x: int
    z: int

    def __post_init__(self):
        if self.n <= 0:
            raise PauliError(f"qubit count must be positive, got {self.n}")
        limit = 1 << self.n
        if not (0 <= self.x < limit and 0 <= self.z < limit):
            raise PauliError("bit masks exceed qubit count")

    @classmethod
    def from_str(cls, letters: str) -> PauliString:
        letters = letters.strip()
        if not letters:
            raise PauliError("empty Pauli string")
        x = z = 0
        for ch in letters:
            try:
                bx, bz = _BITS[ch]
            except KeyError:
                raise PauliError(f"invalid Pauli letter {ch!r} in {letters!r}") from None
            x = (x << 1) | bx
            z = (z << 1) | bz
        return cls(len(letters), x, z)

    @classmethod
    def identity(cls, n: int) -> PauliString:
        return cls(n, 0, 0)

    @property
    def letters(self) -> str:
        out = []
        for i in range(self.n):
            bit = self.n - 1 - i
            out.append(_LETTER_OF[((self.x >> bit) & 1, (self.z >> bit) & 1)])
        return "".join(out)

    def __str__(self) -> str:
        return self.letters

    def __repr__(self) -> str:
        return f"PauliString({self.letters!r})"

    def __len__(self) -> int:
        return self.n

    def __getitem__(self, i: int) -> str:
        if not -self.n <= i < self.n:
            raise IndexError(i)
        i %= self.n
        bit = self.n - 1 - i
        return _LETTER_OF[((self.x >> bit) & 1, (self.z >> bit) & 1)]

    # lexicographic on the letter word, I < X < Y < Z
    def __lt__(self, other: PauliString) -> bool:
        if not isinstance(other, PauliString):
            return NotImplemented
        return self.letters < other.letters

    @property
    def support_mask(self) -> int:
        return self.x | self.z

    @property
    def support(self) -> tuple[int, ...]:
        """Qubit positions carrying a non-identity letter."""
        mask = self.support_mask
        return tuple(i for i in range(self.n) if (mask >> (self.n - 1 - i)) & 1)

    @property
    def weight(self) -> int:
        return self.support_mask.bit_count()

    @property
    def is_identity(self) -> bool:
        return self.support_mask == 0

    @property
    def is_full_weight(self) -> bool:
        return self.support_mask == (1 << self.n) - 1

    @property
    def y_count(self) -> int:
        return (self.x & self.z).bit_count()

    def codes(self) -> np.ndarray:
        """Letters as integer codes ``I=0, X=1, Y=2, Z=3``, qubit order."""
        return np.array([LETTERS.index(ch) for ch in self.letters], dtype=np.int8)

    @classmethod
    def from_codes(cls, codes: Iterable[int]) -> PauliString:
        return cls.from_str("".join(LETTERS[int(c)] for c in codes))

    def to_matrix(self) -> np.ndarray:
        """Dense ``2**n x 2**n`` matrix; only sensible for small ``n``."""
        single = {
            "I": np.eye(2, dtype=complex),
            "X": np.array([[0, 1], [1, 0]], dtype=complex),
            "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
            "Z": np.array([[1, 0], [0, -1]], dtype=complex),
        }
        out = np.ones((1, 1), dtype=complex)
        for ch in self.letters:
            out = np.kron(out, single[ch])
        return out


def _check_lengths(p: PauliString, q: PauliString) -> None:
    if p.n != q.n:
        raise PauliError(f"length mismatch: {p.n} vs {q.n}")


def covers(basis: PauliString, p: PauliString) -> bool:
    """True iff the full-weight ``basis`` agrees with ``p`` on ``supp(p)``."""
    _check_lengths(basis, p)
    if not basis.is_full_weight:
        raise PauliError(f"basis {basis} is not full weight")
    return (((basis.x ^ p.x) | (basis.z ^ p.z)) & p.support_mask) == 0


def compatible(p: PauliString, q: PauliString) -> bool:
    """No qubit where both strings are non-identity and differ."""
    _check_lengths(p, q)
    shared = p.support_mask & q.support_mask
    return (((p.x ^ q.x) | (p.z ^ q.z)) & shared) == 0


def join(p: PauliString, q: PauliString) -> PauliString:
    """Positionwise union of two compatible strings.

    The full-weight bases covering both ``p`` and ``q`` are exactly the
    bases covering ``join(p, q)``.
    """
    if not compatible(p, q):
        raise PauliError(f"{p} and {q} are not compatible")
    free = ~p.support_mask
    return PauliString(p.n, p.x | (q.x & free), p.z | (q.z & free))


@dataclass(frozen=True)
class PhasedPauli:
    """``i**k * pauli`` with ``k`` in ``0..3``."""

    k: int
    pauli: PauliString

    def __post_init__(self):
        if self.k not in (0, 1, 2, 3):
            raise PauliError(f"phase exponent must be in 0..3, got {self.k}")

    @property
    def phase(self) -> complex:
        return (1, 1j, -1, -1j)[self.k]

    def __str__(self) -> str:
        return ("+", "+i", "-", "-i")[self.k] + self.pauli.letters


def pauli_product(p: PauliString, q: PauliString) -> PhasedPauli:
    """Operator product ``p @ q`` as a phase times a Pauli string."""
    _check_lengths(p, q)
    # P = i^{|x1&z1|} X^x1 Z^z1 and Z^z1 X^x2 = (-1)^{|z1&x2|} X^x2 Z^z1
    rx, rz = p.x ^ q.x, p.z ^ q.z
    k = p.y_count + q.y_count - (rx & rz).bit_count() + 2 * (p.z & q.x).bit_count()
    return PhasedPauli(k % 4, PauliString(p.n, rx, rz))


@dataclass(frozen=True)
class Hamiltonian:
    """``H = sum_P alpha_P P`` with unique Pauli strings of a common length."""

    n: int
    terms: tuple[tuple[float, PauliString], ...]

    def __post_init__(self):
        seen = set()
        for alpha, p in self.terms:
            if p.n != self.n:
                raise PauliError(f"term {p} has length {p.n}, expected {self.n}")
            if not math.isfinite(alpha):
                raise PauliError(f"non-finite coefficient for {p}")
            if p in seen:
                raise PauliError(f"duplicate term {p}")
            seen.add(p)

    @classmethod
    def from_terms(cls, terms: Iterable[tuple[float, PauliString | str]]) -> Hamiltonian:
        """Build from ``(alpha, pauli)`` pairs, summing duplicates."""
        coeffs: dict[PauliString, float] = {}
        for alpha, p in terms:
            if isinstance(p, str):
                p = PauliString.from_str(p)
            coeffs[p] = coeffs.get(p, 0.0) + float(alpha)
        if not coeffs:
            raise PauliError("Hamiltonian has no terms")
        n = next(iter(coeffs)).n
        return cls(n, tuple((a, p) for p, a in coeffs.items()))

    def __len__(self) -> int:
        return len(self.terms)

    def __iter__(self) -> Iterator[tuple[float, PauliString]]:
        return iter(self.terms)

    @property
    def identity_coefficient(self) -> float:
        for alpha, p in self.terms:
            if p.is_identity:
                return alpha
        return 0.0

    def non_identity_terms(self) -> list[tuple[float, PauliString]]:
        """Terms to be estimated: identity and zero coefficients dropped."""
        return [(a, p) for a, p in self.terms if not p.is_identity and a != 0.0]

    def coefficient(self, p: PauliString | str) -> float:
        if isinstance(p, str):
            p = PauliString.from_str(p)
        for alpha, q in self.terms:
            if q == p:
                return alpha
        return 0.0

    def to_matrix(self) -> np.ndarray:
        return sum(alpha * p.to_matrix() for alpha, p in self.terms)


def parse_hamiltonian(text: str | TextIO) -> Hamiltonian:
    """Parse ``<coefficient> <letters>`` lines; ``#`` starts a comment."""
    stream = io.StringIO(text) if isinstance(text, str) else text
    coeffs: dict[PauliString, float] = {}
    n = None
    for lineno, raw in enumerate(stream, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) != 2:
            raise HamiltonianFormatError(
                f"expected '<coefficient> <pauli>', got {raw.strip()!r}", lineno)
        try:
            alpha = float(fields[0])
        except ValueError:
            raise HamiltonianFormatError(f"bad coefficient {fields[0]!r}", lineno) from None
        if not math.isfinite(alpha):
            raise HamiltonianFormatError(f"non-finite coefficient {fields[0]!r}", lineno)
        try:
            p = PauliString.from_str(fields[1])
        except PauliError as exc:
            raise HamiltonianFormatError(str(exc), lineno) from None
        if n is None:
            n = p.n
        elif p.n != n:
            raise HamiltonianFormatError(
                f"Pauli string {fields[1]} has length {p.n}, expected {n}", lineno)
        coeffs[p] = coeffs.get(p, 0.0) + alpha
    if n is None:
        raise HamiltonianFormatError("no terms found")
    return Hamiltonian(n, tuple((a, p) for p, a in coeffs.items()))


def load_hamiltonian(path: str | Path) -> Hamiltonian:
    with open(path, encoding="utf-8") as fh:
        return parse_hamiltonian(fh)


def format_hamiltonian(h: Hamiltonian) -> str:
    # repr() of a float round-trips exactly
    return "".join(f"{alpha!r} {p.letters}\n" for alpha, p in h.terms)
