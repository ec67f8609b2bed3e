"""Dense statevector backend for small qubit counts.

Pauli strings act on amplitude arrays through their bit masks: with
``P = i**ycount X^x Z^z``, ``(P psi)[j ^ x] = i**ycount (-1)**popcount(j & z) psi[j]``.
"""

from __future__ import annotations

import struct
import warnings
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg
import scipy.sparse.linalg

from ddmeasure.pauli import Hamiltonian, PauliError, PauliString

MAX_QUBITS = 14
DENSE_LIMIT = 8
NORM_TOL = 1e-9
DEGENERACY_GAP = 1e-10
STATE_MAGIC = b"DDSV"


class DegenerateGroundState(UserWarning):
    """The lowest eigenvalue is (numerically) degenerate."""


@dataclass(frozen=True)
class StateVector:
    n: int
    amplitudes: np.ndarray

    def __post_init__(self):
        amp = np.asarray(self.amplitudes, dtype=complex)
        if amp.shape != (1 << self.n,):
            raise ValueError(f"need {1 << self.n} amplitudes, got shape {amp.shape}")
        norm = float(np.vdot(amp, amp).real)
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"state is not normalized (norm^2 = {norm!r})")
        amp = amp.copy()
        amp.flags.writeable = False
        object.__setattr__(self, "amplitudes", amp)

    @classmethod
    def basis(cls, n: int, index: int = 0) -> StateVector:
        amp = np.zeros(1 << n, dtype=complex)
        amp[index] = 1.0
        return cls(n, amp)

    @classmethod
    def from_amplitudes(cls, amplitudes, normalize: bool = False) -> StateVector:
        amp = np.asarray(amplitudes, dtype=complex)
        n = int(round(np.log2(amp.size)))
        if normalize:
            amp = amp / np.linalg.norm(amp)
        return cls(n, amp)


def _popcount_parity(values: np.ndarray) -> np.ndarray:
    return np.bitwise_count(values) & 1


def apply_pauli(p: PauliString, amp: np.ndarray) -> np.ndarray:
    """``P |psi>`` for an amplitude vector (or a stack of them in columns)."""
    idx = np.arange(amp.shape[0], dtype=np.uint64)
    signs = 1.0 - 2.0 * _popcount_parity(idx & np.uint64(p.z))
    phase = (1, 1j, -1, -1j)[p.y_count % 4]
    scaled = (phase * signs).reshape((-1,) + (1,) * (amp.ndim - 1)) * amp
    out = np.empty_like(scaled)
    out[(idx ^ np.uint64(p.x)).astype(np.intp)] = scaled
    return out


def expectation(state: StateVector, p: PauliString) -> float:
    """``<psi|P|psi>``, real because ``P`` is Hermitian."""
    if p.n != state.n:
        raise PauliError(f"Pauli length {p.n} does not match state ({state.n})")
    if p.is_identity:
        return 1.0
    amp = state.amplitudes
    return float(np.vdot(amp, apply_pauli(p, amp)).real)


def energy(state: StateVector, h: Hamiltonian) -> float:
    return sum(alpha * expectation(state, p) for alpha, p in h.terms)


def hamiltonian_matvec(h: Hamiltonian, amp: np.ndarray) -> np.ndarray:
    out = np.zeros_like(amp, dtype=complex)
    for alpha, p in h.terms:
        out += alpha * apply_pauli(p, amp)
    return out


def _fix_phase(vec: np.ndarray) -> np.ndarray:
    k = int(np.argmax(np.abs(vec)))
    vec = vec * (abs(vec[k]) / vec[k])
    return vec / np.linalg.norm(vec)


def ground_state(h: Hamiltonian, residual_tol: float = 1e-8) -> tuple[float, StateVector]:
    """Lowest eigenpair of ``h``, identity term included in the energy.

    Uses a dense Hermitian solve up to 8 qubits and Lanczos with a
    matrix-free Pauli matvec beyond that. Warns with
    :class:`DegenerateGroundState` when the spectral gap is below 1e-10.
    """
    n = h.n
    if n > MAX_QUBITS:
        raise ValueError(f"ground_state supports at most {MAX_QUBITS} qubits, got {n}")
    dim = 1 << n
    if n <= DENSE_LIMIT:
        vals, vecs = scipy.linalg.eigh(h.to_matrix(), subset_by_index=[0, min(1, dim - 1)])
    else:
        op = scipy.sparse.linalg.LinearOperator(
            (dim, dim), matvec=lambda v: hamiltonian_matvec(h, v), dtype=complex)
        vals, vecs = scipy.sparse.linalg.eigsh(op, k=2, which="SA", tol=1e-12)
        order = np.argsort(vals)
        vals, vecs = vals[order], vecs[:, order]
    if dim > 1 and vals[1] - vals[0] < DEGENERACY_GAP:
        warnings.warn(f"ground space is degenerate (gap {vals[1] - vals[0]:.3g})",
                      DegenerateGroundState, stacklevel=2)
    vec = _fix_phase(vecs[:, 0])
    e0 = float(vals[0])
    resid = np.linalg.norm(hamiltonian_matvec(h, vec) - e0 * vec)
    if resid > residual_tol:
        raise RuntimeError(f"eigensolver residual {resid:.3g} exceeds {residual_tol}")
    return e0, StateVector(n, vec)


_HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
# rows map the +1/-1 eigenvectors of each letter onto |0>/|1>
_ROTATION = {
    "X": _HADAMARD,
    "Y": _HADAMARD @ np.diag([1, -1j]),
    "Z": np.eye(2, dtype=complex),
}


def rotate_to_basis(state: StateVector, basis: PauliString) -> np.ndarray:
    """Amplitudes after mapping each qubit's measurement frame onto Z."""
    if basis.n != state.n:
        raise PauliError("basis length does not match state")
    if not basis.is_full_weight:
        raise PauliError(f"basis {basis} is not full weight")
    psi = state.amplitudes.reshape((2,) * state.n)
    for i, letter in enumerate(basis.letters):
        if letter != "Z":
            psi = np.moveaxis(np.tensordot(_ROTATION[letter], psi, axes=([1], [i])), 0, i)
    return psi.reshape(-1)


def basis_probabilities(state: StateVector, basis: PauliString) -> np.ndarray:
    probs = np.abs(rotate_to_basis(state, basis)) ** 2
    return probs / probs.sum()


def outcomes_from_indices(indices: np.ndarray, n: int) -> np.ndarray:
    """Bitstring indices to ``(count, n)`` arrays of +1/-1, qubit 0 first."""
    shifts = np.arange(n - 1, -1, -1)
    bits = (np.asarray(indices)[:, None] >> shifts) & 1
    return (1 - 2 * bits).astype(np.int8)


def sample_outcomes(state: StateVector, basis: PauliString, rng: np.random.Generator,
                    size: int) -> np.ndarray:
    probs = basis_probabilities(state, basis)
    return outcomes_from_indices(rng.choice(probs.size, size=size, p=probs), state.n)


def measure_in_basis(state: StateVector, basis: PauliString, rng: np.random.Generator):
    """One product measurement; returns a :class:`ddmeasure.estimator.ShotRecord`."""
    from ddmeasure.estimator import ShotRecord

    return ShotRecord(basis, tuple(int(v) for v in sample_outcomes(state, basis, rng, 1)[0]))


def make_rng(seed: int | None = 0) -> np.random.Generator:
    """Counter-based Philox stream."""
    return np.random.Generator(np.random.Philox(seed))


def random_state(n: int, rng: np.random.Generator) -> StateVector:
    amp = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
    return StateVector.from_amplitudes(amp, normalize=True)


def save_state(state: StateVector, path: str | Path) -> None:
    """Binary fixture: magic, n, CRC32 of the payload, interleaved doubles."""
    payload = np.ascontiguousarray(state.amplitudes, dtype="<c16").tobytes()
    header = STATE_MAGIC + struct.pack("<II", state.n, zlib.crc32(payload))
    Path(path).write_bytes(header + payload)


def load_state(path: str | Path) -> StateVector:
    raw = Path(path).read_bytes()
    if raw[:4] != STATE_MAGIC or len(raw) < 12:
        raise ValueError("not a state fixture")
    n, crc = struct.unpack("<II", raw[4:12])
    payload = raw[12:]
    if len(payload) != 16 << n:
        raise ValueError(f"payload has {len(payload)} bytes, expected {16 << n}")
    if zlib.crc32(payload) != crc:
        raise ValueError("state fixture checksum mismatch")
    return StateVector(n, np.frombuffer(payload, dtype="<c16"))
