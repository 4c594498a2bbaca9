"""
Dense statevector and operator kernel.

Qubit 0 is the most significant bit of a basis-state index, so for four
qubits |0011> has index 3. Units: hbar = 1, times in elementary gate times t0,
Hamiltonian entries in 1/t0. All tolerances used across the package live here.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from itertools import product
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np
from scipy import linalg
from scipy.stats import unitary_group

from core.config import get_settings
from core.exceptions import DimensionError, NumericalError, ValidationError
from core.logger import setup_logger

logger = setup_logger(__name__)
settings = get_settings()

UNITARY_TOL = 1e-10
NORM_TOL = 1e-10
HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12

PAULI_LETTERS = "IXYZ"
_VALID_PHASES = (1, -1, 1j, -1j)

# sigma_a * sigma_b = phase * sigma_c
_PAULI_PRODUCT: Dict[Tuple[str, str], Tuple[complex, str]] = {
    ("I", "I"): (1, "I"), ("I", "X"): (1, "X"), ("I", "Y"): (1, "Y"), ("I", "Z"): (1, "Z"),
    ("X", "I"): (1, "X"), ("X", "X"): (1, "I"), ("X", "Y"): (1j, "Z"), ("X", "Z"): (-1j, "Y"),
    ("Y", "I"): (1, "Y"), ("Y", "X"): (-1j, "Z"), ("Y", "Y"): (1, "I"), ("Y", "Z"): (1j, "X"),
    ("Z", "I"): (1, "Z"), ("Z", "X"): (1j, "Y"), ("Z", "Y"): (-1j, "X"), ("Z", "Z"): (1, "I"),
}


# ---------------------------------------------------------------------------
# Gate library
# ---------------------------------------------------------------------------

IDENTITY_2 = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
S_GATE = np.diag([1, 1j]).astype(complex)
T_GATE = np.diag([1, np.exp(1j * np.pi / 4)])
CNOT = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)
CZ = np.diag([1, 1, 1, -1]).astype(complex)
SWAP = np.array(
    [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex
)

PAULI_MATRICES = {"I": IDENTITY_2, "X": PAULI_X, "Y": PAULI_Y, "Z": PAULI_Z}


def phase_gate(theta: float) -> np.ndarray:
    """diag(1, e^{i theta})."""
    return np.diag([1.0, np.exp(1j * theta)])


def controlled_phase(theta: float) -> np.ndarray:
    """Two-qubit controlled phase diag(1, 1, 1, e^{i theta}); symmetric in its qubits."""
    return np.diag([1.0, 1.0, 1.0, np.exp(1j * theta)])


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------

def _qubits_for_dim(dim: int) -> int:
    n_q = int(round(np.log2(dim))) if dim > 0 else -1
    if n_q < 0 or 2 ** n_q != dim:
        raise DimensionError(
            f"Dimension {dim} is not a power of two",
            details={"dim": dim},
        )
    return n_q


def check_qubit_count(n_q: int) -> None:
    """Reject registers beyond the dense-representation cap."""
    if n_q < 1 or n_q > settings.max_qubits:
        raise DimensionError(
            f"Qubit count {n_q} outside 1..{settings.max_qubits}",
            details={"n_q": n_q, "max_qubits": settings.max_qubits},
        )


@dataclass(frozen=True)
class StateVector:
    """Pure register state of n_q qubits."""
    n_q: int
    amps: np.ndarray

    def __post_init__(self) -> None:
        amps = np.array(self.amps, dtype=complex)
        if amps.ndim != 1 or amps.shape[0] != 2 ** self.n_q:
            raise DimensionError(
                f"Amplitude array of shape {amps.shape} does not match {self.n_q} qubits",
                details={"n_q": self.n_q, "shape": amps.shape},
            )
        amps.setflags(write=False)
        object.__setattr__(self, "amps", amps)

    @property
    def dim(self) -> int:
        return 2 ** self.n_q

    @classmethod
    def from_amplitudes(cls, amps: np.ndarray) -> "StateVector":
        amps = np.asarray(amps, dtype=complex)
        return cls(_qubits_for_dim(amps.shape[0]), amps)

    @classmethod
    def basis(cls, n_q: int, index: int) -> "StateVector":
        amps = np.zeros(2 ** n_q, dtype=complex)
        amps[index] = 1.0
        return cls(n_q, amps)

    @classmethod
    def from_bits(cls, bits: str) -> "StateVector":
        """Computational basis state from a bit string, qubit 0 first ("0011")."""
        return cls.basis(len(bits), int(bits, 2))

    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    def is_normalized(self, tol: float = NORM_TOL) -> bool:
        return abs(self.norm() ** 2 - 1.0) < tol

    def normalized(self) -> "StateVector":
        nrm = self.norm()
        if nrm == 0.0:
            raise NumericalError("Cannot normalize the zero vector")
        return StateVector(self.n_q, self.amps / nrm)

    def overlap(self, other: "StateVector") -> complex:
        """<self|other>."""
        if other.n_q != self.n_q:
            raise DimensionError(
                "Overlap of states with different qubit counts",
                details={"left": self.n_q, "right": other.n_q},
            )
        return complex(np.vdot(self.amps, other.amps))

    def fidelity(self, other: "StateVector") -> float:
        """|<self|other>|^2 for normalized states."""
        return float(abs(self.overlap(other)) ** 2)

    def excitation_counts(self, tol: float = 1e-14) -> np.ndarray:
        """Number of ones of every basis index carrying weight above tol."""
        support = np.nonzero(np.abs(self.amps) > tol)[0]
        return np.array([bin(int(k)).count("1") for k in support], dtype=int)


@dataclass(frozen=True)
class OperatorMatrix:
    """Dense N x N operator with optional unitary/Hermitian guarantees."""
    entries: np.ndarray
    unitary: bool = False
    hermitian: bool = False
    label: str = ""

    def __post_init__(self) -> None:
        entries = np.array(self.entries, dtype=complex)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise DimensionError(
                f"Operator must be square, got shape {entries.shape}",
                details={"shape": entries.shape, "label": self.label},
            )
        if self.unitary and not is_unitary(entries):
            raise NumericalError(
                "Operator flagged unitary violates U^dagger U = I",
                details={"label": self.label, "deviation": unitarity_deviation(entries)},
            )
        if self.hermitian and not is_hermitian(entries):
            raise NumericalError(
                "Operator flagged Hermitian violates H = H^dagger",
                details={"label": self.label},
            )
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def n_q(self) -> int:
        return _qubits_for_dim(self.dim)

    def dagger(self) -> "OperatorMatrix":
        return OperatorMatrix(self.entries.conj().T, self.unitary, self.hermitian, self.label)

    def __matmul__(self, other: "OperatorMatrix") -> "OperatorMatrix":
        if other.dim != self.dim:
            raise DimensionError(
                "Operator product with mismatched dimensions",
                details={"left": self.dim, "right": other.dim},
            )
        return OperatorMatrix(
            self.entries @ other.entries,
            unitary=self.unitary and other.unitary,
        )


@dataclass(frozen=True)
class PauliString:
    """Tensor word over {I, X, Y, Z} with a global phase in {+1, -1, +i, -i}."""
    word: str
    phase: complex = 1

    def __post_init__(self) -> None:
        word = self.word.upper()
        if not word or any(ch not in PAULI_LETTERS for ch in word):
            raise ValidationError(
                f"Invalid Pauli word '{self.word}'",
                details={"word": self.word},
            )
        phase = complex(self.phase)
        if not any(abs(phase - p) < 1e-12 for p in _VALID_PHASES):
            raise ValidationError(
                f"Pauli phase must be one of +1, -1, +i, -i, got {self.phase}",
                details={"phase": str(self.phase)},
            )
        object.__setattr__(self, "word", word)
        object.__setattr__(self, "phase", phase)

    @classmethod
    def identity(cls, n_q: int) -> "PauliString":
        return cls("I" * n_q)

    @classmethod
    def single(cls, n_q: int, qubit: int, letter: str) -> "PauliString":
        """Letter on one qubit, identity elsewhere."""
        chars = ["I"] * n_q
        chars[qubit] = letter
        return cls("".join(chars))

    @property
    def n_q(self) -> int:
        return len(self.word)

    @property
    def dim(self) -> int:
        return 2 ** self.n_q

    @property
    def is_identity(self) -> bool:
        return set(self.word) == {"I"}

    @property
    def weight(self) -> int:
        return sum(ch != "I" for ch in self.word)

    def __str__(self) -> str:
        sign = {1: "+", -1: "-", 1j: "+i", -1j: "-i"}[complex(np.round(self.phase))]
        return f"{sign}{self.word}"

    def __matmul__(self, other: "PauliString") -> "PauliString":
        if other.n_q != self.n_q:
            raise DimensionError(
                "Pauli product of strings with different lengths",
                details={"left": self.word, "right": other.word},
            )
        phase = self.phase * other.phase
        letters = []
        for a, b in zip(self.word, other.word):
            p, c = _PAULI_PRODUCT[(a, b)]
            phase *= p
            letters.append(c)
        return PauliString("".join(letters), complex(np.round(phase.real) + 1j * np.round(phase.imag)))

    def dagger(self) -> "PauliString":
        return PauliString(self.word, np.conj(self.phase))

    def restrict(self, qubits: Sequence[int]) -> "PauliString":
        """Sub-word on the given qubits (phase dropped)."""
        return PauliString("".join(self.word[q] for q in qubits))

    @cached_property
    def monomial(self) -> Tuple[np.ndarray, np.ndarray]:
        """
        Monomial form P|c> = phi(c) |c XOR x>.

        Returns:
            (index map c -> c XOR x, phases phi(c))
        """
        n = self.n_q
        idx = np.arange(2 ** n)
        x_mask = 0
        phases = np.full(2 ** n, self.phase, dtype=complex)
        for k, letter in enumerate(self.word):
            shift = n - 1 - k
            bit = (idx >> shift) & 1
            if letter in "XY":
                x_mask |= 1 << shift
            if letter == "Y":
                phases *= 1j * (1 - 2 * bit)
            elif letter == "Z":
                phases *= 1 - 2 * bit
        return idx ^ x_mask, phases

    def to_matrix(self) -> np.ndarray:
        idx, phases = self.monomial
        matrix = np.zeros((self.dim, self.dim), dtype=complex)
        matrix[idx, np.arange(self.dim)] = phases
        return matrix

    def to_operator(self) -> OperatorMatrix:
        return OperatorMatrix(self.to_matrix(), unitary=True, label=str(self))

    def trace(self) -> complex:
        return self.phase * self.dim if self.is_identity else 0.0

    def apply(self, vec: np.ndarray) -> np.ndarray:
        """P @ vec for a vector or a matrix (acting on rows)."""
        idx, phases = self.monomial
        out = np.empty_like(vec, dtype=complex)
        if vec.ndim == 1:
            out[idx] = phases * vec
        else:
            out[idx] = phases[:, None] * vec
        return out

    def right_apply(self, matrix: np.ndarray) -> np.ndarray:
        """matrix @ P."""
        idx, phases = self.monomial
        return matrix[:, idx] * phases[None, :]

    def conjugate(self, matrix: np.ndarray) -> np.ndarray:
        """P^dagger @ matrix @ P in O(N^2)."""
        idx, phases = self.monomial
        return np.conj(phases)[:, None] * matrix[np.ix_(idx, idx)] * phases[None, :]


OperatorLike = Union[OperatorMatrix, PauliString, np.ndarray]


def as_array(op: OperatorLike) -> np.ndarray:
    """Dense matrix of any supported operator representation."""
    if isinstance(op, OperatorMatrix):
        return op.entries
    if isinstance(op, PauliString):
        return op.to_matrix()
    return np.asarray(op, dtype=complex)


def pauli_basis(n_q: int) -> List[PauliString]:
    """The 4^n_q strings of {I, X, Y, Z}^{(x) n_q}, identity first."""
    return [PauliString("".join(w)) for w in product(PAULI_LETTERS, repeat=n_q)]


def conjugate(g: OperatorLike, matrix: np.ndarray) -> np.ndarray:
    """g^dagger @ matrix @ g."""
    if isinstance(g, PauliString):
        return g.conjugate(matrix)
    g_arr = as_array(g)
    return g_arr.conj().T @ matrix @ g_arr


# ---------------------------------------------------------------------------
# Checks
# ---------------------------------------------------------------------------

def unitarity_deviation(matrix: np.ndarray) -> float:
    """max |U^dagger U - I|."""
    matrix = np.asarray(matrix)
    return float(np.max(np.abs(matrix.conj().T @ matrix - np.eye(matrix.shape[0]))))


def is_unitary(matrix: np.ndarray, tol: float = UNITARY_TOL) -> bool:
    return unitarity_deviation(matrix) < tol


def is_hermitian(matrix: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    matrix = np.asarray(matrix)
    return bool(np.max(np.abs(matrix - matrix.conj().T)) < tol)


def _check_targets(targets: Sequence[int], n_q: int) -> Tuple[int, ...]:
    targets = tuple(int(t) for t in targets)
    if len(set(targets)) != len(targets):
        raise DimensionError(
            f"Duplicate target qubits {targets}",
            details={"targets": targets},
        )
    if any(t < 0 or t >= n_q for t in targets):
        raise DimensionError(
            f"Target qubits {targets} out of range for {n_q} qubits",
            details={"targets": targets, "n_q": n_q},
        )
    return targets


def _local_matrix(op: OperatorLike, k: int) -> np.ndarray:
    matrix = as_array(op)
    if matrix.shape != (2 ** k, 2 ** k):
        raise DimensionError(
            f"Operator of shape {matrix.shape} cannot act on {k} target qubits",
            details={"shape": matrix.shape, "targets": k},
        )
    return matrix


# ---------------------------------------------------------------------------
# Gate application
# ---------------------------------------------------------------------------

def apply_to_tensor(
    array: np.ndarray, matrix: np.ndarray, targets: Sequence[int], n_q: int
) -> np.ndarray:
    """
    Apply a local matrix to the qubit axes of an array of shape (2^n_q, ...).

    The leading axis is read as the register index, trailing axes are carried
    along, so a (N, N) array is left-multiplied by the embedded operator.
    """
    k = len(targets)
    tensor = array.reshape((2,) * n_q + array.shape[1:])
    gate = matrix.reshape((2,) * (2 * k))
    out = np.tensordot(gate, tensor, axes=(list(range(k, 2 * k)), list(targets)))
    out = np.moveaxis(out, list(range(k)), list(targets))
    return out.reshape(array.shape)


def right_apply_to_tensor(
    array: np.ndarray, matrix: np.ndarray, targets: Sequence[int], n_q: int
) -> np.ndarray:
    """array @ embedded(matrix) for a (N, N) array."""
    return apply_to_tensor(array.T, matrix.T, targets, n_q).T


def embed_operator(op: OperatorLike, targets: Sequence[int], n_q: int) -> np.ndarray:
    """Full 2^n_q matrix of op acting on targets, identity elsewhere."""
    targets = _check_targets(targets, n_q)
    if isinstance(op, PauliString) and op.n_q == n_q and targets == tuple(range(n_q)):
        return op.to_matrix()
    matrix = _local_matrix(op, len(targets))
    return apply_to_tensor(np.eye(2 ** n_q, dtype=complex), matrix, targets, n_q)


def apply_gate(state: StateVector, op: OperatorLike, targets: Sequence[int]) -> StateVector:
    """
    Return op|state> with op embedded on targets.

    Raises:
        DimensionError: duplicate/out-of-range targets or op of the wrong size
        NumericalError: a unitary op changed the norm of a normalized state
    """
    targets = _check_targets(targets, state.n_q)
    if isinstance(op, PauliString) and op.n_q == state.n_q and targets == tuple(range(state.n_q)):
        amps = op.apply(state.amps)
    else:
        matrix = _local_matrix(op, len(targets))
        amps = apply_to_tensor(state.amps, matrix, targets, state.n_q)
    result = StateVector(state.n_q, amps)

    guaranteed_unitary = isinstance(op, PauliString) or (
        isinstance(op, OperatorMatrix) and op.unitary
    )
    if guaranteed_unitary and state.is_normalized():
        drift = abs(result.norm() ** 2 - 1.0)
        if drift >= NORM_TOL:
            raise NumericalError(
                "Norm drift after unitary gate",
                details={"drift": drift, "targets": targets},
            )
    return result


# ---------------------------------------------------------------------------
# Norms, propagators and fidelities
# ---------------------------------------------------------------------------

def operator_two_norm(h: OperatorLike) -> float:
    """Largest singular value (kappa = ||H0||_2 for Hamiltonians)."""
    matrix = as_array(h)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise DimensionError("Operator norm requires a square matrix", details={"shape": matrix.shape})
    return float(np.linalg.norm(matrix, ord=2))


def hermitian_propagator(h: np.ndarray, dt: float = 1.0) -> np.ndarray:
    """exp(-i h dt) for Hermitian h via dense eigendecomposition."""
    evals, evecs = linalg.eigh(h)
    return (evecs * np.exp(-1j * evals * dt)) @ evecs.conj().T


def fidelity_amplitude(u_ideal: OperatorLike, u_actual: OperatorLike) -> complex:
    """A = tr{U_ideal^dagger U_actual} / N."""
    a = as_array(u_ideal)
    b = as_array(u_actual)
    if a.shape != b.shape:
        raise DimensionError(
            "Fidelity of operators with different dimensions",
            details={"ideal": a.shape, "actual": b.shape},
        )
    return complex(np.vdot(a, b) / a.shape[0])


def entanglement_fidelity(u_ideal: OperatorLike, u_actual: OperatorLike) -> float:
    """F_e = |tr{U_ideal^dagger U_actual} / N|^2."""
    return float(abs(fidelity_amplitude(u_ideal, u_actual)) ** 2)


def average_fidelity_from_entanglement(f_e: float, dim: int) -> float:
    """Average fidelity (N F_e + 1) / (N + 1)."""
    return (dim * f_e + 1.0) / (dim + 1.0)


def random_state(n_q: int, rng: np.random.Generator) -> StateVector:
    """Haar-random pure state."""
    amps = rng.normal(size=2 ** n_q) + 1j * rng.normal(size=2 ** n_q)
    return StateVector(n_q, amps / np.linalg.norm(amps))


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary."""
    return unitary_group.rvs(dim, random_state=rng)


def sampled_average_fidelity(
    u_ideal: OperatorLike,
    u_actual: OperatorLike,
    samples: int,
    rng: np.random.Generator,
    batch: int = 4096,
) -> Tuple[float, float]:
    """
    Monte-Carlo average fidelity over Haar-random input states.

    Returns:
        (mean, standard error) of |<psi| U_ideal^dagger U_actual |psi>|^2
    """
    kraus = as_array(u_ideal).conj().T @ as_array(u_actual)
    dim = kraus.shape[0]
    values = []
    remaining = samples
    while remaining > 0:
        size = min(batch, remaining)
        psi = rng.normal(size=(dim, size)) + 1j * rng.normal(size=(dim, size))
        psi /= np.linalg.norm(psi, axis=0)
        values.append(np.abs(np.sum(psi.conj() * (kraus @ psi), axis=0)) ** 2)
        remaining -= size
    values = np.concatenate(values)
    return float(values.mean()), float(values.std(ddof=1) / np.sqrt(values.size))


def trace_distance(rho: np.ndarray, sigma: np.ndarray) -> float:
    """(1/2) || rho - sigma ||_1 for Hermitian arguments."""
    diff = np.asarray(rho) - np.asarray(sigma)
    diff = 0.5 * (diff + diff.conj().T)
    return float(0.5 * np.sum(np.abs(linalg.eigvalsh(diff))))


def pauli_coefficient(matrix: np.ndarray, pauli: PauliString) -> complex:
    """tr{P^dagger M} / N."""
    idx, phases = pauli.monomial
    dim = matrix.shape[0]
    return complex(np.sum(np.conj(phases) * matrix[idx, np.arange(dim)]) / dim)


def pauli_decompose(matrix: np.ndarray, tol: float = 1e-14) -> Dict[str, complex]:
    """Coefficients of M in the Pauli basis, M = sum_P c_P P; entries below tol dropped."""
    n_q = _qubits_for_dim(matrix.shape[0])
    if n_q > 8:
        raise DimensionError(
            "Pauli decomposition limited to 8 qubits",
            details={"n_q": n_q},
        )
    coefficients = {}
    for pauli in pauli_basis(n_q):
        c = pauli_coefficient(matrix, pauli)
        if abs(c) > tol:
            coefficients[pauli.word] = c
    return coefficients


def random_pauli(n_q: int, rng: np.random.Generator) -> PauliString:
    """Uniform draw from {I, X, Y, Z}^{(x) n_q} with phase +1."""
    letters = rng.integers(0, 4, size=n_q)
    return PauliString("".join(PAULI_LETTERS[k] for k in letters))
