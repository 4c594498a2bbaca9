"""
Static imperfection models: Heisenberg chains with detunings and GUE random Hamiltonians.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from core.exceptions import DimensionError, ValidationError
from core.logger import setup_logger
from qsim.qcore import HERMITIAN_TOL, TRACE_TOL, OperatorMatrix, PauliString, check_qubit_count

logger = setup_logger(__name__)

_COUPLING_LETTERS = ("X", "Y", "Z")


def _as_tuple(values, length: int, name: str) -> Tuple[float, ...]:
    values = () if values is None else tuple(float(v) for v in values)
    if not values:
        return (0.0,) * length
    if len(values) != length:
        raise DimensionError(
            f"{name} must have {length} entries, got {len(values)}",
            details={"name": name, "expected": length, "actual": len(values)},
        )
    return values


@dataclass(frozen=True)
class ChainModel:
    """
    Open linear chain H0 = sum_i delta_i Z_i + sum_K sum_j J_{K,j} K_j K_{j+1}.

    Detunings have n_q entries, every coupling array n_q - 1 entries (1/t0 units).
    """
    n_q: int
    detunings: Tuple[float, ...] = ()
    couplings_x: Tuple[float, ...] = ()
    couplings_y: Tuple[float, ...] = ()
    couplings_z: Tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if self.n_q < 2:
            raise ValidationError(
                f"A chain needs at least 2 qubits, got {self.n_q}",
                details={"n_q": self.n_q},
            )
        object.__setattr__(self, "detunings", _as_tuple(self.detunings, self.n_q, "detunings"))
        for letter in _COUPLING_LETTERS:
            name = f"couplings_{letter.lower()}"
            object.__setattr__(self, name, _as_tuple(getattr(self, name), self.n_q - 1, name))

    @property
    def is_diagonal(self) -> bool:
        """True when only Z detunings and ZZ couplings are present."""
        return not any(self.couplings_x) and not any(self.couplings_y)

    def couplings(self, letter: str) -> Tuple[float, ...]:
        return getattr(self, f"couplings_{letter.lower()}")

    def terms(self):
        """Yield (coefficient, PauliString) pairs of the non-zero terms."""
        for i, d in enumerate(self.detunings):
            if d != 0.0:
                yield d, PauliString.single(self.n_q, i, "Z")
        for letter in _COUPLING_LETTERS:
            for j, c in enumerate(self.couplings(letter)):
                if c != 0.0:
                    chars = ["I"] * self.n_q
                    chars[j] = chars[j + 1] = letter
                    yield c, PauliString("".join(chars))

    def permuted(self, sigma) -> "ChainModel":
        """
        Chain whose detunings are relabelled by sigma (detuning on i moves to sigma[i]).

        Only meaningful for detunings; couplings are tied to chain bonds and kept.
        """
        detunings = [0.0] * self.n_q
        for i, d in enumerate(self.detunings):
            detunings[sigma[i]] = d
        return ChainModel(self.n_q, tuple(detunings), self.couplings_x, self.couplings_y, self.couplings_z)


def chain_diagonal(model: ChainModel) -> np.ndarray:
    """
    Diagonal of H0 for Z/ZZ-only chains.

    Raises:
        ValidationError: If XX or YY couplings are present
    """
    if not model.is_diagonal:
        raise ValidationError("Chain has XX/YY couplings and is not diagonal")
    n = model.n_q
    idx = np.arange(2 ** n)
    z = np.array([1 - 2 * ((idx >> (n - 1 - k)) & 1) for k in range(n)], dtype=float)
    diag = np.tensordot(np.asarray(model.detunings), z, axes=1)
    diag += np.tensordot(np.asarray(model.couplings_z), z[:-1] * z[1:], axes=1)
    return diag


def build_chain_hamiltonian(model: ChainModel) -> OperatorMatrix:
    """
    Dense Hermitian, traceless H0 of a chain model.

    Args:
        model: Chain parameters

    Returns:
        OperatorMatrix flagged Hermitian
    """
    check_qubit_count(model.n_q)
    if model.is_diagonal:
        matrix = np.diag(chain_diagonal(model)).astype(complex)
    else:
        matrix = np.zeros((2 ** model.n_q, 2 ** model.n_q), dtype=complex)
        for coefficient, pauli in model.terms():
            idx, phases = pauli.monomial
            matrix[idx, np.arange(pauli.dim)] += coefficient * phases
    return OperatorMatrix(matrix, hermitian=True, label="H0")


def sample_uniform_chain(
    n_q: int,
    epsilon: float,
    rng: np.random.Generator,
    full_heisenberg: bool = False,
) -> ChainModel:
    """
    Chain with parameters drawn i.i.d. uniform on [-sqrt(3) eps, sqrt(3) eps].

    Detunings and ZZ couplings are always drawn; XX and YY couplings only with
    full_heisenberg. Every parameter then has variance eps^2.
    """
    if epsilon < 0:
        raise ValidationError(
            f"Imperfection strength must be non-negative, got {epsilon}",
            details={"epsilon": epsilon},
        )
    half_width = np.sqrt(3.0) * epsilon
    detunings = rng.uniform(-half_width, half_width, size=n_q)
    couplings_z = rng.uniform(-half_width, half_width, size=n_q - 1)
    couplings_x = couplings_y = None
    if full_heisenberg:
        couplings_x = rng.uniform(-half_width, half_width, size=n_q - 1)
        couplings_y = rng.uniform(-half_width, half_width, size=n_q - 1)
    return ChainModel(
        n_q,
        detunings=tuple(detunings),
        couplings_x=tuple(couplings_x) if couplings_x is not None else (),
        couplings_y=tuple(couplings_y) if couplings_y is not None else (),
        couplings_z=tuple(couplings_z),
    )


@dataclass(frozen=True)
class GuePerturbation:
    """
    Traceless GUE sample V with strength delta; delta_h = V * delta.

    `raw` keeps the sample before the traceless projection for moment checks.
    """
    dim: int
    matrix: np.ndarray
    strength: float = 1.0
    raw: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.matrix.shape != (self.dim, self.dim):
            raise DimensionError(
                "GUE matrix shape does not match its dimension",
                details={"dim": self.dim, "shape": self.matrix.shape},
            )

    @property
    def delta_h(self) -> np.ndarray:
        return self.matrix * self.strength

    def is_traceless(self, tol: float = TRACE_TOL) -> bool:
        return abs(np.trace(self.matrix)) < tol

    def is_hermitian(self, tol: float = HERMITIAN_TOL) -> bool:
        return bool(np.max(np.abs(self.matrix - self.matrix.conj().T)) < tol)


def gue_matrix(dim: int, rng: np.random.Generator) -> np.ndarray:
    """
    Hermitian matrix with <V_jk V_lm> = delta_jm delta_kl / N.

    Diagonal real Gaussian of variance 1/N, off-diagonal complex Gaussian whose
    total variance 1/N is split equally between real and imaginary parts.
    """
    if dim < 2:
        raise ValidationError(f"GUE dimension must be at least 2, got {dim}", details={"dim": dim})
    diag = rng.normal(scale=np.sqrt(1.0 / dim), size=dim)
    scale = np.sqrt(1.0 / (2.0 * dim))
    off = rng.normal(scale=scale, size=(dim, dim)) + 1j * rng.normal(scale=scale, size=(dim, dim))
    upper = np.triu(off, k=1)
    return upper + upper.conj().T + np.diag(diag)


def sample_gue(dim: int, rng: np.random.Generator, strength: float = 1.0) -> GuePerturbation:
    """
    Draw a GUE sample and project it onto the traceless subspace, V -> V - I trV/N.

    Args:
        dim: Hilbert-space dimension N
        rng: Random generator owning this stream
        strength: Dimensionless delta

    Returns:
        GuePerturbation with the raw sample attached
    """
    raw = gue_matrix(dim, rng)
    matrix = raw - np.eye(dim) * (np.trace(raw) / dim)
    return GuePerturbation(dim=dim, matrix=matrix, strength=strength, raw=raw)
