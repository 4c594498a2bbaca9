"""
Gate sequences, the PAREC rewrite and short-time fidelity analysis.

A GateSequence is one iteration U = U_{n_g} ... U_1 (time order left to right in
`gates`). Prefix products W_j = U_{j..1} = U_j ... U_1 are the frame in which a
perturbation after gate j is seen: the toggled perturbation is W_j^dagger dH W_j.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np

from core.config import get_settings
from core.exceptions import DimensionError, ValidationError
from core.logger import setup_logger
from qsim.analytics import parec_bound
from qsim.decouple import DecouplingSet
from qsim.qcore import (
    HADAMARD,
    SWAP,
    TRACE_TOL,
    OperatorLike,
    OperatorMatrix,
    PauliString,
    apply_to_tensor,
    as_array,
    check_qubit_count,
    controlled_phase,
    embed_operator,
    entanglement_fidelity,
    hermitian_propagator,
    random_pauli,
    right_apply_to_tensor,
)

logger = setup_logger(__name__)
settings = get_settings()


@dataclass(frozen=True)
class Gate:
    """A labelled unitary: a local matrix on `targets`, or a full-register PauliString."""
    label: str
    operator: OperatorLike
    targets: Tuple[int, ...]

    def _full_pauli(self, n_q: int) -> bool:
        return isinstance(self.operator, PauliString) and self.operator.n_q == n_q and len(self.targets) == n_q

    def local_matrix(self) -> np.ndarray:
        return as_array(self.operator)

    def apply_left(self, array: np.ndarray, n_q: int) -> np.ndarray:
        """G @ array for an array of shape (2^n_q, ...)."""
        if self._full_pauli(n_q):
            return self.operator.apply(array)
        return apply_to_tensor(array, self.local_matrix(), self.targets, n_q)

    def apply_right(self, array: np.ndarray, n_q: int) -> np.ndarray:
        """array @ G for a (2^n_q, 2^n_q) array."""
        if self._full_pauli(n_q):
            return self.operator.right_apply(array)
        return right_apply_to_tensor(array, self.local_matrix(), self.targets, n_q)

    def full_matrix(self, n_q: int) -> np.ndarray:
        return embed_operator(self.operator, self.targets, n_q)

    def trace(self, n_q: int) -> complex:
        """Trace of the gate embedded in the full register."""
        if self._full_pauli(n_q):
            return complex(self.operator.trace())
        local = self.local_matrix()
        return complex(np.trace(local)) * 2 ** (n_q - len(self.targets))


@dataclass(frozen=True)
class GateSequence:
    """
    One iteration of an algorithm.

    `frame_correction` is applied after the last gate and is never perturbed;
    `bit_reversed` records that the output register order is reversed.
    """
    n_q: int
    gates: Tuple[Gate, ...]
    frame_correction: Optional[Gate] = None
    bit_reversed: bool = False
    label: str = ""

    def __post_init__(self) -> None:
        check_qubit_count(self.n_q)
        object.__setattr__(self, "gates", tuple(self.gates))
        for gate in self.gates:
            if any(t < 0 or t >= self.n_q for t in gate.targets) or len(set(gate.targets)) != len(gate.targets):
                raise DimensionError(
                    f"Gate {gate.label} has invalid targets {gate.targets}",
                    details={"label": gate.label, "targets": gate.targets, "n_q": self.n_q},
                )

    @property
    def n_g(self) -> int:
        return len(self.gates)

    @property
    def dim(self) -> int:
        return 2 ** self.n_q

    def apply(self, array: np.ndarray, include_frame: bool = True) -> np.ndarray:
        for gate in self.gates:
            array = gate.apply_left(array, self.n_q)
        if include_frame and self.frame_correction is not None:
            array = self.frame_correction.apply_left(array, self.n_q)
        return array

    def product(self) -> np.ndarray:
        """Noiseless unitary of the whole sequence, frame correction included."""
        return self.apply(np.eye(self.dim, dtype=complex))

    def iter_prefix_products(self) -> Iterator[np.ndarray]:
        """Yield W_1, ..., W_{n_g}."""
        partial = np.eye(self.dim, dtype=complex)
        for gate in self.gates:
            partial = gate.apply_left(partial, self.n_q)
            yield partial

    def prefix_products(self) -> np.ndarray:
        """Stack of shape (n_g, N, N) holding W_1..W_{n_g}."""
        return np.stack(list(self.iter_prefix_products()))

    def gate_traces(self) -> np.ndarray:
        return np.array([gate.trace(self.n_q) for gate in self.gates])

    def repeat(self, iterations: int) -> "GateSequence":
        """U^t as one flat sequence."""
        if self.frame_correction is not None:
            raise ValidationError("Cannot repeat a sequence that carries a frame correction")
        return GateSequence(self.n_q, self.gates * iterations, bit_reversed=self.bit_reversed, label=self.label)

    def prefix_cache_mb(self) -> float:
        return self.n_g * self.dim ** 2 * 16 / 2 ** 20


@dataclass(frozen=True)
class CorrelationMatrix:
    """Raw correlation values C(j, k); `normalized()` gives C/delta^2 + 1/N^2."""
    values: np.ndarray
    delta: float
    dim: int

    @property
    def n_g(self) -> int:
        return self.values.shape[0]

    def normalized(self) -> np.ndarray:
        return self.values / self.delta ** 2 + 1.0 / self.dim ** 2

    def fidelity_estimate(self) -> float:
        """1 - sum_{j,k} C(j, k), the t = 1 short-time fidelity."""
        return float(1.0 - np.sum(self.values))

    def is_symmetric(self, tol: float = 1e-12) -> bool:
        return bool(np.max(np.abs(self.values - self.values.T)) < tol)


@dataclass
class SecondOrderAmplitude:
    """A(t) and its additive pieces (each already scaled as it enters A)."""
    value: complex
    linear: complex
    squares: complex
    intra: complex
    left_right: complex
    inter: complex

    def fidelity(self) -> float:
        """|A|^2 to second order: 1 + 2 Re(A - 1) + |linear|^2."""
        return float(1.0 + 2.0 * np.real(self.value - 1.0) + abs(self.linear) ** 2)


@dataclass
class ParecCorrelation:
    """Monte-Carlo PAREC-averaged correlation matrix with its closed-form counterpart."""
    mean: CorrelationMatrix
    stderr: np.ndarray
    expected: CorrelationMatrix
    bound: float
    estimate: float
    samples: int


# ---------------------------------------------------------------------------
# Builders
# ---------------------------------------------------------------------------

def build_qft(n_q: int, swap_free: bool = False) -> GateSequence:
    """
    Textbook QFT: for each qubit q a Hadamard, then controlled phases pi/2^{c-q}
    from every later qubit c, then floor(n_q/2) terminal swaps.

    The product is the DFT matrix exp(+2 pi i jk/N)/sqrt(N). With swap_free the
    swaps are dropped and the output order is bit-reversed (recorded on the sequence).
    """
    if n_q < 1:
        raise ValidationError(f"QFT needs at least one qubit, got {n_q}", details={"n_q": n_q})
    gates: List[Gate] = []
    for q in range(n_q):
        gates.append(Gate(f"H({q})", HADAMARD, (q,)))
        for c in range(q + 1, n_q):
            theta = np.pi / 2 ** (c - q)
            gates.append(Gate(f"CP({c},{q})", controlled_phase(theta), (c, q)))
    if not swap_free:
        for q in range(n_q // 2):
            gates.append(Gate(f"SWAP({q},{n_q - 1 - q})", SWAP, (q, n_q - 1 - q)))
    return GateSequence(n_q, tuple(gates), bit_reversed=swap_free, label="qft")


def dft_matrix(dim: int) -> np.ndarray:
    """Reference DFT with entries exp(2 pi i jk/N)/sqrt(N)."""
    j, k = np.meshgrid(np.arange(dim), np.arange(dim), indexing="ij")
    return np.exp(2j * np.pi * j * k / dim) / np.sqrt(dim)


def bit_reversal_permutation(n_q: int) -> np.ndarray:
    idx = np.arange(2 ** n_q)
    reversed_idx = np.zeros_like(idx)
    for k in range(n_q):
        reversed_idx |= ((idx >> k) & 1) << (n_q - 1 - k)
    return reversed_idx


def _draw(decoupling_set: Optional[DecouplingSet], n_q: int, rng: np.random.Generator) -> OperatorLike:
    if decoupling_set is None:
        return random_pauli(n_q, rng)
    return decoupling_set[int(rng.integers(1, decoupling_set.n_c + 1))]


def _conjugated_gate(gate: Gate, r: OperatorLike, n_q: int) -> Gate:
    """r U r^dagger; stays local on the gate's targets when r is a Pauli string."""
    if isinstance(r, PauliString):
        local_r = r.restrict(gate.targets).to_matrix()
        local = local_r @ gate.local_matrix() @ local_r.conj().T
        return Gate(f"~{gate.label}", local, gate.targets)
    r_full = as_array(r)
    full = r_full @ gate.full_matrix(n_q) @ r_full.conj().T
    return Gate(f"~{gate.label}", full, tuple(range(n_q)))


def _pulse(r: OperatorLike, r_prev: OperatorLike, n_q: int) -> Gate:
    """r r_prev^dagger as a full-register gate."""
    if isinstance(r, PauliString) and isinstance(r_prev, PauliString):
        op: OperatorLike = r @ r_prev.dagger()
    else:
        op = as_array(r) @ as_array(r_prev).conj().T
    return Gate("pulse", op, tuple(range(n_q)))


def _dagger(r: OperatorLike) -> OperatorLike:
    if isinstance(r, PauliString):
        return r.dagger()
    return as_array(r).conj().T


def parec_transform(
    seq: GateSequence,
    iterations: int,
    rng: np.random.Generator,
    decoupling_set: Optional[DecouplingSet] = None,
    mode: str = "per_gate",
) -> GateSequence:
    """
    Rewrite t iterations of seq with random pulses.

    per_gate: every gate U_k is preceded by r_k r_{k-1}^dagger and replaced by
    r_k U_k r_k^dagger (2 n_g gates per iteration). per_iteration: one pulse per
    iteration, all its gates conjugated by the same r (n_g + 1 gates per iteration).
    The last r^dagger is kept as the frame correction, so the noiseless product is U^t.

    Args:
        seq: Original iteration (no frame correction)
        iterations: t
        rng: Stream for the pulse draws
        decoupling_set: Pulse set, uniform Pauli draws when None
        mode: "per_gate" or "per_iteration"
    """
    if seq.frame_correction is not None:
        raise ValidationError("Sequence is already transformed")
    if mode not in ("per_gate", "per_iteration"):
        raise ValidationError(f"Unknown PAREC mode '{mode}'", details={"mode": mode})
    n_q = seq.n_q
    r_prev: OperatorLike = PauliString.identity(n_q)
    gates: List[Gate] = []
    for _ in range(iterations):
        if mode == "per_iteration":
            r = _draw(decoupling_set, n_q, rng)
            gates.append(_pulse(r, r_prev, n_q))
            gates.extend(_conjugated_gate(gate, r, n_q) for gate in seq.gates)
            r_prev = r
            continue
        for gate in seq.gates:
            r = _draw(decoupling_set, n_q, rng)
            gates.append(_pulse(r, r_prev, n_q))
            gates.append(_conjugated_gate(gate, r, n_q))
            r_prev = r
    frame = Gate("frame", _dagger(r_prev), tuple(range(n_q)))
    return GateSequence(
        n_q, tuple(gates), frame_correction=frame, bit_reversed=seq.bit_reversed, label=f"parec({seq.label})"
    )


# ---------------------------------------------------------------------------
# Perturbed evolution
# ---------------------------------------------------------------------------

def _check_perturbations(seq: GateSequence, perturbations: Sequence[Optional[np.ndarray]], side: str) -> None:
    if len(perturbations) != seq.n_g:
        raise DimensionError(
            f"{side} perturbation list has {len(perturbations)} entries for {seq.n_g} gates",
            details={"side": side, "expected": seq.n_g, "actual": len(perturbations)},
        )


def static_perturbations(seq: GateSequence, delta_h: np.ndarray) -> List[np.ndarray]:
    """The same dH after every gate."""
    return [delta_h] * seq.n_g


def perturbed_product(
    seq: GateSequence,
    delta_left: Sequence[Optional[np.ndarray]],
    delta_right: Sequence[Optional[np.ndarray]],
) -> OperatorMatrix:
    """
    Exact product with U_j -> exp(-i dH_jl) U_j exp(-i dH_jr); None means no perturbation.
    """
    _check_perturbations(seq, delta_left, "left")
    _check_perturbations(seq, delta_right, "right")
    cache = {}

    def _exp(h: np.ndarray) -> np.ndarray:
        key = id(h)
        if key not in cache:
            cache[key] = hermitian_propagator(h, 1.0)
        return cache[key]

    product = np.eye(seq.dim, dtype=complex)
    for gate, h_left, h_right in zip(seq.gates, delta_left, delta_right):
        if h_right is not None:
            product = _exp(h_right) @ product
        product = gate.apply_left(product, seq.n_q)
        if h_left is not None:
            product = _exp(h_left) @ product
    if seq.frame_correction is not None:
        product = seq.frame_correction.apply_left(product, seq.n_q)
    return OperatorMatrix(product, unitary=True, label="U_delta")


def iterated_fidelity(
    seq: GateSequence,
    delta_h: np.ndarray,
    iterations: int,
    rng: Optional[np.random.Generator] = None,
    decoupling_set: Optional[DecouplingSet] = None,
    mode: str = "per_gate",
) -> np.ndarray:
    """
    F_e after each of t iterations with the static dH after every gate.

    With an rng every iteration is PAREC-transformed with fresh pulses
    (pulses are perturbed like gates, frame corrections are not).
    """
    n_q = seq.n_q
    step = hermitian_propagator(delta_h, 1.0)
    u_ideal = seq.product()
    ideal = np.eye(seq.dim, dtype=complex)
    running = np.eye(seq.dim, dtype=complex)
    fidelities = np.empty(iterations)
    for tau in range(iterations):
        current = seq if rng is None else parec_transform(seq, 1, rng, decoupling_set, mode)
        for gate in current.gates:
            running = step @ gate.apply_left(running, n_q)
        if current.frame_correction is not None:
            running = current.frame_correction.apply_left(running, n_q)
        ideal = u_ideal @ ideal
        fidelities[tau] = entanglement_fidelity(ideal, running)
    return fidelities


# ---------------------------------------------------------------------------
# Second-order expansion
# ---------------------------------------------------------------------------

def _trace_product(a: np.ndarray, b: np.ndarray) -> complex:
    """tr{A B} without forming the product."""
    return complex(np.einsum("ij,ji->", a, b))


def _require_traceless(perturbations: Sequence[Optional[np.ndarray]], side: str) -> None:
    for j, h in enumerate(perturbations):
        if h is None:
            continue
        scale = max(1.0, float(np.linalg.norm(h)))
        if abs(np.trace(h)) > TRACE_TOL * scale * h.shape[0]:
            raise ValidationError(
                f"{side} perturbation of gate {j + 1} is not traceless",
                details={"gate": j + 1, "trace": abs(np.trace(h))},
            )


def _inter_iteration_sum(u: np.ndarray, s: np.ndarray, iterations: int) -> complex:
    """sum_{d=1}^{t-1} (t - d) tr{U^{-d} S U^d S}."""
    total = 0.0 + 0.0j
    moved = s
    for d in range(1, iterations):
        moved = u.conj().T @ moved @ u
        total += (iterations - d) * _trace_product(moved, s)
    return total


def fidelity_amplitude_second_order(
    seq: GateSequence,
    delta_left: Sequence[Optional[np.ndarray]],
    delta_right: Sequence[Optional[np.ndarray]],
    iterations: int = 1,
) -> SecondOrderAmplitude:
    """
    Short-time fidelity amplitude A(t) = tr{U^-t U_delta(t)}/N to second order in dH.

    Every gate contributes a right slot (before the gate) and a left slot (after it),
    seen in the toggled frame W^dagger dH W. The expansion keeps single-slot squares,
    ordered pairs inside one iteration (the left/right pair of the same gate kept
    apart) and pairs across iterations, which reduce to U^-d S U^d S with S the sum
    of one iteration's toggled perturbations.

    Raises:
        ValidationError: If any perturbation carries a trace
    """
    _check_perturbations(seq, delta_left, "left")
    _check_perturbations(seq, delta_right, "right")
    _require_traceless(delta_left, "left")
    _require_traceless(delta_right, "right")
    if seq.frame_correction is not None:
        raise ValidationError("Second-order expansion expects an untransformed sequence")

    n_q, dim = seq.n_q, seq.dim
    linear = squares = intra = left_right = 0.0 + 0.0j
    running_sum = np.zeros((dim, dim), dtype=complex)
    w_prev = np.eye(dim, dtype=complex)
    for gate, h_left, h_right in zip(seq.gates, delta_left, delta_right):
        k_right = None
        if h_right is not None:
            k_right = w_prev.conj().T @ h_right @ w_prev
            linear += np.trace(k_right)
            squares += _trace_product(k_right, k_right)
            intra += _trace_product(k_right, running_sum)
            running_sum = running_sum + k_right
        w = gate.apply_left(w_prev, n_q)
        if h_left is not None:
            k_left = w.conj().T @ h_left @ w
            linear += np.trace(k_left)
            squares += _trace_product(k_left, k_left)
            if k_right is not None:
                left_right += _trace_product(k_left, k_right)
                intra += _trace_product(k_left, running_sum - k_right)
            else:
                intra += _trace_product(k_left, running_sum)
            running_sum = running_sum + k_left
        w_prev = w

    t = iterations
    inter = _inter_iteration_sum(w_prev, running_sum, t)
    pieces = SecondOrderAmplitude(
        value=0.0,
        linear=-1j * t * linear / dim,
        squares=-0.5 * t * squares / dim,
        intra=-t * intra / dim,
        left_right=-t * left_right / dim,
        inter=-inter / dim,
    )
    pieces.value = 1.0 + pieces.linear + pieces.squares + pieces.intra + pieces.left_right + pieces.inter
    return pieces


def toggled_perturbations(seq: GateSequence, delta_h: np.ndarray) -> np.ndarray:
    """Stack of W_j^dagger dH W_j for j = 1..n_g."""
    return np.stack([w.conj().T @ delta_h @ w for w in seq.iter_prefix_products()])


def static_fidelity_second_order(seq: GateSequence, delta_h: np.ndarray, iterations: int = 1) -> float:
    """
    F_e(t) = 1 - t tr{S^2}/N - 2 sum_{d=1}^{t-1} (t - d) tr{U^-d S U^d S}/N
    with S = sum_j W_j^dagger dH W_j (dH after every gate).
    """
    _require_traceless([delta_h], "static")
    s = toggled_perturbations(seq, delta_h).sum(axis=0)
    u = seq.product()
    t = iterations
    same = t * _trace_product(s, s)
    different = 2.0 * _inter_iteration_sum(u, s, t)
    return float(1.0 - np.real(same + different) / seq.dim)


def correlation_function(u: np.ndarray, delta_h: np.ndarray, tau: int) -> float:
    """(1/N) tr{U^-tau dH U^tau dH}."""
    power = np.linalg.matrix_power(u if tau >= 0 else u.conj().T, abs(tau))
    moved = power.conj().T @ delta_h @ power
    return float(np.real(_trace_product(moved, delta_h)) / u.shape[0])


def undecomposed_fidelity_second_order(u: np.ndarray, delta_h: np.ndarray, iterations: int) -> float:
    """1 - sum_{tau=-(t-1)}^{t-1} (t - |tau|) C(tau) for a map kept as a single gate."""
    t = iterations
    total = 0.0
    for tau in range(-(t - 1), t):
        total += (t - abs(tau)) * correlation_function(u, delta_h, tau)
    return 1.0 - total


# ---------------------------------------------------------------------------
# Correlation matrices
# ---------------------------------------------------------------------------

def prefix_gram(seq: GateSequence, cache_mb: Optional[int] = None) -> np.ndarray:
    """
    G[j, k] = tr{W_j W_k^dagger}.

    Uses a cached prefix stack when it fits the memory budget, otherwise streams
    partial products tr{U_j ... U_{k+1}}.
    """
    budget = settings.prefix_cache_mb if cache_mb is None else cache_mb
    n_g, dim = seq.n_g, seq.dim
    if seq.prefix_cache_mb() <= budget:
        stack = seq.prefix_products().reshape(n_g, -1)
        return stack @ stack.conj().T

    logger.info(f"Prefix stack of {seq.prefix_cache_mb():.0f} MB exceeds {budget} MB, streaming partial products")
    gram = np.zeros((n_g, n_g), dtype=complex)
    for k in range(n_g):
        gram[k, k] = dim
        partial = np.eye(dim, dtype=complex)
        for j in range(k + 1, n_g):
            partial = seq.gates[j].apply_left(partial, seq.n_q)
            gram[j, k] = np.trace(partial)
            gram[k, j] = np.conj(gram[j, k])
    return gram


def correlation_matrix_gue_average(
    seq: GateSequence, delta: float, cache_mb: Optional[int] = None
) -> CorrelationMatrix:
    """<C(j, k)> = delta^2 (|tr{U_{j..1} U_{1..k}^dagger}/N|^2 - 1/N^2) for traceless GUE dH."""
    dim = seq.dim
    gram = prefix_gram(seq, cache_mb)
    values = delta ** 2 * (np.abs(gram / dim) ** 2 - 1.0 / dim ** 2)
    return CorrelationMatrix(values=values, delta=delta, dim=dim)


def correlation_matrix(seq: GateSequence, delta_h: np.ndarray, delta: float = 1.0) -> CorrelationMatrix:
    """C(j, k) = (1/N) tr{W_j^dagger dH W_j W_k^dagger dH W_k} for one perturbation."""
    toggled = toggled_perturbations(seq, delta_h).reshape(seq.n_g, -1)
    # Hermitian factors: tr{A B} = sum A_ab conj(B_ab)
    values = np.real(toggled @ toggled.conj().T) / seq.dim
    return CorrelationMatrix(values=values, delta=delta, dim=seq.dim)


def parec_expected_pattern(seq: GateSequence) -> np.ndarray:
    """
    E<C(j, k)>/delta^2 over Pauli pulses for the 2 n_g-gate PAREC layout:
    1 - 1/N^2 on the diagonal, |tr U_m/N|^2 - 1/N^2 at (2m, 2m-1) and its mirror, 0 elsewhere.
    """
    n_g, dim = seq.n_g, seq.dim
    pattern = np.zeros((2 * n_g, 2 * n_g))
    np.fill_diagonal(pattern, 1.0 - 1.0 / dim ** 2)
    traces = seq.gate_traces()
    for m in range(1, n_g + 1):
        value = abs(traces[m - 1] / dim) ** 2 - 1.0 / dim ** 2
        pattern[2 * m - 1, 2 * m - 2] = pattern[2 * m - 2, 2 * m - 1] = value
    return pattern


def parec_fidelity_estimate(seq: GateSequence, delta: float) -> float:
    """1 - 2 n_g delta^2 (1 - N^-2) - 2 delta^2 sum_j (|tr U_j/N|^2 - N^-2)."""
    dim = seq.dim
    traces = np.abs(seq.gate_traces() / dim) ** 2
    return float(
        1.0
        - 2.0 * seq.n_g * delta ** 2 * (1.0 - dim ** -2.0)
        - 2.0 * delta ** 2 * np.sum(traces - dim ** -2.0)
    )


def parec_correlation_average(
    seq: GateSequence,
    delta: float,
    samples: int,
    rng: np.random.Generator,
    cache_mb: Optional[int] = None,
) -> ParecCorrelation:
    """
    Monte-Carlo average over Pauli pulses of the GUE-averaged correlation matrix
    of the PAREC layout of seq (2 n_g gates), plus the closed-form pattern and bounds.

    The transformed prefixes are r_m W_{m-1} (pulse 2m-1) and r_m W_m (gate 2m),
    so only the pulse draws change between samples.

    Raises:
        ValidationError: If samples < 1 or the prefix stack exceeds the memory budget
    """
    if samples < 1:
        raise ValidationError("At least one PAREC sample is required", details={"samples": samples})
    n_g, dim, n_q = seq.n_g, seq.dim, seq.n_q
    budget = settings.prefix_cache_mb if cache_mb is None else cache_mb
    needed_mb = 2 * seq.prefix_cache_mb()
    if needed_mb > budget:
        raise ValidationError(
            "PAREC prefix stack exceeds the cache budget",
            details={"needed_mb": needed_mb, "budget_mb": budget},
        )

    prefixes = seq.prefix_products()
    base = np.empty((2 * n_g, dim, dim), dtype=complex)
    base[0] = np.eye(dim)
    base[1::2] = prefixes
    base[2::2] = prefixes[:-1]

    total = np.zeros((2 * n_g, 2 * n_g))
    total_sq = np.zeros_like(total)
    rows = np.empty_like(base)
    for _ in range(samples):
        for m in range(n_g):
            r = random_pauli(n_q, rng)
            rows[2 * m] = r.apply(base[2 * m])
            rows[2 * m + 1] = r.apply(base[2 * m + 1])
        flat = rows.reshape(2 * n_g, -1)
        gram = flat @ flat.conj().T
        values = delta ** 2 * (np.abs(gram / dim) ** 2 - 1.0 / dim ** 2)
        total += values
        total_sq += values ** 2

    mean = total / samples
    if samples > 1:
        variance = np.maximum(total_sq / samples - mean ** 2, 0.0) * samples / (samples - 1)
        stderr = np.sqrt(variance / samples)
    else:
        stderr = np.zeros_like(mean)

    expected = CorrelationMatrix(values=delta ** 2 * parec_expected_pattern(seq), delta=delta, dim=dim)
    bound = parec_bound(1, n_g, delta ** 2 * (1.0 - dim ** -2.0))
    return ParecCorrelation(
        mean=CorrelationMatrix(values=mean, delta=delta, dim=dim),
        stderr=stderr,
        expected=expected,
        bound=bound,
        estimate=parec_fidelity_estimate(seq, delta),
        samples=samples,
    )
