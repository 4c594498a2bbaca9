"""
Dynamical decoupling: decoupling sets, selection rules, toggled-frame propagation
and the zeroth-order average Hamiltonian.

Pulses are instantaneous. During step i (between (i-1) dt and i dt) the control
frame is U_c = g_{f(i)} (times r_j for embedded schemes), so the toggled-frame
propagator advances by U_c^dagger exp(-i H0 dt) U_c.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from core.exceptions import DimensionError, NumericalError, ValidationError
from core.logger import setup_logger
from qsim.perturb import gue_matrix
from qsim.qcore import (
    OperatorLike,
    OperatorMatrix,
    PauliString,
    UNITARY_TOL,
    as_array,
    conjugate,
    hermitian_propagator,
    is_unitary,
    pauli_basis,
    unitarity_deviation,
)

logger = setup_logger(__name__)

ACCUMULATED_UNITARY_TOL = 1e-9


class ScheduleKind(str, Enum):
    PDD = "PDD"
    SDD = "SDD"
    NRD = "NRD"
    EMD = "EMD"
    SEMD = "SEMD"
    RANDOM_PATH = "RANDOM_PATH"

    @property
    def symmetric(self) -> bool:
        return self in (ScheduleKind.SDD, ScheduleKind.SEMD)

    @property
    def embedded(self) -> bool:
        return self in (ScheduleKind.EMD, ScheduleKind.SEMD)


@dataclass(frozen=True)
class DecouplingSet:
    """Ordered set of unitaries g_1..g_{n_c}."""
    elements: Tuple[OperatorLike, ...]
    name: str = ""

    def __post_init__(self) -> None:
        elements = tuple(self.elements)
        if not elements:
            raise ValidationError("A decoupling set needs at least one element")
        dims = {as_array(g).shape[0] if not isinstance(g, PauliString) else g.dim for g in elements}
        if len(dims) != 1:
            raise DimensionError(
                "Decoupling set elements have different dimensions",
                details={"dims": sorted(dims)},
            )
        for k, g in enumerate(elements):
            if isinstance(g, PauliString):
                continue
            if isinstance(g, OperatorMatrix) and g.unitary:
                continue
            if not is_unitary(as_array(g), UNITARY_TOL):
                raise NumericalError(
                    f"Decoupling element {k} is not unitary",
                    details={"index": k, "deviation": unitarity_deviation(as_array(g))},
                )
        object.__setattr__(self, "elements", elements)

    @property
    def n_c(self) -> int:
        return len(self.elements)

    @property
    def dim(self) -> int:
        g = self.elements[0]
        return g.dim if isinstance(g, PauliString) else as_array(g).shape[0]

    def __len__(self) -> int:
        return self.n_c

    def __getitem__(self, index: int) -> OperatorLike:
        """1-based access, matching the selection rule f(i) in 1..n_c."""
        return self.elements[index - 1]


def pauli_set(n_q: int) -> DecouplingSet:
    """The annihilator {I, X, Y, Z}^{(x) n_q}."""
    return DecouplingSet(tuple(pauli_basis(n_q)), name="pauli")


def identity_set(n_q: int) -> DecouplingSet:
    return DecouplingSet((PauliString.identity(n_q),), name="identity")


def single_x_set(n_q: int) -> DecouplingSet:
    """{I, X_0}: decouples only terms anticommuting with X on qubit 0."""
    return DecouplingSet(
        (PauliString.identity(n_q), PauliString.single(n_q, 0, "X")), name="single-x"
    )


NAMED_SETS = {
    "pauli": pauli_set,
    "identity": identity_set,
    "single-x": single_x_set,
}


def named_set(name: str, n_q: int) -> DecouplingSet:
    if name not in NAMED_SETS:
        raise ValidationError(
            f"Unknown decoupling set '{name}'",
            details={"known": sorted(NAMED_SETS)},
        )
    return NAMED_SETS[name](n_q)


@dataclass(frozen=True)
class DecouplingSchedule:
    """Selection rule plus timing; embedded kinds also carry the inner annihilator."""
    kind: ScheduleKind
    dt: float
    decoupling_set: DecouplingSet
    inner_set: Optional[DecouplingSet] = None
    seed: Optional[int] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", ScheduleKind(self.kind))
        if self.dt <= 0:
            raise ValidationError(
                f"Pulse interval must be positive, got {self.dt}",
                details={"dt": self.dt},
            )
        if self.kind.embedded and self.inner_set is None:
            raise ValidationError(
                f"{self.kind.value} needs an inner decoupling set",
                details={"kind": self.kind.value},
            )
        if self.inner_set is not None and self.inner_set.dim != self.decoupling_set.dim:
            raise DimensionError(
                "Inner and outer decoupling sets act on different dimensions",
                details={"outer": self.decoupling_set.dim, "inner": self.inner_set.dim},
            )

    @property
    def n_c(self) -> int:
        return self.decoupling_set.n_c

    @property
    def t_c(self) -> float:
        """Cycle time T_c = n_c dt."""
        return self.n_c * self.dt

    @property
    def cycle_length(self) -> int:
        """Steps per cycle; symmetric schedules traverse the set forward then backward."""
        return 2 * self.n_c if self.kind.symmetric else self.n_c


def selection_index(
    kind: ScheduleKind,
    i: int,
    n_c: int,
    rng: Optional[np.random.Generator] = None,
    permutation: Optional[Sequence[int]] = None,
) -> int:
    """
    Element index f(i) in 1..n_c for step i >= 1.

    Args:
        kind: Selection rule
        i: Step number, starting at 1
        n_c: Size of the decoupling set
        rng: Needed by NRD, and by RANDOM_PATH when no permutation is given
        permutation: Current cycle permutation pi_j for RANDOM_PATH (values 1..n_c)
    """
    kind = ScheduleKind(kind)
    if i < 1:
        raise ValidationError(f"Step index must be >= 1, got {i}", details={"i": i})
    position = (i - 1) % n_c
    if kind in (ScheduleKind.PDD, ScheduleKind.EMD):
        return position + 1
    if kind.symmetric:
        p = (i - 1) % (2 * n_c)
        return p + 1 if p < n_c else 2 * n_c - p
    if kind == ScheduleKind.NRD:
        return int(rng.integers(1, n_c + 1))
    if permutation is None:
        permutation = rng.permutation(n_c) + 1
    return int(permutation[position])


def selection_sequence(
    kind: ScheduleKind, steps: int, n_c: int, rng: Optional[np.random.Generator] = None
) -> np.ndarray:
    """f(1..steps); RANDOM_PATH draws a fresh permutation at the start of every cycle."""
    kind = ScheduleKind(kind)
    if kind == ScheduleKind.NRD:
        return rng.integers(1, n_c + 1, size=steps)
    indices = np.empty(steps, dtype=int)
    permutation = None
    for i in range(1, steps + 1):
        if kind == ScheduleKind.RANDOM_PATH and (i - 1) % n_c == 0:
            permutation = rng.permutation(n_c) + 1
        indices[i - 1] = selection_index(kind, i, n_c, rng, permutation)
    return indices


def control_sequence(
    schedule: DecouplingSchedule, steps: int, rng: np.random.Generator
) -> List[OperatorLike]:
    """Control-frame unitary U_c of each step, including inner pulses for embedded kinds."""
    indices = selection_sequence(schedule.kind, steps, schedule.n_c, rng)
    controls: List[OperatorLike] = []
    inner: Optional[OperatorLike] = None
    for i, f in enumerate(indices):
        g = schedule.decoupling_set[int(f)]
        if schedule.kind.embedded:
            if i % schedule.cycle_length == 0:
                r_index = int(rng.integers(1, schedule.inner_set.n_c + 1))
                inner = schedule.inner_set[r_index]
            g = _compose(g, inner)
        controls.append(g)
    return controls


def _compose(g: OperatorLike, r: OperatorLike) -> OperatorLike:
    if isinstance(g, PauliString) and isinstance(r, PauliString):
        return g @ r
    return as_array(g) @ as_array(r)


def zeroth_order_average(h0: OperatorLike, decoupling_set: DecouplingSet) -> OperatorMatrix:
    """
    Lowest-order average Hamiltonian (1/n_c) sum_g g^dagger H0 g.

    Raises:
        DimensionError: If H0 and the set act on different dimensions
    """
    matrix = as_array(h0)
    if matrix.shape[0] != decoupling_set.dim:
        raise DimensionError(
            "Hamiltonian and decoupling set dimensions differ",
            details={"h0": matrix.shape[0], "set": decoupling_set.dim},
        )
    total = np.zeros_like(matrix, dtype=complex)
    for g in decoupling_set.elements:
        total += conjugate(g, matrix)
    return OperatorMatrix(total / decoupling_set.n_c, label="H0_avg")


def verify_annihilator(
    decoupling_set: DecouplingSet,
    trials: int = 5,
    tol: float = 1e-10,
    rng: Optional[np.random.Generator] = None,
) -> bool:
    """
    True iff (1/|G|) sum g^dagger H g = (trH/N) I for `trials` random Hermitian H
    and |G| >= N^2.
    """
    if trials < 1:
        raise ValidationError(f"trials must be >= 1, got {trials}", details={"trials": trials})
    rng = rng if rng is not None else np.random.default_rng(0)
    dim = decoupling_set.dim
    if decoupling_set.n_c < dim ** 2:
        logger.debug(f"Set of size {decoupling_set.n_c} is below the annihilator minimum {dim ** 2}")
        return False
    identity = np.eye(dim)
    for _ in range(trials):
        h = gue_matrix(dim, rng)
        average = zeroth_order_average(h, decoupling_set).entries
        expected = identity * (np.trace(h) / dim)
        if np.max(np.abs(average - expected)) > tol:
            return False
    return True


@dataclass
class ScheduleRun:
    """Toggled-frame propagator after the last step plus the per-step fidelity trace."""
    u_tilde: np.ndarray
    times: np.ndarray
    fidelity: np.ndarray


def run_schedule(
    h0: OperatorLike,
    schedule: DecouplingSchedule,
    total_time: float,
    rng: np.random.Generator,
) -> ScheduleRun:
    """
    Propagate the toggled frame under a decoupling schedule.

    Args:
        h0: Static internal Hamiltonian
        schedule: Selection rule and timing
        total_time: T, a multiple of dt
        rng: Stream for the random selection rules

    Returns:
        ScheduleRun with Utilde(T) and F_e(Utilde(i dt), I) for i = 0..T/dt

    Raises:
        ValidationError: If T is not a multiple of dt
        DimensionError: If H0 and the set differ in dimension
        NumericalError: If the accumulated propagator loses unitarity
    """
    matrix = as_array(h0)
    dim = matrix.shape[0]
    if dim != schedule.decoupling_set.dim:
        raise DimensionError(
            "Hamiltonian and decoupling set dimensions differ",
            details={"h0": dim, "set": schedule.decoupling_set.dim},
        )
    steps = int(round(total_time / schedule.dt))
    if steps < 1 or abs(steps * schedule.dt - total_time) > 1e-9 * max(1.0, total_time):
        raise ValidationError(
            "Total time must be a positive multiple of the pulse interval",
            details={"total_time": total_time, "dt": schedule.dt},
        )

    free = hermitian_propagator(matrix, schedule.dt)
    controls = control_sequence(schedule, steps, rng)
    cache: Dict[str, np.ndarray] = {}

    u_tilde = np.eye(dim, dtype=complex)
    fidelity = np.empty(steps + 1)
    fidelity[0] = 1.0
    for i, g in enumerate(controls, start=1):
        if isinstance(g, PauliString):
            step = cache.get(g.word)
            if step is None:
                step = cache[g.word] = g.conjugate(free)
        else:
            step = conjugate(g, free)
        u_tilde = step @ u_tilde
        fidelity[i] = abs(np.trace(u_tilde) / dim) ** 2

    deviation = unitarity_deviation(u_tilde)
    if deviation > ACCUMULATED_UNITARY_TOL:
        raise NumericalError(
            "Toggled-frame propagator lost unitarity",
            details={"deviation": deviation, "steps": steps},
        )
    times = np.arange(steps + 1) * schedule.dt
    logger.debug(f"{schedule.kind.value}: {steps} steps, final fidelity {fidelity[-1]:.6f}")
    return ScheduleRun(u_tilde=u_tilde, times=times, fidelity=fidelity)


def mean_fidelity_trace(
    h0: OperatorLike,
    schedule: DecouplingSchedule,
    total_time: float,
    realizations: int,
    seed: int,
    threads: int = 1,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Mean and standard error of the fidelity trace over independent schedule realizations.

    Realization k uses SeedSequence(seed, spawn_key=(k,)), so results do not depend
    on the thread count.
    """
    if realizations < 1:
        raise ValidationError("At least one realization is required", details={"realizations": realizations})

    def _one(index: int) -> ScheduleRun:
        rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(index,)))
        return run_schedule(h0, schedule, total_time, rng)

    with ThreadPoolExecutor(max_workers=threads) as executor:
        runs = list(executor.map(_one, range(realizations)))

    traces = np.stack([run.fidelity for run in runs])
    mean = traces.mean(axis=0)
    if realizations > 1:
        stderr = traces.std(axis=0, ddof=1) / np.sqrt(realizations)
    else:
        stderr = np.zeros_like(mean)
    return runs[0].times, mean, stderr


def nrd_memory_prediction(h0: OperatorLike, dt: float, times: np.ndarray) -> np.ndarray:
    """F ~ 1 - T dt (tr{H0^2}/N - (trH0/N)^2) for random decoupling with an annihilator."""
    matrix = as_array(h0)
    dim = matrix.shape[0]
    variance = np.real(np.trace(matrix @ matrix)) / dim - (np.real(np.trace(matrix)) / dim) ** 2
    return 1.0 - np.asarray(times) * dt * variance
