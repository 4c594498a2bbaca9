"""
Quantum-trajectory unraveling of the decay master equation with the combined
flip/swap decoupling and jump-recovery protocol.

Between events the unnormalized state follows exp(-i H_eff t) with
H_eff = H - (i/2) sum_k kappa_k |1><1|_k; a jump fires when its squared norm
reaches a uniform threshold. Decoupling pulses are instantaneous and are never
executed inside a recovery window.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import integrate, linalg, optimize

from core.exceptions import DimensionError, NumericalError, ValidationError
from core.logger import setup_logger
from qsim.jumpcode import JumpCode, apply_permutation, flip_operator, recovery_operator
from qsim.jumpcode import PermutationTracker, sample_swap_layer
from qsim.qcore import OperatorLike, StateVector, as_array, check_qubit_count

logger = setup_logger(__name__)

GATE_TIME = 1.0
CNOT_DURATION = 1.5 * GATE_TIME


# ---------------------------------------------------------------------------
# Model and protocol
# ---------------------------------------------------------------------------

def _occupation_diagonal(n_q: int) -> np.ndarray:
    """Row k holds the |1><1|_k diagonal."""
    idx = np.arange(2 ** n_q)
    return np.array([(idx >> (n_q - 1 - k)) & 1 for k in range(n_q)], dtype=float)


@dataclass(frozen=True)
class LindbladModel:
    """
    drho/dt = -i[H, rho] + sum_k (L_k rho L_k^dagger - {L_k^dagger L_k, rho}/2),
    L_k = sqrt(kappa_k) |0><1|_k. H None means no Hamiltonian.
    """
    n_q: int
    rates: Tuple[float, ...]
    hamiltonian: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self) -> None:
        check_qubit_count(self.n_q)
        rates = tuple(float(k) for k in self.rates)
        if len(rates) != self.n_q:
            raise DimensionError(
                f"Expected {self.n_q} decay rates, got {len(rates)}",
                details={"n_q": self.n_q, "rates": len(rates)},
            )
        if any(k < 0 for k in rates):
            raise ValidationError("Decay rates must be non-negative", details={"rates": rates})
        object.__setattr__(self, "rates", rates)
        if self.hamiltonian is not None:
            h = np.array(as_array(self.hamiltonian), dtype=complex)
            if h.shape != (2 ** self.n_q, 2 ** self.n_q):
                raise DimensionError(
                    "Hamiltonian does not match the register",
                    details={"shape": h.shape, "n_q": self.n_q},
                )
            object.__setattr__(self, "hamiltonian", h)

    @classmethod
    def uniform(cls, n_q: int, kappa: float, hamiltonian: Optional[OperatorLike] = None) -> "LindbladModel":
        return cls(n_q, (kappa,) * n_q, hamiltonian)

    @property
    def dim(self) -> int:
        return 2 ** self.n_q

    @property
    def is_uniform(self) -> bool:
        return len(set(self.rates)) <= 1

    @property
    def kappa(self) -> float:
        if not self.is_uniform:
            raise ValidationError(
                "Jump codes require equal decay rates on every qubit",
                details={"rates": self.rates},
            )
        return self.rates[0]

    @property
    def is_diagonal(self) -> bool:
        h = self.hamiltonian
        return h is None or np.count_nonzero(h - np.diag(np.diag(h))) == 0

    def jump_operators(self) -> List[np.ndarray]:
        lowering = np.array([[0, 1], [0, 0]], dtype=complex)
        ops = []
        for k, rate in enumerate(self.rates):
            local = [np.eye(2, dtype=complex)] * self.n_q
            local[k] = np.sqrt(rate) * lowering
            op = local[0]
            for factor in local[1:]:
                op = np.kron(op, factor)
            ops.append(op)
        return ops

    def decay_diagonal(self) -> np.ndarray:
        """Diagonal of sum_k kappa_k |1><1|_k."""
        return np.asarray(self.rates) @ _occupation_diagonal(self.n_q)

    def effective_hamiltonian(self) -> np.ndarray:
        h = np.zeros((self.dim, self.dim), dtype=complex) if self.hamiltonian is None else self.hamiltonian
        return h - 0.5j * np.diag(self.decay_diagonal())


@dataclass(frozen=True)
class ProtocolSchedule:
    """
    Flips every tau, a random swap layer every dt = m tau, recoveries of length t_rec.

    At a flip time k tau the flip comes first and, when k is a multiple of m, the
    swap layer follows. Pulses strictly inside a recovery window are dropped.
    """
    tau: float = 2.0
    m: int = 2
    t_rec: float = 0.0
    flips: bool = True
    swaps: bool = True

    def __post_init__(self) -> None:
        if self.tau <= 0:
            raise ValidationError(f"Flip interval must be positive, got {self.tau}")
        if self.m < 1 or self.m % 2:
            raise ValidationError(f"m must be an even integer, got {self.m}", details={"m": self.m})
        if self.t_rec < 0:
            raise ValidationError(f"Recovery duration must be non-negative, got {self.t_rec}")

    @classmethod
    def idle(cls, t_rec: float = 0.0) -> "ProtocolSchedule":
        """No decoupling at all."""
        return cls(t_rec=t_rec, flips=False, swaps=False)

    @property
    def swap_interval(self) -> float:
        return self.m * self.tau

    @property
    def decoupling(self) -> bool:
        return self.flips or self.swaps

    def pulse_time(self, k: int) -> float:
        return k * self.tau

    def pulses_at(self, k: int) -> List["EventKind"]:
        """Pulse kinds on grid point k tau."""
        kinds = []
        if self.flips:
            kinds.append(EventKind.FLIP)
        if self.swaps and k % self.m == 0:
            kinds.append(EventKind.SWAP)
        return kinds


def recovery_duration(n_physical: int) -> float:
    """t_rec = (3/2 (n_P - 1) + 2) t0: n_P - 1 CNOTs plus two single-qubit gates."""
    if n_physical < 2:
        raise ValidationError(f"Recovery needs at least 2 qubits, got {n_physical}")
    return (n_physical - 1) * CNOT_DURATION + 2 * GATE_TIME


def in_recovery_window(t: float, jump_time: float, t_rec: float) -> bool:
    """True strictly inside (t_jump, t_jump + t_rec); pulses there are dropped, jumps there are fatal."""
    return jump_time < t < jump_time + t_rec


def p_no_decay_during_recovery(n_q: int, kappa: float, t_rec: float) -> float:
    """p'(t_rec) = exp(-(n_q/2) kappa t_rec)."""
    return float(np.exp(-0.5 * n_q * kappa * t_rec))


# ---------------------------------------------------------------------------
# Events
# ---------------------------------------------------------------------------

class EventKind(str, Enum):
    FLIP = "F"
    SWAP = "S"
    JUMP = "J"
    RECOVERY = "R"
    UNCORRECTABLE = "X"


_ORDER = {EventKind.RECOVERY: 0, EventKind.FLIP: 1, EventKind.SWAP: 2, EventKind.JUMP: 3, EventKind.UNCORRECTABLE: 3}


@dataclass(frozen=True)
class Event:
    time: float
    kind: EventKind
    qubit: Optional[int] = None
    # swap layers carry their position map
    permutation: Optional[Tuple[int, ...]] = None


def schedule_events(
    protocol: ProtocolSchedule,
    total_time: float,
    jump_times: Sequence[float],
    jump_qubits: Optional[Sequence[int]] = None,
) -> List[Event]:
    """
    Merge grid pulses, jumps and recovery ends into one ordered list.

    A jump inside a pending recovery window is recorded as UNCORRECTABLE and
    ends the list.
    """
    jumps = sorted(zip(jump_times, jump_qubits if jump_qubits is not None else [None] * len(jump_times)))
    events: List[Event] = []
    opened: List[float] = []
    failed_at = None
    for t, q in jumps:
        if opened and in_recovery_window(t, opened[-1], protocol.t_rec):
            events.append(Event(t, EventKind.UNCORRECTABLE, q))
            failed_at = t
            break
        events.append(Event(t, EventKind.JUMP, q))
        opened.append(t)
        if t + protocol.t_rec <= total_time:
            events.append(Event(t + protocol.t_rec, EventKind.RECOVERY, q))

    horizon = total_time if failed_at is None else failed_at
    if protocol.decoupling:
        k = 1
        while protocol.pulse_time(k) <= horizon + 1e-12:
            t = protocol.pulse_time(k)
            if not any(in_recovery_window(t, start, protocol.t_rec) for start in opened):
                events.extend(Event(t, kind) for kind in protocol.pulses_at(k))
            k += 1
    events = [e for e in events if e.time <= horizon or e.kind is EventKind.UNCORRECTABLE]
    return sorted(events, key=lambda e: (e.time, _ORDER[e.kind]))


# ---------------------------------------------------------------------------
# Single trajectory
# ---------------------------------------------------------------------------

@dataclass
class TrajectoryRecord:
    """
    Per-trajectory log behind the ensemble averages.

    Event times are non-decreasing: a FLIP and the SWAP layer on the same grid
    point share a time, with the FLIP first.
    """
    index: int
    times: np.ndarray
    fidelity: np.ndarray
    events: List[Event] = field(default_factory=list)
    failed: bool = False
    permutation: Tuple[int, ...] = ()
    states: Optional[List[np.ndarray]] = field(default=None, repr=False)

    @property
    def jumps(self) -> List[Tuple[float, int]]:
        return [(e.time, e.qubit) for e in self.events if e.kind in (EventKind.JUMP, EventKind.UNCORRECTABLE)]

    def jumps_until(self, times: np.ndarray) -> np.ndarray:
        jump_times = np.array([t for t, _ in self.jumps])
        return np.searchsorted(np.sort(jump_times), times, side="right").astype(float)


class _Drift:
    """exp(-i H_eff s) applied to vectors; elementwise for diagonal H_eff."""

    def __init__(self, model: LindbladModel):
        h_eff = model.effective_hamiltonian()
        self.diagonal = model.is_diagonal
        if self.diagonal:
            self.evals = np.diag(h_eff).copy()
        else:
            self.evals, self.vecs = linalg.eig(h_eff)
            self.vecs_inv = linalg.inv(self.vecs)

    def __call__(self, psi: np.ndarray, s: float) -> np.ndarray:
        phase = np.exp(-1j * self.evals * s)
        if self.diagonal:
            return phase * psi
        return self.vecs @ (phase * (self.vecs_inv @ psi))


def _norm2(psi: np.ndarray) -> float:
    return float(np.real(np.vdot(psi, psi)))


def evolve_trajectory(
    model: LindbladModel,
    protocol: ProtocolSchedule,
    psi0: StateVector,
    total_time: float,
    rng: np.random.Generator,
    times: Optional[np.ndarray] = None,
    code: Optional[JumpCode] = None,
    store_states: bool = False,
    index: int = 0,
) -> TrajectoryRecord:
    """
    Unravel one trajectory of the protected memory.

    Fidelity is |<psi_ref|psi(t)>|^2 where psi_ref is psi0 carried through the
    same flips and swap layers. With a code, every jump opens a recovery window
    and R_i is applied at its end; a sample inside a pending window is taken on
    the state the pending recovery would restore. A second jump inside a window
    makes the trajectory fail, with fidelity 0 from then on.

    Args:
        model: Hamiltonian and decay rates
        protocol: Flip/swap timing and recovery duration
        psi0: Normalized initial register state
        total_time: T > 0
        rng: Stream owned by this trajectory
        times: Sample grid, default 0..T in 41 points
        code: Active jump code, None for an unprotected register
        store_states: Keep the normalized state at every sample time
        index: Trajectory index carried into the record

    Returns:
        TrajectoryRecord with fidelity samples and the event log

    Raises:
        ValidationError: If psi0 is not normalized or T is not positive
        DimensionError: If psi0, model and code disagree on the register size
    """
    if total_time <= 0:
        raise ValidationError(f"Total time must be positive, got {total_time}")
    if not psi0.is_normalized():
        raise ValidationError("Initial state must be normalized", details={"norm": psi0.norm()})
    if psi0.n_q != model.n_q:
        raise DimensionError("State and model differ in qubit count", details={"state": psi0.n_q, "model": model.n_q})
    if code is not None:
        if code.n_physical != model.n_q:
            raise DimensionError("Code and model differ in qubit count")
        if not model.is_uniform:
            raise ValidationError("Jump codes require equal decay rates", details={"rates": model.rates})

    times = np.linspace(0.0, total_time, 41) if times is None else np.asarray(times, dtype=float)
    n_q = model.n_q
    drift = _Drift(model)
    occupation = _occupation_diagonal(n_q)
    rates = np.asarray(model.rates)
    flip = flip_operator(n_q) if protocol.flips else None
    recoveries: Dict[int, np.ndarray] = {}

    def _recovery(qubit: int) -> np.ndarray:
        if qubit not in recoveries:
            recoveries[qubit] = recovery_operator(qubit, n_q, code.phase).entries
        return recoveries[qubit]

    psi = psi0.amps.copy()
    reference = psi0.amps.copy()
    tracker = PermutationTracker(n_q)
    threshold = rng.random()
    fidelity = np.zeros(times.size)
    states: Optional[List[np.ndarray]] = [] if store_states else None
    events: List[Event] = []
    pending: Optional[Tuple[float, int]] = None
    failed = False

    t = 0.0
    k_pulse = 1
    i_sample = 0

    def _sample() -> None:
        nonlocal i_sample
        while i_sample < times.size and times[i_sample] <= t + 1e-12:
            current = psi / np.sqrt(_norm2(psi))
            if pending is not None:
                current = _recovery(pending[1]) @ current
            fidelity[i_sample] = abs(np.vdot(reference, current)) ** 2
            if states is not None:
                states.append(current)
            i_sample += 1

    _sample()
    while t < total_time and i_sample < times.size:
        candidates = [total_time]
        if i_sample < times.size:
            candidates.append(times[i_sample])
        if protocol.decoupling:
            candidates.append(protocol.pulse_time(k_pulse))
        if pending is not None:
            candidates.append(pending[0] + protocol.t_rec)
        t_next = min(candidates)
        span = t_next - t

        evolved = drift(psi, span) if span > 0 else psi
        if span > 0 and _norm2(evolved) <= threshold:
            s = optimize.brentq(lambda x: _norm2(drift(psi, x)) - threshold, 0.0, span, xtol=1e-12)
            psi = drift(psi, s)
            t += s
            weights = rates * (occupation @ (np.abs(psi) ** 2))
            total = weights.sum()
            if total <= 0:
                raise NumericalError("Jump selected with zero decay weight", details={"time": t})
            qubit = int(rng.choice(n_q, p=weights / total))
            lowered = np.zeros_like(psi)
            mask = occupation[qubit] == 1
            target = np.arange(psi.size)[mask] ^ (1 << (n_q - 1 - qubit))
            lowered[target] = psi[mask]
            psi = lowered / np.sqrt(_norm2(lowered))
            threshold = rng.random()
            if code is not None and pending is not None and in_recovery_window(t, pending[0], protocol.t_rec):
                events.append(Event(t, EventKind.UNCORRECTABLE, qubit))
                failed = True
                logger.debug(f"Trajectory {index}: second decay at t={t:.3f} during recovery")
                break
            events.append(Event(t, EventKind.JUMP, qubit))
            if code is not None:
                pending = (t, qubit)
            continue

        psi = evolved
        t = t_next
        if pending is not None and t >= pending[0] + protocol.t_rec - 1e-12:
            psi = _recovery(pending[1]) @ psi
            events.append(Event(t, EventKind.RECOVERY, pending[1]))
            pending = None
        if protocol.decoupling and t >= protocol.pulse_time(k_pulse) - 1e-12:
            if pending is None or not in_recovery_window(t, pending[0], protocol.t_rec):
                for kind in protocol.pulses_at(k_pulse):
                    if kind is EventKind.FLIP:
                        psi = flip.apply(psi)
                        reference = flip.apply(reference)
                        events.append(Event(t, kind))
                    else:
                        layer, tracker = sample_swap_layer(tracker, rng)
                        psi = apply_permutation(psi, layer)
                        reference = apply_permutation(reference, layer)
                        events.append(Event(t, kind, permutation=layer))
            k_pulse += 1
        _sample()

    if failed:
        fidelity[i_sample:] = 0.0
        if states is not None:
            states.extend([np.zeros_like(psi)] * (times.size - i_sample))
    return TrajectoryRecord(
        index=index,
        times=times,
        fidelity=fidelity,
        events=events,
        failed=failed,
        permutation=tracker.sigma,
        states=states,
    )


# ---------------------------------------------------------------------------
# Ensembles
# ---------------------------------------------------------------------------

@dataclass
class EnsembleConfig:
    model: LindbladModel
    protocol: ProtocolSchedule
    initial_state: StateVector
    total_time: float
    trajectories: int = 100
    seed: int = 0
    threads: int = 1
    times: Optional[np.ndarray] = None
    code: Optional[JumpCode] = None
    store_states: bool = False


@dataclass
class EnsembleResult:
    times: np.ndarray
    fidelity_mean: np.ndarray
    fidelity_stderr: np.ndarray
    n_jumps_mean: np.ndarray
    records: List[TrajectoryRecord] = field(default_factory=list, repr=False)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "time": self.times,
                "fidelity_mean": self.fidelity_mean,
                "fidelity_stderr": self.fidelity_stderr,
                "n_jumps_mean": self.n_jumps_mean,
            }
        )

    def density_matrices(self) -> np.ndarray:
        """Ensemble density matrix at every sample time (needs stored states)."""
        if any(r.states is None for r in self.records):
            raise ValidationError("Density matrices need trajectories run with store_states")
        stacked = np.array([r.states for r in self.records])
        return np.einsum("rti,rtj->tij", stacked, stacked.conj()) / len(self.records)

    def survival(self, times: Optional[np.ndarray] = None) -> np.ndarray:
        """Fraction of trajectories without any jump up to each time."""
        times = self.times if times is None else np.asarray(times)
        counts = np.array([r.jumps_until(times) for r in self.records])
        return (counts == 0).mean(axis=0)


def run_ensemble(config: EnsembleConfig) -> EnsembleResult:
    """
    Average independent trajectories; trajectory k draws from
    SeedSequence(seed, spawn_key=(k,)), so the result is independent of threads.
    """
    if config.trajectories < 1:
        raise ValidationError("At least one trajectory is required", details={"trajectories": config.trajectories})
    times = np.linspace(0.0, config.total_time, 41) if config.times is None else np.asarray(config.times, dtype=float)

    def _one(index: int) -> TrajectoryRecord:
        rng = np.random.default_rng(np.random.SeedSequence(entropy=config.seed, spawn_key=(index,)))
        return evolve_trajectory(
            config.model,
            config.protocol,
            config.initial_state,
            config.total_time,
            rng,
            times=times,
            code=config.code,
            store_states=config.store_states,
            index=index,
        )

    with ThreadPoolExecutor(max_workers=config.threads) as executor:
        records = list(executor.map(_one, range(config.trajectories)))

    fid = np.stack([r.fidelity for r in records])
    jumps = np.stack([r.jumps_until(times) for r in records])
    mean = fid.mean(axis=0)
    stderr = fid.std(axis=0, ddof=1) / np.sqrt(len(records)) if len(records) > 1 else np.zeros_like(mean)
    failures = sum(r.failed for r in records)
    logger.info(
        f"Ensemble of {len(records)} trajectories done: final fidelity {mean[-1]:.4f} "
        f"+/- {stderr[-1]:.4f}, {failures} uncorrectable"
    )
    return EnsembleResult(times, mean, stderr, jumps.mean(axis=0), records)


# ---------------------------------------------------------------------------
# Master-equation oracle
# ---------------------------------------------------------------------------

def lindblad_rhs(model: LindbladModel):
    """Vectorized right-hand side of the master equation for solve_ivp."""
    dim = model.dim
    h = np.zeros((dim, dim), dtype=complex) if model.hamiltonian is None else model.hamiltonian
    jumps = model.jump_operators()
    decay = sum(l.conj().T @ l for l in jumps)

    def rhs(_t: float, y: np.ndarray) -> np.ndarray:
        rho = y.reshape(dim, dim)
        out = -1j * (h @ rho - rho @ h) - 0.5 * (decay @ rho + rho @ decay)
        for l in jumps:
            out += l @ rho @ l.conj().T
        return out.ravel()

    return rhs


def integrate_master_equation(
    model: LindbladModel,
    rho0: np.ndarray,
    times: np.ndarray,
    rtol: float = 1e-9,
    atol: float = 1e-11,
) -> np.ndarray:
    """
    Dense Runge-Kutta integration of the master equation.

    Returns:
        Array of density matrices, shape (len(times), N, N)

    Raises:
        NumericalError: If the integrator fails
    """
    rho0 = np.asarray(rho0, dtype=complex)
    if rho0.shape != (model.dim, model.dim):
        raise DimensionError("Initial density matrix does not match the model", details={"shape": rho0.shape})
    times = np.asarray(times, dtype=float)
    solution = integrate.solve_ivp(
        lindblad_rhs(model),
        (float(times[0]), float(times[-1])),
        rho0.ravel(),
        method="RK45",
        t_eval=times,
        rtol=rtol,
        atol=atol,
    )
    if not solution.success:
        raise NumericalError("Master-equation integration failed", details={"message": solution.message})
    rhos = solution.y.T.reshape(times.size, model.dim, model.dim)
    drift = abs(np.trace(rhos[-1]).real - 1.0)
    if drift > 1e-6:
        raise NumericalError("Master-equation trace drifted", details={"drift": drift})
    return rhos
