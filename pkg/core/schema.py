"""
Pydantic schemas for experiment configuration files.
Every section forbids unknown fields so typos surface as field-level errors.
"""
import math
from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


EXPERIMENTS = (
    "correlation-matrix",
    "parec-fidelity",
    "nrd-memory",
    "decouple-scaling",
    "jumpcode-recovery",
    "combined-figure5",
    "analytic-curves",
    "constants-check",
)

ExperimentName = Literal[
    "correlation-matrix",
    "parec-fidelity",
    "nrd-memory",
    "decouple-scaling",
    "jumpcode-recovery",
    "combined-figure5",
    "analytic-curves",
    "constants-check",
]

ScheduleName = Literal["PDD", "SDD", "NRD", "EMD", "SEMD", "RANDOM_PATH"]
SetName = Literal["pauli", "identity", "single-x"]


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ChainSection(_Section):
    """Static Heisenberg-chain imperfections, drawn uniformly on [-sqrt(3) eps, sqrt(3) eps]."""
    epsilon: float = Field(default=1e-4, ge=0.0, description="Imperfection strength in 1/t0")
    full_heisenberg: bool = Field(default=False, description="Also draw XX and YY couplings")
    detunings: Optional[List[float]] = Field(default=None, description="Explicit detunings, overrides sampling")
    couplings_z: Optional[List[float]] = Field(default=None, description="Explicit ZZ couplings, overrides sampling")

    @model_validator(mode="after")
    def validate_explicit(self):
        """Explicit detunings and couplings must be given together."""
        if (self.detunings is None) != (self.couplings_z is None):
            raise ValueError("detunings and couplings_z must be supplied together")
        if self.detunings is not None and len(self.couplings_z) != len(self.detunings) - 1:
            raise ValueError("couplings_z must have exactly len(detunings) - 1 entries")
        return self


class DecouplingSection(_Section):
    """Decoupling-schedule parameters for nrd-memory and decouple-scaling."""
    n_q: int = Field(default=2, ge=1, le=10)
    kind: ScheduleName = "NRD"
    kinds: List[ScheduleName] = Field(default_factory=lambda: ["PDD", "SDD", "NRD", "EMD", "SEMD", "RANDOM_PATH"])
    dt: float = Field(default=0.01, gt=0.0, description="Pulse interval in t0")
    steps: int = Field(default=1600, ge=1, description="Number of pulse intervals")
    set: SetName = "pauli"
    inner_set: SetName = "pauli"
    realizations: int = Field(default=20, ge=1)
    gue_strength: float = Field(default=1.0, gt=0.0, description="Scale of the GUE internal Hamiltonian")


class ParecSection(_Section):
    """PAREC / correlation-matrix parameters."""
    n_q: int = Field(default=4, ge=1, le=10)
    iterations: int = Field(default=50, ge=1)
    delta: float = Field(default=1e-3, gt=0.0)
    samples: int = Field(default=200, ge=0, description="Monte-Carlo draws (0 disables sampling)")
    mode: Literal["per_gate", "per_iteration"] = "per_gate"
    swap_free: bool = Field(default=False, description="Drop terminal QFT swaps, track bit reversal instead")


class CodeSection(_Section):
    """Detected-jump code parameters."""
    n_logical: int = Field(default=3, ge=1, le=6, description="Logical qubits of the combined-protection memory")
    n_logical_values: List[int] = Field(default_factory=lambda: [1, 2, 3])
    phase: float = Field(default=0.0, description="Codeword relative phase phi")
    variant: Literal["TENSOR", "FOUR_QUBIT"] = "TENSOR"

    @field_validator("phase")
    @classmethod
    def validate_phase(cls, v):
        """Recovery supports phi in {0, pi}."""
        if not (math.isclose(v, 0.0, abs_tol=1e-12) or math.isclose(v, math.pi, abs_tol=1e-12)):
            raise ValueError(f"Codeword phase must be 0 or pi, got {v}")
        return v

    @field_validator("n_logical_values")
    @classmethod
    def validate_values(cls, v):
        if not v or any(n < 1 or n > 6 for n in v):
            raise ValueError("n_logical_values entries must lie in 1..6")
        return v


class ProtocolSection(_Section):
    """Combined flip/swap decoupling and recovery protocol."""
    tau: float = Field(default=2.0, gt=0.0, description="Flip interval in t0")
    m: int = Field(default=2, ge=2, description="Swap interval as a multiple of tau")
    kappa: float = Field(default=1e-3, ge=0.0, description="Decay rate in 1/t0")
    t_rec: Optional[float] = Field(default=None, ge=0.0, description="Recovery duration, default from gate counts")
    total_time: float = Field(default=2000.0, gt=0.0)
    grid_points: int = Field(default=41, ge=2)

    @field_validator("m")
    @classmethod
    def validate_m(cls, v):
        """m must be even."""
        if v % 2 != 0:
            raise ValueError(f"m must be an even integer, got {v}")
        return v


class EnsembleSection(_Section):
    """Trajectory-ensemble parameters."""
    trajectories: int = Field(default=100, ge=1)
    store_states: bool = Field(default=False, description="Keep trajectory states; adds the final ensemble purity to metadata")


class AnalyticsSection(_Section):
    """Grid and free parameters of analytic prediction curves."""
    t_max: float = Field(default=2000.0, gt=0.0)
    points: int = Field(default=201, ge=2)
    n_q: int = Field(default=8, ge=1)
    sigma: Optional[float] = Field(default=None, gt=0.0, description="Chaotic fraction of the Frahm law")
    t_c: Optional[float] = Field(default=None, gt=0.0)
    draws: int = Field(default=20, ge=1, description="Random chain draws for constants")
    n_p_values: List[int] = Field(default_factory=lambda: [4, 6, 8])


class ExperimentConfig(_Section):
    """Resolved configuration of one named experiment."""
    experiment: ExperimentName
    seed: Optional[int] = Field(default=None, ge=0, description="Master seed, defaults to MASTER_SEED")
    output_dir: Optional[str] = None
    threads: Optional[int] = Field(default=None, ge=1, le=64)
    chain: ChainSection = Field(default_factory=ChainSection)
    decoupling: DecouplingSection = Field(default_factory=DecouplingSection)
    parec: ParecSection = Field(default_factory=ParecSection)
    code: CodeSection = Field(default_factory=CodeSection)
    protocol: ProtocolSection = Field(default_factory=ProtocolSection)
    ensemble: EnsembleSection = Field(default_factory=EnsembleSection)
    analytics: AnalyticsSection = Field(default_factory=AnalyticsSection)
