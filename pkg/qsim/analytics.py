"""
Closed-form fidelity predictions, reference scaling laws and fitting helpers.

All curves take times in units of t0 and equal 1 at t = 0.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy import optimize

from core.exceptions import NumericalError, ValidationError
from core.logger import setup_logger

logger = setup_logger(__name__)

ArrayLike = Union[float, np.ndarray]


@dataclass
class PredictionCurve:
    """Named analytic curve sampled on a time grid."""
    model: str
    times: np.ndarray
    fidelity: np.ndarray
    parameters: Dict[str, float] = field(default_factory=dict)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"time": self.times, "fidelity": self.fidelity, "model": self.model})


def _non_negative(**values: float) -> None:
    for name, value in values.items():
        if value < 0:
            raise ValidationError(f"{name} must be non-negative, got {value}", details={name: value})


def p_no_decay(n_excited: float, kappa: float, t: ArrayLike) -> ArrayLike:
    """Probability exp(-n1 kappa t) that none of n1 excited qubits has decayed."""
    _non_negative(n_excited=n_excited, kappa=kappa)
    return np.exp(-n_excited * kappa * np.asarray(t, dtype=float))


def mean_decay_events(n_q: int, kappa: float, t: ArrayLike) -> ArrayLike:
    """n_e(t) = (n_q/2) kappa t for a register holding n_q/2 excitations."""
    return 0.5 * n_q * kappa * np.asarray(t, dtype=float)


def f_jumpcode(n_q: int, kappa: float, t_rec: float, t: ArrayLike) -> ArrayLike:
    """
    Jump-code memory fidelity exp(-(n_q kappa/2)^2 t_rec t).

    Fails only when a second decay hits during a recovery window; the mean number
    of decays is given by `mean_decay_events`.
    """
    _non_negative(kappa=kappa, t_rec=t_rec)
    return np.exp(-((0.5 * n_q * kappa) ** 2) * t_rec * np.asarray(t, dtype=float))


def f_coherent(t: ArrayLike, dt: float, c2: float, subtrahend: float) -> ArrayLike:
    """
    Swap-decoupled coherent fidelity exp(-t dt (c2 - subtrahend)).

    `subtrahend` is c1^2 by default in callers, or a value in the c3 interval.
    """
    return np.exp(-np.asarray(t, dtype=float) * dt * (c2 - subtrahend))


def f_combined(
    n_q: int,
    kappa: float,
    t_rec: float,
    dt: float,
    c2: float,
    c3: float,
    t: ArrayLike,
) -> ArrayLike:
    """F_ID = exp(-(c2 - c3) t dt (1 + kappa t_rec n_q/2)) exp(-(n_q kappa/2)^2 t_rec t)."""
    t = np.asarray(t, dtype=float)
    coherent = np.exp(-(c2 - c3) * t * dt * (1.0 + kappa * t_rec * n_q / 2.0))
    return coherent * f_jumpcode(n_q, kappa, t_rec, t)


def frahm_time_scale(n_g: int, h0_mean_square: float, dt: float) -> float:
    """t_c from 1/t_c = n_g^2 (tr{H0^2}/N) dt^2."""
    rate = n_g ** 2 * h0_mean_square * dt ** 2
    if rate <= 0:
        raise ValidationError("Frahm time scale needs a non-zero perturbation", details={"rate": rate})
    return 1.0 / rate


def frahm_decay(t: ArrayLike, t_c: float, sigma: Optional[float], dim: int) -> ArrayLike:
    """exp(-t/t_c - 2 t^2/(sigma t_c N)); sigma None or inf drops the quadratic term."""
    t = np.asarray(t, dtype=float)
    exponent = t / t_c
    if sigma is not None and np.isfinite(sigma):
        exponent = exponent + 2.0 * t ** 2 / (sigma * t_c * dim)
    return np.exp(-exponent)


def parec_bound(t: ArrayLike, n_g: int, mean_square: float) -> ArrayLike:
    """
    Lower bound 1 - 4 t n_g tr{dH^2}/N on the PAREC-averaged fidelity.

    Args:
        t: Iterations
        n_g: Gates per iteration of the original algorithm
        mean_square: tr{dH^2}/N (delta^2 (1 - N^-2) for traceless GUE)
    """
    return 1.0 - 4.0 * np.asarray(t, dtype=float) * n_g * mean_square


def parec_bound_unequal(
    t: ArrayLike, h0_mean_square: float, intervals: Sequence[float], dt_bb: float = 0.0
) -> ArrayLike:
    """1 - t tr{H0^2}/N sum_j (dt_j + dt_bb)^2 for gate-dependent perturbation times."""
    spread = float(np.sum((np.asarray(intervals, dtype=float) + dt_bb) ** 2))
    return 1.0 - np.asarray(t, dtype=float) * h0_mean_square * spread


def parec_bound_per_iteration(t: ArrayLike, n_g: int, mean_square: float) -> ArrayLike:
    """1 - t (n_g + 1)^2 tr{dH^2}/N with one random pulse per iteration."""
    return 1.0 - np.asarray(t, dtype=float) * (n_g + 1) ** 2 * mean_square


def parec_memory_prediction(total_time: ArrayLike, dt: float, h0_mean_square: float) -> ArrayLike:
    """Random-decoupled memory: 1 - T dt tr{H0^2}/N."""
    return 1.0 - np.asarray(total_time, dtype=float) * dt * h0_mean_square


@dataclass(frozen=True)
class ScalingLaw:
    """Monomial T^a T_c^b kappa^c of a worst-case bound, for regression reference."""
    kind: str
    time_power: int
    cycle_power: int
    kappa_power: int
    value: float


_SCALINGS = {
    "PDD": (2, 2, 4),
    "SDD": (2, 4, 6),
    "NRD": (1, 1, 2),
    "EMD": (1, 3, 4),
    "SEMD": (1, 5, 6),
    # random-path schedules perform comparably to embedded ones
    "RANDOM_PATH": (1, 3, 4),
}


def bound_scalings(kind: str, total_time: float, interval: float, kappa: float) -> ScalingLaw:
    """
    Reference monomial of the worst-case infidelity bound of a schedule kind.

    `interval` is T_c for cyclic and embedded kinds and dt for NRD.
    """
    kind = str(getattr(kind, "value", kind))
    if kind not in _SCALINGS:
        raise ValidationError(f"No scaling law for '{kind}'", details={"known": sorted(_SCALINGS)})
    a, b, c = _SCALINGS[kind]
    value = total_time ** a * interval ** b * kappa ** c
    return ScalingLaw(kind=kind, time_power=a, cycle_power=b, kappa_power=c, value=float(value))


# ---------------------------------------------------------------------------
# Fitting
# ---------------------------------------------------------------------------

def loglog_slope(x: Sequence[float], y: Sequence[float]) -> float:
    """Least-squares slope of log|y| against log x."""
    x = np.asarray(x, dtype=float)
    y = np.abs(np.asarray(y, dtype=float))
    mask = (x > 0) & (y > 0)
    if mask.sum() < 2:
        raise NumericalError("Need at least two positive points for a log-log fit", details={"points": int(mask.sum())})
    slope, _ = np.polyfit(np.log(x[mask]), np.log(y[mask]), 1)
    return float(slope)


def fit_polynomial_decay(t: Sequence[float], fidelity: Sequence[float]) -> Tuple[float, float]:
    """
    Coefficients (a, b) of 1 - F ~ a t + b t^2 (no intercept).
    """
    t = np.asarray(t, dtype=float)
    loss = 1.0 - np.asarray(fidelity, dtype=float)
    design = np.column_stack([t, t ** 2])
    (a, b), *_ = np.linalg.lstsq(design, loss, rcond=None)
    return float(a), float(b)


def fit_decay_rate(t: Sequence[float], fidelity: Sequence[float]) -> float:
    """gamma of F ~ exp(-gamma t), fitted through the origin in log space."""
    t = np.asarray(t, dtype=float)
    log_f = np.log(np.maximum(np.asarray(fidelity, dtype=float), 1e-300))
    denom = float(np.dot(t, t))
    if denom == 0:
        raise NumericalError("Decay-rate fit needs non-zero times")
    return float(-np.dot(t, log_f) / denom)


def fit_frahm(t: Sequence[float], fidelity: Sequence[float], dim: int) -> Tuple[float, float]:
    """
    Nonlinear fit of (t_c, sigma) in exp(-t/t_c - 2 t^2/(sigma t_c N)).

    The linear fit of -ln F against (t, t^2) provides the starting point.

    Raises:
        NumericalError: If the fit does not converge
    """
    t = np.asarray(t, dtype=float)
    fidelity = np.asarray(fidelity, dtype=float)
    design = np.column_stack([t, t ** 2])
    (lin, quad), *_ = np.linalg.lstsq(design, -np.log(np.maximum(fidelity, 1e-300)), rcond=None)
    lin = max(lin, 1e-12)
    quad = max(quad, 1e-12)
    p0 = (1.0 / lin, 2.0 * lin / (quad * dim))

    def model(tt, t_c, sigma):
        return frahm_decay(tt, t_c, sigma, dim)

    try:
        (t_c, sigma), _ = optimize.curve_fit(model, t, fidelity, p0=p0, bounds=(1e-12, np.inf), maxfev=20000)
    except (RuntimeError, ValueError) as e:
        raise NumericalError("Frahm fit did not converge", details={"error": str(e)})
    return float(t_c), float(sigma)
