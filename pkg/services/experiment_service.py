"""
Experiment runner service.

Runs one named experiment from a resolved ExperimentConfig and writes its CSV
artifacts with JSON metadata sidecars.
"""
from typing import Any, Callable, Dict, List, Optional

import numpy as np
import pandas as pd

from core.config import get_settings
from core.exceptions import NumericalError, ValidationError
from core.exporters import create_output_filename, export_artifact, matrix_to_long_frame
from core.logger import log_duration, setup_logger
from core.schema import ExperimentConfig
from qsim import analytics
from qsim.algos import (
    build_qft,
    correlation_matrix_gue_average,
    iterated_fidelity,
    parec_correlation_average,
    parec_fidelity_estimate,
)
from qsim.decouple import DecouplingSchedule, ScheduleKind, mean_fidelity_trace, named_set, nrd_memory_prediction
from qsim.jumpcode import (
    CodeVariant,
    build_code,
    code_constants,
    codeword_records,
    encode,
    jump,
    permutation_moments,
    recovery,
    zzzz_parity_bias,
)
from qsim.perturb import ChainModel, build_chain_hamiltonian, sample_gue, sample_uniform_chain
from qsim.qcore import StateVector, operator_two_norm, random_state
from qsim.trajectory import (
    EnsembleConfig,
    LindbladModel,
    ProtocolSchedule,
    p_no_decay_during_recovery,
    recovery_duration,
    run_ensemble,
)

logger = setup_logger(__name__)


class ExperimentService:
    """Dispatches a resolved config to its experiment handler."""

    def __init__(self, config: ExperimentConfig):
        """
        Initialize the service.

        Args:
            config: Config with seed, threads and output_dir already resolved
        """
        self.settings = get_settings()
        self.config = config
        self.seed = config.seed if config.seed is not None else self.settings.master_seed
        self.threads = config.threads or self.settings.threads
        self.output_dir = config.output_dir or self.settings.output_dir
        self.timings: Dict[str, float] = {}
        self._handlers: Dict[str, Callable[[], List[str]]] = {
            "correlation-matrix": self.run_correlation_matrix,
            "parec-fidelity": self.run_parec_fidelity,
            "nrd-memory": self.run_nrd_memory,
            "decouple-scaling": self.run_decouple_scaling,
            "jumpcode-recovery": self.run_jumpcode_recovery,
            "combined-figure5": self.run_combined_figure5,
            "analytic-curves": self.run_analytic_curves,
            "constants-check": self.run_constants_check,
        }

    # ------------------------------------------------------------------
    # Plumbing
    # ------------------------------------------------------------------

    def child_seed(self, stream: int) -> int:
        """Independent integer seed for sub-stream `stream` of the master seed."""
        return int(np.random.SeedSequence(entropy=(self.seed, stream)).generate_state(1)[0])

    def rng(self, stream: int) -> np.random.Generator:
        return np.random.default_rng(self.child_seed(stream))

    def _metadata(self, artifact: str, diagnostics: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
        return {
            "experiment": self.config.experiment,
            "artifact": artifact,
            "master_seed": self.seed,
            "threads": self.threads,
            "config": self.config.model_dump(mode="json"),
            "timings_s": dict(self.timings),
            "diagnostics": diagnostics or {},
        }

    def _write(self, artifact: str, frame: pd.DataFrame, diagnostics: Optional[Dict[str, Any]] = None) -> str:
        path = create_output_filename(self.config.experiment, artifact, self.output_dir)
        return export_artifact(frame, path, self._metadata(artifact, diagnostics))

    def _timed(self, label: str, func: Callable, *args, **kwargs):
        with log_duration(logger, label) as elapsed:
            result = func(*args, **kwargs)
        self.timings[label] = elapsed["seconds"]
        return result

    def run(self) -> List[str]:
        """
        Run the configured experiment.

        Returns:
            Paths of the written CSV artifacts
        """
        name = self.config.experiment
        handler = self._handlers.get(name)
        if handler is None:
            raise ValidationError(f"Unknown experiment '{name}'", details={"known": sorted(self._handlers)})
        logger.info(f"Running experiment '{name}' (seed={self.seed}, threads={self.threads})")
        with log_duration(logger, f"Experiment '{name}'"):
            paths = handler()
        logger.info(f"Experiment '{name}' wrote {len(paths)} artifacts to {self.output_dir}")
        return paths

    # ------------------------------------------------------------------
    # PAREC
    # ------------------------------------------------------------------

    def run_correlation_matrix(self) -> List[str]:
        """GUE-averaged correlation matrix of the QFT and, with samples, its PAREC average."""
        cfg = self.config.parec
        seq = build_qft(cfg.n_q, swap_free=cfg.swap_free)
        gue = self._timed("gue_average", correlation_matrix_gue_average, seq, cfg.delta)
        normalized = gue.normalized()
        paths = [
            self._write(
                "gue",
                matrix_to_long_frame(normalized),
                {
                    "n_g": seq.n_g,
                    "bit_reversed": seq.bit_reversed,
                    "diagonal_max_deviation": float(np.max(np.abs(np.diag(normalized) - 1.0))),
                    "fidelity_estimate": gue.fidelity_estimate(),
                },
            )
        ]
        if cfg.samples > 0:
            parec = self._timed(
                "parec_average", parec_correlation_average, seq, cfg.delta, cfg.samples, self.rng(1)
            )
            mean = parec.mean.normalized()
            expected = parec.expected.normalized()
            structured = parec.expected.values != 0
            diagnostics = {
                "samples": parec.samples,
                "bound": parec.bound,
                "fidelity_estimate": parec.estimate,
                "max_else_entry": float(np.max(np.abs(mean[~structured] - 1.0 / gue.dim ** 2))),
                "max_structured_deviation": float(np.max(np.abs(mean - expected)[structured])),
            }
            paths.append(self._write("parec", matrix_to_long_frame(mean), diagnostics))
            paths.append(self._write("parec_expected", matrix_to_long_frame(expected), diagnostics))
        return paths

    def run_parec_fidelity(self) -> List[str]:
        """Iterated QFT under a fixed GUE perturbation, with and without PAREC."""
        cfg = self.config.parec
        seq = build_qft(cfg.n_q, swap_free=cfg.swap_free)
        dh = sample_gue(seq.dim, self.rng(0), strength=cfg.delta).delta_h
        t = np.arange(1, cfg.iterations + 1, dtype=float)

        off = self._timed("parec_off", iterated_fidelity, seq, dh, cfg.iterations)
        realizations = max(cfg.samples, 1)
        rng = self.rng(1)

        def _parec_mean() -> np.ndarray:
            runs = [iterated_fidelity(seq, dh, cfg.iterations, rng=rng, mode=cfg.mode) for _ in range(realizations)]
            return np.mean(runs, axis=0)

        on = self._timed("parec_on", _parec_mean)
        mean_square = float(np.real(np.trace(dh @ dh))) / seq.dim
        if cfg.mode == "per_iteration":
            bound = analytics.parec_bound_per_iteration(t, seq.n_g, mean_square)
        else:
            bound = analytics.parec_bound(t, seq.n_g, mean_square)

        a_off, b_off = analytics.fit_polynomial_decay(t, off)
        a_on, b_on = analytics.fit_polynomial_decay(t, on)
        diagnostics: Dict[str, Any] = {
            "n_g": seq.n_g,
            "realizations": realizations,
            "mean_square": mean_square,
            "fit_off": {"linear": a_off, "quadratic": b_off},
            "fit_on": {"linear": a_on, "quadratic": b_on},
            "bound_respected": bool(np.all(on >= bound - 1e-12)),
            "estimate_t1": parec_fidelity_estimate(seq, cfg.delta),
        }
        try:
            t_c, sigma = analytics.fit_frahm(t, off, seq.dim)
            diagnostics["frahm_fit"] = {"t_c": t_c, "sigma": sigma}
        except NumericalError as e:
            logger.warning(f"Decay-law fit skipped: {e.message}")
            diagnostics["frahm_fit"] = None

        frame = pd.concat(
            [
                analytics.PredictionCurve("parec_off", t, off).to_frame(),
                analytics.PredictionCurve("parec_on", t, on).to_frame(),
                analytics.PredictionCurve("bound", t, bound).to_frame(),
            ],
            ignore_index=True,
        )
        return [self._write("curves", frame, diagnostics)]

    # ------------------------------------------------------------------
    # Decoupling
    # ------------------------------------------------------------------

    def _gue_hamiltonian(self) -> np.ndarray:
        cfg = self.config.decoupling
        return sample_gue(2 ** cfg.n_q, self.rng(0), strength=cfg.gue_strength).delta_h

    def _schedule(self, kind: str) -> DecouplingSchedule:
        cfg = self.config.decoupling
        kind = ScheduleKind(kind)
        inner = named_set(cfg.inner_set, cfg.n_q) if kind.embedded else None
        return DecouplingSchedule(kind, cfg.dt, named_set(cfg.set, cfg.n_q), inner_set=inner)

    def run_nrd_memory(self) -> List[str]:
        """Random decoupling of an idle register against the linear-in-time prediction."""
        cfg = self.config.decoupling
        h0 = self._gue_hamiltonian()
        schedule = self._schedule(cfg.kind)
        times, mean, stderr = self._timed(
            "ensemble", mean_fidelity_trace, h0, schedule, cfg.steps * cfg.dt,
            cfg.realizations, self.child_seed(1), self.threads,
        )
        prediction = nrd_memory_prediction(h0, cfg.dt, times)
        frame = pd.DataFrame(
            {
                "step": np.arange(times.size),
                "time": times,
                "fidelity": mean,
                "fidelity_stderr": stderr,
                "prediction": prediction,
            }
        )
        diagnostics = {
            "kind": cfg.kind,
            "loglog_slope": analytics.loglog_slope(times[1:], 1.0 - mean[1:]),
            "final_infidelity": float(1.0 - mean[-1]),
            "predicted_final_infidelity": float(1.0 - prediction[-1]),
        }
        return [self._write("trace", frame, diagnostics)]

    def run_decouple_scaling(self) -> List[str]:
        """Fidelity traces of every selected schedule kind on one Hamiltonian."""
        cfg = self.config.decoupling
        h0 = self._gue_hamiltonian()
        kappa = operator_two_norm(h0)
        frames = []
        diagnostics: Dict[str, Any] = {"kappa": kappa, "kinds": {}}
        for k, kind in enumerate(cfg.kinds):
            schedule = self._schedule(kind)
            times, mean, _ = self._timed(
                f"ensemble_{kind}", mean_fidelity_trace, h0, schedule, cfg.steps * cfg.dt,
                cfg.realizations, self.child_seed(10 + k), self.threads,
            )
            interval = cfg.dt if kind == "NRD" else schedule.t_c
            law = analytics.bound_scalings(kind, times[-1], interval, kappa)
            diagnostics["kinds"][kind] = {
                "loglog_slope": analytics.loglog_slope(times[1:], 1.0 - mean[1:]),
                "reference_time_power": law.time_power,
                "reference_monomial": law.value,
                "t_c": schedule.t_c,
            }
            frames.append(analytics.PredictionCurve(kind, times, mean).to_frame())
        return [self._write("curves", pd.concat(frames, ignore_index=True), diagnostics)]

    # ------------------------------------------------------------------
    # Jump codes
    # ------------------------------------------------------------------

    def run_jumpcode_recovery(self) -> List[str]:
        """Recovery fidelity after a decay on every physical qubit of every code size."""
        cfg = self.config.code
        rng = self.rng(0)
        rows = []
        codewords = {}
        sizes = [None] if cfg.variant == CodeVariant.FOUR_QUBIT.value else cfg.n_logical_values
        for n_logical in sizes:
            code = build_code(n_logical or 1, cfg.phase, cfg.variant)
            if code.variant is CodeVariant.TENSOR:
                encoded = encode(random_state(n_logical, rng), code)
            else:
                amps = rng.normal(size=code.n_codewords) + 1j * rng.normal(size=code.n_codewords)
                encoded = StateVector(code.n_physical, code.codeword_matrix.T @ amps).normalized()
            codewords[str(n_logical or code.variant.value)] = codeword_records(code)
            for qubit in range(code.n_physical):
                restored = recovery(jump(encoded, qubit), qubit, code)
                rows.append(
                    {
                        "n_logical": n_logical,
                        "n_physical": code.n_physical,
                        "jump_qubit": qubit,
                        "fidelity": encoded.fidelity(restored),
                    }
                )
        frame = pd.DataFrame(rows)
        diagnostics = {
            "min_fidelity": float(frame["fidelity"].min()),
            "phase": cfg.phase,
            "codewords": codewords,
        }
        return [self._write("recovery", frame, diagnostics)]

    def run_constants_check(self) -> List[str]:
        """Closed-form c1, c2 and p'_+ - p'_- against brute-force permutation averages."""
        cfg = self.config.analytics
        eps = self.config.chain.epsilon
        rng = self.rng(0)
        rows = []
        for n_p in cfg.n_p_values:
            code = build_code((n_p - 2) // 2)
            word = int(code.words[0], 2)
            reference_word = code.codewords[0]
            counted = zzzz_parity_bias(n_p)
            for draw in range(cfg.draws):
                chain = sample_uniform_chain(n_p, eps, rng)
                closed = code_constants(chain, code)
                moments = permutation_moments(chain, reference_word)
                rows.append(
                    {
                        "n_physical": n_p,
                        "draw": draw,
                        "c1_closed": closed.c1,
                        "c1_brute": float(moments.mean_diagonal[word]),
                        "c2_closed": closed.c2,
                        "c2_brute": float(moments.mean_square_diagonal[word]),
                        "c3_state": moments.c3,
                        "c3_lower": closed.c3_lower,
                        "c3_upper": closed.c3_upper,
                        "parity_closed": closed.parity_bias,
                        "parity_counted": counted,
                    }
                )
            logger.info(f"Checked constants for n_P={n_p} over {cfg.draws} draws")
        frame = pd.DataFrame(rows)
        diagnostics = {
            "max_c1_error": float(np.max(np.abs(frame["c1_closed"] - frame["c1_brute"]))),
            "max_c2_error": float(np.max(np.abs(frame["c2_closed"] - frame["c2_brute"]))),
            "max_parity_error": float(np.max(np.abs(frame["parity_closed"] - frame["parity_counted"]))),
        }
        return [self._write("constants", frame, diagnostics)]

    # ------------------------------------------------------------------
    # Combined scheme
    # ------------------------------------------------------------------

    def _chain_hamiltonian(self, n_q: int, rng: np.random.Generator) -> ChainModel:
        chain_cfg = self.config.chain
        if chain_cfg.detunings is not None and len(chain_cfg.detunings) == n_q:
            return ChainModel(n_q, detunings=tuple(chain_cfg.detunings), couplings_z=tuple(chain_cfg.couplings_z))
        return sample_uniform_chain(n_q, chain_cfg.epsilon, rng, chain_cfg.full_heisenberg)

    def run_combined_figure5(self) -> List[str]:
        """
        Four protection levels of an n_logical-qubit memory: bare, swap-decoupled,
        jump-code encoded, and encoded with flip/swap decoupling.
        """
        proto = self.config.protocol
        ensemble = self.config.ensemble
        n_logical = self.config.code.n_logical
        code = build_code(n_logical, self.config.code.phase)
        n_p = code.n_physical
        t_rec = proto.t_rec if proto.t_rec is not None else recovery_duration(n_p)
        times = np.linspace(0.0, proto.total_time, proto.grid_points)

        rng = self.rng(0)
        logical = random_state(n_logical, rng)
        encoded = encode(logical, code)
        bare_chain = self._chain_hamiltonian(n_logical, rng)
        code_chain = self._chain_hamiltonian(n_p, rng)
        bare_model = LindbladModel.uniform(n_logical, proto.kappa, build_chain_hamiltonian(bare_chain))
        code_model = LindbladModel.uniform(n_p, proto.kappa, build_chain_hamiltonian(code_chain))

        runs = {
            "unprotected": (bare_model, ProtocolSchedule.idle(), logical, None),
            "decoupling_only": (
                bare_model, ProtocolSchedule(tau=proto.tau, m=proto.m, flips=False, swaps=True), logical, None,
            ),
            "jumpcode_only": (code_model, ProtocolSchedule.idle(t_rec), encoded, code),
            "combined": (code_model, ProtocolSchedule(tau=proto.tau, m=proto.m, t_rec=t_rec), encoded, code),
        }

        constants = code_constants(code_chain, code)
        state_c3 = permutation_moments(code_chain, encoded).c3
        dt_swap = proto.tau * proto.m
        f_id_heuristic = analytics.f_combined(n_p, proto.kappa, t_rec, dt_swap, constants.c2, constants.c3_lower, times)
        f_id_state = analytics.f_combined(n_p, proto.kappa, t_rec, dt_swap, constants.c2, state_c3, times)

        paths = []
        finals = {}
        for k, (name, (model, protocol, psi0, active_code)) in enumerate(runs.items()):
            result = self._timed(
                name,
                run_ensemble,
                EnsembleConfig(
                    model=model,
                    protocol=protocol,
                    initial_state=psi0,
                    total_time=proto.total_time,
                    trajectories=ensemble.trajectories,
                    seed=self.child_seed(10 + k),
                    threads=self.threads,
                    times=times,
                    code=active_code,
                    store_states=ensemble.store_states,
                ),
            )
            finals[name] = {"mean": float(result.fidelity_mean[-1]), "stderr": float(result.fidelity_stderr[-1])}
            diagnostics = {"curve": name, "t_rec": t_rec if active_code is not None else None}
            if ensemble.store_states:
                rho_final = result.density_matrices()[-1]
                diagnostics["final_purity"] = float(np.real(np.trace(rho_final @ rho_final)))
            if name == "combined":
                band = 3.0 * np.maximum(result.fidelity_stderr, 1e-12)
                diagnostics.update(
                    {
                        "f_id_heuristic_final": float(f_id_heuristic[-1]),
                        "f_id_state_c3_final": float(f_id_state[-1]),
                        "within_3sigma_heuristic": bool(np.all(np.abs(result.fidelity_mean - f_id_heuristic) <= band)),
                        "within_3sigma_state_c3": bool(np.all(np.abs(result.fidelity_mean - f_id_state) <= band)),
                    }
                )
            paths.append(self._write(name, result.to_frame(), diagnostics))

        overlay = pd.concat(
            [
                analytics.PredictionCurve("f_id_heuristic", times, f_id_heuristic).to_frame(),
                analytics.PredictionCurve("f_id_state_c3", times, f_id_state).to_frame(),
                analytics.PredictionCurve(
                    "f_jumpcode", times, analytics.f_jumpcode(n_p, proto.kappa, t_rec, times)
                ).to_frame(),
                analytics.PredictionCurve(
                    "p_no_decay", times, analytics.p_no_decay(n_logical / 2.0, proto.kappa, times)
                ).to_frame(),
            ],
            ignore_index=True,
        )
        ordering = (
            finals["unprotected"]["mean"] < min(finals["decoupling_only"]["mean"], finals["jumpcode_only"]["mean"])
            and max(finals["decoupling_only"]["mean"], finals["jumpcode_only"]["mean"]) < finals["combined"]["mean"]
        )
        diagnostics = {
            "n_logical": n_logical,
            "n_physical": n_p,
            "constants": constants._asdict(),
            "state_c3": state_c3,
            "t_rec": t_rec,
            "p_no_decay_during_recovery": p_no_decay_during_recovery(n_p, proto.kappa, t_rec),
            "final_fidelities": finals,
            "caption_ordering": bool(ordering),
        }
        paths.append(self._write("analytic", overlay, diagnostics))
        return paths

    def run_analytic_curves(self) -> List[str]:
        """Closed-form curves on a time grid, constants averaged over random chains."""
        cfg = self.config.analytics
        proto = self.config.protocol
        n_q = cfg.n_q
        times = np.linspace(0.0, cfg.t_max, cfg.points)
        t_rec = proto.t_rec if proto.t_rec is not None else recovery_duration(n_q)
        dt_swap = proto.tau * proto.m

        rng = self.rng(0)
        draws = [code_constants(sample_uniform_chain(n_q, self.config.chain.epsilon, rng)) for _ in range(cfg.draws)]
        c1_sq = float(np.mean([c.c3_lower for c in draws]))
        c2 = float(np.mean([c.c2 for c in draws]))
        c3_upper = float(np.mean([c.c3_upper for c in draws]))

        curves = [
            analytics.PredictionCurve("p_no_decay", times, analytics.p_no_decay(n_q / 2.0, proto.kappa, times)),
            analytics.PredictionCurve("f_jumpcode", times, analytics.f_jumpcode(n_q, proto.kappa, t_rec, times)),
            analytics.PredictionCurve("f_coherent", times, analytics.f_coherent(times, dt_swap, c2, c1_sq)),
            analytics.PredictionCurve(
                "f_coherent_c3_upper", times, analytics.f_coherent(times, dt_swap, c2, c3_upper)
            ),
            analytics.PredictionCurve(
                "f_id_heuristic", times, analytics.f_combined(n_q, proto.kappa, t_rec, dt_swap, c2, c1_sq, times)
            ),
            analytics.PredictionCurve(
                "f_id_c3_upper", times, analytics.f_combined(n_q, proto.kappa, t_rec, dt_swap, c2, c3_upper, times)
            ),
        ]
        if cfg.t_c is not None:
            curves.append(
                analytics.PredictionCurve("frahm", times, analytics.frahm_decay(times, cfg.t_c, cfg.sigma, 2 ** n_q))
            )
        frame = pd.concat([c.to_frame() for c in curves], ignore_index=True)
        diagnostics = {
            "c1_squared_mean": c1_sq,
            "c2_mean": c2,
            "c3_upper_mean": c3_upper,
            "t_rec": t_rec,
            "mean_decay_events_final": float(analytics.mean_decay_events(n_q, proto.kappa, times[-1])),
        }
        return [self._write("curves", frame, diagnostics)]
