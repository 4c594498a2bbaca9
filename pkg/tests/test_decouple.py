import numpy as np
import pytest
from scipy import stats

from core.exceptions import DimensionError, ValidationError
from qsim.decouple import (
    DecouplingSchedule,
    DecouplingSet,
    ScheduleKind,
    identity_set,
    mean_fidelity_trace,
    named_set,
    nrd_memory_prediction,
    pauli_set,
    run_schedule,
    selection_index,
    selection_sequence,
    single_x_set,
    verify_annihilator,
    zeroth_order_average,
)
from qsim.analytics import loglog_slope
from qsim.perturb import sample_gue
from qsim.qcore import PauliString, hermitian_propagator, operator_two_norm


class TestSelectionRules:
    def test_periodic(self):
        assert [selection_index(ScheduleKind.PDD, i, 3) for i in range(1, 8)] == [1, 2, 3, 1, 2, 3, 1]

    def test_symmetric_traverses_back(self):
        assert [selection_index(ScheduleKind.SDD, i, 3) for i in range(1, 8)] == [1, 2, 3, 3, 2, 1, 1]

    def test_nrd_in_range(self, rng):
        indices = selection_sequence(ScheduleKind.NRD, 500, 4, rng)
        assert indices.min() >= 1 and indices.max() <= 4

    def test_nrd_draws_are_uniform(self, rng):
        indices = selection_sequence(ScheduleKind.NRD, 8000, 4, rng)
        counts = np.bincount(indices, minlength=5)[1:]
        assert counts.sum() == 8000
        assert stats.chisquare(counts).pvalue > 1e-3

    def test_random_path_covers_every_element_per_cycle(self, rng):
        indices = selection_sequence(ScheduleKind.RANDOM_PATH, 40, 4, rng)
        for cycle in indices.reshape(10, 4):
            assert sorted(cycle) == [1, 2, 3, 4]

    def test_step_index_starts_at_one(self):
        with pytest.raises(ValidationError):
            selection_index(ScheduleKind.PDD, 0, 3)


class TestDecouplingSet:
    def test_named_sets(self):
        assert named_set("pauli", 2).n_c == 16
        assert named_set("identity", 2).n_c == 1
        assert named_set("single-x", 2).n_c == 2

    def test_unknown_name(self):
        with pytest.raises(ValidationError):
            named_set("hadamard", 2)

    def test_mixed_dimensions(self):
        with pytest.raises(DimensionError):
            DecouplingSet((PauliString("X"), PauliString("XX")))

    def test_one_based_access(self):
        assert pauli_set(1)[1].is_identity

    def test_embedded_schedule_needs_inner_set(self):
        with pytest.raises(ValidationError):
            DecouplingSchedule(ScheduleKind.EMD, 0.1, pauli_set(1))

    def test_cycle_time(self):
        schedule = DecouplingSchedule(ScheduleKind.SDD, 0.1, pauli_set(1))
        assert schedule.t_c == pytest.approx(0.4)
        assert schedule.cycle_length == 8


class TestAnnihilator:
    @pytest.mark.parametrize("n_q", [1, 2, 3])
    def test_pauli_basis_annihilates(self, n_q):
        assert verify_annihilator(pauli_set(n_q), trials=2)

    def test_small_sets_fail(self):
        assert not verify_annihilator(single_x_set(2))
        assert not verify_annihilator(identity_set(1))

    def test_duplicated_element_fails(self):
        elements = list(pauli_set(1).elements)
        elements[3] = elements[1]
        assert not verify_annihilator(DecouplingSet(tuple(elements)))

    def test_average_is_trace_part(self, rng):
        h = sample_gue(4, rng).delta_h + 0.3 * np.eye(4)
        average = zeroth_order_average(h, pauli_set(2)).entries
        np.testing.assert_allclose(average, 0.3 * np.eye(4), atol=1e-12)


class TestRunSchedule:
    def test_identity_set_is_free_evolution(self, rng):
        h = sample_gue(4, rng).delta_h
        schedule = DecouplingSchedule(ScheduleKind.PDD, 0.05, identity_set(2))
        run = run_schedule(h, schedule, 0.5, rng)
        u = hermitian_propagator(h, 0.5)
        assert run.fidelity[-1] == pytest.approx(abs(np.trace(u) / 4) ** 2)
        assert run.fidelity[0] == 1.0
        assert run.times.size == 11

    def test_pdd_beats_free_evolution(self, rng):
        h = sample_gue(2, rng).delta_h
        free = run_schedule(h, DecouplingSchedule(ScheduleKind.PDD, 0.01, identity_set(1)), 0.04, rng)
        pdd = run_schedule(h, DecouplingSchedule(ScheduleKind.PDD, 0.01, pauli_set(1)), 0.04, rng)
        assert 1.0 - pdd.fidelity[-1] < 0.1 * (1.0 - free.fidelity[-1])

    def test_embedded_schedule_runs(self, rng):
        h = sample_gue(4, rng).delta_h
        schedule = DecouplingSchedule(ScheduleKind.SEMD, 0.01, pauli_set(2), inner_set=pauli_set(2))
        run = run_schedule(h, schedule, 0.64, rng)
        assert 0.0 < run.fidelity[-1] <= 1.0 + 1e-12

    def test_total_time_must_be_multiple(self, rng):
        schedule = DecouplingSchedule(ScheduleKind.PDD, 0.1, pauli_set(1))
        with pytest.raises(ValidationError):
            run_schedule(np.diag([1.0, -1.0]), schedule, 0.25, rng)

    def test_dimension_mismatch(self, rng):
        schedule = DecouplingSchedule(ScheduleKind.PDD, 0.1, pauli_set(1))
        with pytest.raises(DimensionError):
            run_schedule(np.eye(4), schedule, 0.2, rng)


class TestMeanFidelityTrace:
    def test_independent_of_thread_count(self, rng):
        h = sample_gue(2, rng).delta_h
        schedule = DecouplingSchedule(ScheduleKind.NRD, 0.01, pauli_set(1))
        _, serial, _ = mean_fidelity_trace(h, schedule, 0.5, 6, seed=7, threads=1)
        _, threaded, _ = mean_fidelity_trace(h, schedule, 0.5, 6, seed=7, threads=3)
        np.testing.assert_array_equal(serial, threaded)

    def test_nrd_memory_linear_in_time(self, rng):
        h = sample_gue(2, rng).delta_h
        dt = 0.01
        schedule = DecouplingSchedule(ScheduleKind.NRD, dt, pauli_set(1))
        times, mean, _ = mean_fidelity_trace(h, schedule, 1.0, 400, seed=3)
        prediction = nrd_memory_prediction(h, dt, times)
        np.testing.assert_allclose(1.0 - mean[-1], 1.0 - prediction[-1], rtol=0.3)


def unit_gue(rng, dim=2):
    h = sample_gue(dim, rng).delta_h
    return h / operator_two_norm(h)


class TestDecouplingOrder:
    def test_nrd_loss_grows_linearly(self, rng):
        h = unit_gue(rng)
        schedule = DecouplingSchedule(ScheduleKind.NRD, 0.01, pauli_set(1))
        times, mean, _ = mean_fidelity_trace(h, schedule, 1.0, 400, seed=3)
        window = slice(10, 101, 10)
        assert loglog_slope(times[window], 1.0 - mean[window]) == pytest.approx(1.0, abs=0.2)

    def test_pdd_loss_grows_quadratically(self, rng):
        h = unit_gue(rng)
        schedule = DecouplingSchedule(ScheduleKind.PDD, 0.01, pauli_set(1))
        run = run_schedule(h, schedule, 2.0, rng)
        # cycle boundaries only
        window = slice(40, 201, schedule.cycle_length)
        assert loglog_slope(run.times[window], 1.0 - run.fidelity[window]) == pytest.approx(2.0, abs=0.15)

    def test_symmetric_cycle_gains_an_order_in_dt(self, rng):
        x, y, z = (PauliString(w).to_matrix() for w in "XYZ")
        h = 0.6 * x + 0.3 * y + 0.74 * z
        h = h / operator_two_norm(h)
        intervals = [0.004, 0.002, 0.001]
        loss = {}
        for kind in (ScheduleKind.PDD, ScheduleKind.SDD):
            loss[kind] = [
                1.0 - run_schedule(h, DecouplingSchedule(kind, dt, pauli_set(1)), 4.0, rng).fidelity[-1]
                for dt in intervals
            ]
        pdd_slope = loglog_slope(intervals, loss[ScheduleKind.PDD])
        sdd_slope = loglog_slope(intervals, loss[ScheduleKind.SDD])
        assert pdd_slope == pytest.approx(2.0, abs=0.3)
        assert sdd_slope > 3.5
        assert sdd_slope - pdd_slope > 1.5
