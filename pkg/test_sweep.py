#!/usr/bin/env python3
"""
Test script for SweepManager and the vanishing-regularization sweep
"""

import sys
import threading

import numpy as np
import pytest

from filamentlab.datums import make_datum
from filamentlab.dynamics import MIDPOINT, FilamentState, SolverConfig, epsilon_sweep, fit_slope, simulate
from filamentlab.errors import NumericalError, ValidationError
from filamentlab.grid import GridSpec, VecField, l2_norm
from filamentlab.sweep_manager import SweepManager

E1 = (1.0, 0.0, 0.0)
E3 = (0.0, 0.0, 1.0)


def test_sweep_manager_runs_every_entry():
    print("🧪 Testing SweepManager...")
    manager = SweepManager(max_workers=2)
    seen = []
    lock = threading.Lock()

    def task(value):
        def run():
            with lock:
                seen.append(value)
            return value * 10
        return run

    results = manager.run({k: task(k) for k in (3, 1, 2)})
    assert list(results) == [3, 1, 2]
    assert results == {3: 30, 1: 10, 2: 20}
    assert sorted(seen) == [1, 2, 3]
    assert manager.get_status(1) == "completed"
    assert manager.get_status(99) == "not_started"
    stats = manager.get_stats()
    print(f"📊 Sweep stats: {stats}")
    assert stats == {"total": 3, "completed": 3, "processing": 0, "pending": 0, "failed": 0}


def test_sweep_manager_reports_failures_after_all_workers_finish():
    manager = SweepManager(max_workers=2)

    def boom():
        raise NumericalError("midpoint iteration did not converge", residual=1.0)

    with pytest.raises(NumericalError):
        manager.run({"a": lambda: 1, "b": boom, "c": lambda: 3})
    assert manager.get_status("a") == "completed"
    assert manager.get_status("b") == "failed"
    assert manager.get_status("c") == "completed"
    assert manager.get_stats()["failed"] == 1


def test_fit_slope():
    xs = [0.1, 0.05, 0.025]
    assert fit_slope(xs, [x ** 0.5 for x in xs]) == pytest.approx(0.5)
    assert fit_slope(xs, [0.0, 1.0, 2.0]) is None
    assert fit_slope([0.1], [1.0]) is None


def test_sweep_of_straight_filament_is_flat():
    v0 = VecField.constant(GridSpec(16), E3).normalized()
    report = epsilon_sweep(v0, E3, [0.1, 0.05], 1e-3, SolverConfig(eps=0.1, dt=1e-4, a=E3), max_workers=2)
    assert report.differences == [0.0]
    assert report.slope is None
    assert not report.rate_in_window
    assert np.array_equal(report.extrapolated.data, report.finals[0.05].data)
    data = report.to_dict()
    assert data["slope_h1"] is None
    assert data["stats"]["completed"] == 2


@pytest.mark.parametrize("eps_list", [[], [0.05, 0.1], [0.5, 0.1], [0.1, 0.0]])
def test_sweep_rejects_bad_eps_lists(eps_list):
    v0 = VecField.constant(GridSpec(16), E3).normalized()
    with pytest.raises(ValidationError):
        epsilon_sweep(v0, E3, eps_list, 1e-3, SolverConfig(eps=0.1, a=E3))


def test_sweep_differences_shrink_with_eps():
    grid = GridSpec(32)
    datum = make_datum("perturbed-quarter-circle", seed=4)
    eps_list = [0.1, 0.05, 0.025, 0.0125]
    report = epsilon_sweep(datum.sample(grid), E1, eps_list, 0.01, SolverConfig(eps=0.1, dt=1e-3),
                           datum=datum)
    assert all(later < earlier for earlier, later in zip(report.differences, report.differences[1:]))
    assert report.slope >= 0.3
    assert np.max(np.abs(report.extrapolated.norms() - 1.0)) <= 1e-12
    assert set(report.finals) == set(eps_list)
    assert all(c >= 0 for c in report.jet_constants.values())


def test_sweep_failure_names_the_failed_eps(monkeypatch):
    import filamentlab.dynamics as dynamics

    real = dynamics.correct_datum

    def flaky(v0, a, eps, *args, **kwargs):
        if eps == 0.05:
            raise NumericalError("jet solve did not converge", residual=2.0)
        return real(v0, a, eps, *args, **kwargs)

    monkeypatch.setattr(dynamics, "correct_datum", flaky)
    v0 = VecField.constant(GridSpec(16), E3).normalized()
    with pytest.raises(NumericalError, match=r"failed eps \[0\.05\]") as info:
        epsilon_sweep(v0, E3, [0.1, 0.05, 0.025], 1e-3, SolverConfig(eps=0.1, dt=1e-4, a=E3), max_workers=2)
    assert info.value.residual == 2.0


def test_sweep_uses_one_step_for_every_eps():
    grid = GridSpec(32)
    v0 = make_datum("quarter-circle").sample(grid)
    cfg = SolverConfig(eps=0.1, dt=1.0)
    eps_list = [0.1, 0.05, 0.025]
    report = epsilon_sweep(v0, E1, eps_list, 0.01, cfg)
    expected = 0.25 * grid.h ** 2 / 0.1
    assert expected < cfg.replace(eps=0.025).effective_dt(grid)
    assert report.dt == pytest.approx(expected)
    assert report.to_dict()["dt"] == pytest.approx(expected)


@pytest.mark.slow
def test_sweep_rate_lands_in_window_with_common_step():
    print("🧪 Testing the vanishing-regularization rate at n=64...")
    grid = GridSpec(64)
    datum = make_datum("perturbed-quarter-circle", seed=4)
    eps_list = [0.1, 0.05, 0.025, 0.0125]
    report = epsilon_sweep(datum.sample(grid), E1, eps_list, 0.02, SolverConfig(eps=0.1, dt=2e-5),
                           datum=datum)
    print(f"📊 H1 differences {report.differences}, slope {report.slope}")
    assert report.dt == pytest.approx(2e-5)
    assert all(later < earlier for earlier, later in zip(report.differences, report.differences[1:]))
    assert 0.3 <= report.slope <= 0.7
    assert report.rate_in_window


@pytest.mark.slow
def test_extrapolated_field_is_closer_to_unregularized_run():
    grid = GridSpec(32)
    datum = make_datum("perturbed-quarter-circle", seed=4)
    v0 = datum.sample(grid)
    T = 0.005
    report = epsilon_sweep(v0, E1, [0.1, 0.05, 0.025], T, SolverConfig(eps=0.1, dt=1e-5), datum=datum)
    reference = simulate(FilamentState(0.0, v0), SolverConfig(eps=0.0, dt=1e-5, scheme=MIDPOINT), T,
                         stride=10 ** 9)[-1].v
    assert l2_norm(report.extrapolated - reference) <= l2_norm(report.finals[0.1] - reference)


def main():
    """Run this module's tests"""
    return pytest.main([__file__, "-q"])


if __name__ == "__main__":
    sys.exit(main())
