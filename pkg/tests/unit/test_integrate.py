# Copyright 2023 Canonical Ltd.
# See LICENSE file for licensing details.

from contextlib import nullcontext as does_not_raise

import numpy as np
import pytest

from nskbench.exceptions import (
    DomainError,
    NonFiniteFault,
    PositivityFault,
    Termination,
)
from nskbench.geometry import RadialGrid, State
from nskbench.integrate import (
    NullSink,
    RunConfig,
    impose_boundary,
    rk4,
    run,
    stable_dt,
    step,
)


class TestRunConfig:
    @pytest.mark.parametrize(
        "changes,expectation",
        (
            ({}, does_not_raise()),
            ({"t_end": 0.0}, does_not_raise()),
            ({"t_end": -1.0}, pytest.raises(DomainError)),
            ({"cfl_visc": 0.0}, pytest.raises(DomainError)),
            ({"cfl_cap": 1.5}, pytest.raises(DomainError)),
            ({"dt_min": 0.0}, pytest.raises(DomainError)),
            ({"v_floor": -1e-8}, pytest.raises(DomainError)),
            # dt_min above dt_init
            ({"dt_min": 1e-2, "dt_init": 1e-3}, pytest.raises(DomainError)),
            ({"dt_fixed": 0.0}, pytest.raises(DomainError)),
            ({"dt_fixed": 1e-4}, does_not_raise()),
            ({"snapshot_every": 0}, pytest.raises(DomainError)),
        ),
    )
    def test_validation(self, changes, expectation):
        with expectation:
            RunConfig(**changes)


class TestRk4:
    @staticmethod
    def decay(t, fields):
        return tuple(-values for values in fields)

    def test_fourth_order(self):
        errors = []
        for dt in (0.1, 0.05):
            fields = (np.array([1.0]),)
            for index in range(int(round(1.0 / dt))):
                fields = rk4(self.decay, fields, dt, t=index * dt)
            errors.append(abs(fields[0][0] - np.exp(-1.0)))
        assert errors[0] / errors[1] == pytest.approx(16.0, rel=0.1)

    def test_time_dependent_slope(self):
        # y' = 3 t^2 is integrated exactly by Simpson weights
        (result,) = rk4(lambda t, fields: (np.array([3.0 * t * t]),), (np.array([0.0]),), 0.5)
        assert result[0] == pytest.approx(0.125, abs=1e-15)

    def test_reversal(self):
        fields = (np.array([1.0, 2.0]),)
        forward = rk4(self.decay, fields, 0.01)
        back = rk4(self.decay, forward, -0.01, t=0.01)
        assert np.allclose(back[0], fields[0], atol=1e-10)

    def test_projection_applied(self):
        fields = (np.array([1.0, 1.0, 1.0]), np.array([1.0, 1.0, 1.0]))
        v, u = rk4(lambda t, f: f, fields, 0.1, project=impose_boundary)
        assert u[0] == 0.0 and u[-1] == 0.0 and v[-1] == 1.0


class TestStep:
    def test_equilibrium_unchanged(self, equilibrium_state, grid, kazhikhov_params):
        after = step(equilibrium_state, grid, kazhikhov_params, 1e-3)
        assert after.t == pytest.approx(1e-3)
        assert np.array_equal(after.v, equilibrium_state.v)
        assert np.array_equal(after.u, equilibrium_state.u)

    @pytest.mark.parametrize("dt", (0.0, -1e-3))
    def test_non_positive_dt(self, equilibrium_state, grid, kazhikhov_params, dt):
        with pytest.raises(DomainError):
            step(equilibrium_state, grid, kazhikhov_params, dt)

    def test_boundary_values_kept(self, bump_state, grid, kazhikhov_params):
        after = step(bump_state, grid, kazhikhov_params, 1e-6)
        assert after.u[0] == 0.0 and after.u[-1] == 0.0 and after.v[-1] == 1.0
        assert after.r[0] == kazhikhov_params.a

    def test_v_floor(self, bump_state, grid, kazhikhov_params):
        with pytest.raises(PositivityFault):
            step(bump_state, grid, kazhikhov_params, 1e-6, v_floor=1.1)

    def test_non_finite_forcing(self, equilibrium_state, grid, kazhikhov_params):
        def forcing(t):
            return np.full(grid.n, np.nan), np.zeros(grid.n)

        with pytest.raises(NonFiniteFault):
            step(equilibrium_state, grid, kazhikhov_params, 1e-4, forcing=forcing)

    def test_constant_forcing(self, equilibrium_state, grid, kazhikhov_params):
        # forcing is inactive at the Dirichlet entries after projection
        source = np.full(grid.n, 2.0)

        def forcing(t):
            return np.zeros(grid.n), source

        after = step(equilibrium_state, grid, kazhikhov_params, 1e-6, forcing=forcing)
        assert after.u[1] > 0 and after.u[0] == 0.0


class TestStableDt:
    def test_quarter_when_refined(self, bump_state, grid, kazhikhov_params, make_bump):
        config = RunConfig(dt_max=1.0)
        fine = grid.refined()
        v, u = make_bump(fine.nodes)
        fine_state = State.build(v, u, fine, kazhikhov_params)
        ratio = stable_dt(bump_state, grid, kazhikhov_params, config) / stable_dt(
            fine_state, fine, kazhikhov_params, config
        )
        assert ratio == pytest.approx(4.0, rel=0.05)

    def test_smaller_safety_factor_smaller_step(self, bump_state, grid, kazhikhov_params):
        loose = RunConfig(dt_max=1.0, cfl_cap=0.5, cfl_visc=0.8)
        tight = RunConfig(dt_max=1.0, cfl_cap=0.25, cfl_visc=0.4)
        assert stable_dt(bump_state, grid, kazhikhov_params, tight) < stable_dt(
            bump_state, grid, kazhikhov_params, loose
        )

    def test_capped_by_dt_max(self, bump_state, grid, kazhikhov_params):
        assert stable_dt(bump_state, grid, kazhikhov_params, RunConfig(dt_max=1e-9)) == 1e-9


class TestRun:
    def test_zero_horizon(self, bump_state, grid, kazhikhov_params, mocker):
        sink = mocker.MagicMock()
        summary = run(bump_state, grid, kazhikhov_params, RunConfig(t_end=0.0), sink)
        assert summary.termination is Termination.COMPLETED
        assert summary.steps == 0
        assert summary.final_time == 0.0
        sink.observe.assert_called_once()
        sink.snapshot.assert_called_once()

    def test_equilibrium_run(self, equilibrium_state, grid, kazhikhov_params):
        config = RunConfig(t_end=0.01, dt_fixed=1e-3)
        summary = run(equilibrium_state, grid, kazhikhov_params, config, NullSink())
        assert summary.termination is Termination.COMPLETED
        assert summary.steps == 10
        assert summary.final_time == pytest.approx(0.01)
        assert summary.v_min_global == 1.0 and summary.v_max_global == 1.0

    def test_sink_call_counts(self, bump_state, grid, kazhikhov_params, mocker):
        sink = mocker.MagicMock()
        config = RunConfig(t_end=2e-5, dt_fixed=2e-6, snapshot_every=4)
        summary = run(bump_state, grid, kazhikhov_params, config, sink)
        assert summary.steps == 10
        # initial state plus every step
        assert sink.observe.call_count == 11
        # step 0, 4, 8 and the final state
        assert [call.args[0] for call in sink.snapshot.call_args_list] == [0, 4, 8, 10]

    def test_deterministic(self, bump_state, grid, kazhikhov_params):
        config = RunConfig(t_end=2e-3)
        first = run(bump_state, grid, kazhikhov_params, config)
        second = run(bump_state, grid, kazhikhov_params, config)
        assert first == second

    def test_dt_underflow(self, bump_state, grid, kazhikhov_params):
        config = RunConfig(t_end=1.0, dt_min=1e-3, dt_init=1e-3)
        summary = run(bump_state, grid, kazhikhov_params, config)
        assert summary.termination is Termination.DT_UNDERFLOW
        assert summary.steps == 0
        assert summary.termination.exit_code == 4

    def test_oversized_fixed_step_faults(self, bump_state, grid, kazhikhov_params):
        config = RunConfig(t_end=1.0, dt_fixed=0.5)
        summary = run(bump_state, grid, kazhikhov_params, config)
        assert summary.termination in (Termination.NON_FINITE, Termination.POSITIVITY_FAULT)
        assert summary.message
        assert summary.final_time < 1.0

    def test_summary_dict(self, equilibrium_state, grid, kazhikhov_params):
        summary = run(equilibrium_state, grid, kazhikhov_params, RunConfig(t_end=0.0))
        report = summary.to_dict()
        assert report["termination"] == "Completed"
        assert report["exit_code"] == 0
