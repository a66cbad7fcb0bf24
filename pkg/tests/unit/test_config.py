# Copyright 2023 Canonical Ltd.
# See LICENSE file for licensing details.

import logging
from pathlib import Path

import numpy as np
import pytest
import yaml

from nskbench.config import (
    OUTPUT_DIR_ENV,
    build_initial_state,
    config_schema,
    load_config,
    load_options,
    parse_config,
)
from nskbench.exceptions import ConfigError
from nskbench.geometry import RadialGrid, State
from nskbench.model import ModelKind
from nskbench.output import write_csv, write_state
from nskbench.regime import Theorem

GRID = {"n": 129, "x-max": 4.0}


@pytest.fixture()
def no_output_env(monkeypatch):
    """Yields with the output directory override unset."""
    monkeypatch.delenv(OUTPUT_DIR_ENV, raising=False)
    yield


@pytest.fixture()
def config_file(tmp_path):
    """Yields a writer of YAML config files under a temporary directory."""

    def write(data, name="config.yaml"):
        path = tmp_path / name
        path.write_text(yaml.safe_dump(data))
        return path

    yield write


class TestParseConfig:
    def test_defaults(self, no_output_env):
        config = parse_config({}, base_dir=Path("/work"))
        options = load_options()
        assert config.params.kind is ModelKind.KAZHIKHOV
        assert config.params.beta == options["model"]["beta"]["default"]
        assert config.grid == RadialGrid(n=257, x_max=8.0)
        assert config.run.dt_fixed is None
        assert config.ledger_tol == 1e-3
        assert config.output.directory == Path("/work/nskbench-output")
        assert config.sweep is None and config.batch is None

    def test_empty_document(self, no_output_env):
        assert parse_config(None).grid.n == 257

    def test_every_option_in_schema(self):
        schema = config_schema()
        for section, options in load_options().items():
            assert set(schema["properties"][section]["properties"]) == set(options)

    @pytest.mark.parametrize(
        "data",
        (
            # unknown option
            {"model": {"viscosity": 1.0}},
            # unknown section
            {"solver": {}},
            # wrong type
            {"grid": {"n": "many"}},
            {"model": {"kind": "inviscid"}},
            # inadmissible coefficients
            {"model": {"gamma": 0.9}},
            {"model": {"mu-tilde": -1.0}},
            {"model": {"dim": 1}},
            {"grid": {"n": 2}},
            {"run": {"cfl-cap": 2.0}},
            {"initial": {"v": {"kind": "gaussian-bump", "center": 0.0}}},
            {"sweep": {"alpha": [0.0, 1.0], "beta": [-3.0, -2.0]}},
            {"batch": {"parameters": {"kappa": [1.0]}}},
        ),
    )
    def test_invalid(self, data, no_output_env):
        with pytest.raises(ConfigError):
            parse_config(data)

    def test_output_env_override(self, monkeypatch, tmp_path):
        monkeypatch.setenv(OUTPUT_DIR_ENV, str(tmp_path / "elsewhere"))
        config = parse_config({"output": {"directory": "ignored"}}, base_dir=Path("/work"))
        assert config.output.directory == tmp_path / "elsewhere"

    def test_sweep_section(self, no_output_env):
        data = {
            "sweep": {
                "alpha": [-1.0, 1.0],
                "beta": [-3.0, -2.0],
                "gamma": 1.4,
                "theorem": "T1.1",
                "resolution": [3, 4],
            }
        }
        sweep = parse_config(data).sweep
        assert sweep.theorems == (Theorem.T1_1,)
        assert sweep.resolution == (3, 4)
        assert sweep.workers == 1

    def test_sweep_defaults_to_both_tables(self, no_output_env):
        data = {"sweep": {"alpha": [-1.0, 1.0], "beta": [-3.0, -2.0], "gamma": 1.4}}
        assert parse_config(data).sweep.theorems == (Theorem.T1_1, Theorem.T1_2)

    def test_batch_members_in_order(self, no_output_env):
        data = {"batch": {"parameters": {"alpha": [0.0, 0.5], "dim": [2, 3]}, "workers": 2}}
        batch = parse_config(data).batch
        assert batch.workers == 2
        assert batch.members() == [
            {"alpha": 0.0, "dim": 2},
            {"alpha": 0.0, "dim": 3},
            {"alpha": 0.5, "dim": 2},
            {"alpha": 0.5, "dim": 3},
        ]

    def test_with_model(self, no_output_env):
        config = parse_config({"model": {"alpha": 0.5}})
        changed = config.with_model(**{"gamma": 2.0, "mu-tilde": 2.0})
        assert (changed.params.alpha, changed.params.gamma, changed.params.mu_tilde) == (
            0.5,
            2.0,
            2.0,
        )
        assert config.params.gamma == 1.4
        with pytest.raises(ConfigError):
            config.with_model(gamma=0.5)

    def test_with_output(self, no_output_env, tmp_path):
        config = parse_config({}).with_output(tmp_path)
        assert config.output.directory == tmp_path
        assert config.output.snapshots is True


class TestLoadConfig:
    def test_relative_output_directory(self, config_file, tmp_path, no_output_env):
        path = config_file({"output": {"directory": "runs/first"}, "grid": GRID})
        config = load_config(path)
        assert config.output.directory == tmp_path / "runs/first"
        assert config.base_dir == tmp_path

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "absent.yaml")

    def test_invalid_yaml(self, tmp_path):
        path = tmp_path / "broken.yaml"
        path.write_text("model: [alpha\n")
        with pytest.raises(ConfigError):
            load_config(path)


class TestInitialState:
    def test_default_is_rest_state(self, kazhikhov_params, grid):
        state = build_initial_state({}, grid, kazhikhov_params)
        assert np.array_equal(state.v, np.ones(grid.n))
        assert np.array_equal(state.u, np.zeros(grid.n))
        assert state.t == 0.0

    def test_gaussian_bump_sits_on_base(self, kazhikhov_params, grid):
        descriptor = {
            "v": {"kind": "gaussian-bump", "center": 0.0, "width": 0.5, "amplitude": 0.2},
            "u": {"kind": "gaussian-bump", "center": 1.0, "width": 0.3, "amplitude": 0.1},
        }
        state = build_initial_state(descriptor, grid, kazhikhov_params)
        assert state.v[0] == pytest.approx(1.2)
        assert state.u[0] == 0.0
        assert state.u.max() == pytest.approx(0.1, rel=1e-3)

    def test_tanh_front(self, kazhikhov_params, grid):
        descriptor = {
            "v": {"kind": "tanh-front", "center": 2.0, "width": 0.2, "left": 1.3, "right": 1.0}
        }
        state = build_initial_state(descriptor, grid, kazhikhov_params)
        assert state.v[0] == pytest.approx(1.3)
        assert state.v[-1] == 1.0
        assert np.all(np.diff(state.v) <= 0)

    def test_boundary_projection_warns(self, kazhikhov_params, grid, caplog):
        descriptor = {"u": {"kind": "constant", "value": 0.5}}
        with caplog.at_level(logging.WARNING, logger="nskbench.config"):
            state = build_initial_state(descriptor, grid, kazhikhov_params)
        assert state.u[0] == 0.0 and state.u[-1] == 0.0
        assert state.u[1] == 0.5
        assert sum("boundary value" in record.message for record in caplog.records) == 2

    def test_non_positive_volume(self, kazhikhov_params, grid):
        descriptor = {"v": {"kind": "gaussian-bump", "center": 1.0, "width": 0.3, "amplitude": -2}}
        with pytest.raises(ConfigError):
            build_initial_state(descriptor, grid, kazhikhov_params)

    def test_grid_too_coarse_for_ghost_radius(self, kazhikhov_params):
        with pytest.raises(ConfigError):
            build_initial_state({}, RadialGrid(n=9, x_max=4.0), kazhikhov_params)


class TestInitialStateFromFile:
    def test_same_nodes_are_bit_exact(self, bump_state, grid, kazhikhov_params, tmp_path):
        write_state(tmp_path / "state.csv", bump_state, grid)
        descriptor = {"kind": "file", "path": "state.csv"}
        state = build_initial_state(descriptor, grid, kazhikhov_params, base_dir=tmp_path)
        assert np.array_equal(state.v, bump_state.v)
        assert np.array_equal(state.u, bump_state.u)

    def test_time_column(self, kazhikhov_params, grid, tmp_path):
        later = State.build(np.ones(grid.n), np.zeros(grid.n), grid, kazhikhov_params, t=0.25)
        write_state(tmp_path / "state.csv", later, grid)
        state = build_initial_state(
            {"kind": "file", "path": str(tmp_path / "state.csv")}, grid, kazhikhov_params
        )
        assert state.t == 0.25

    def test_resampled_onto_finer_grid(self, kazhikhov_params, make_bump, tmp_path):
        coarse = RadialGrid(n=65, x_max=4.0)
        v, u = make_bump(coarse.nodes)
        write_csv(
            tmp_path / "coarse.csv",
            ("x", "v", "u"),
            [{"x": x, "v": a, "u": b} for x, a, b in zip(coarse.nodes, v, u)],
        )
        fine = coarse.refined()
        state = build_initial_state(
            {"kind": "file", "path": "coarse.csv"}, fine, kazhikhov_params, base_dir=tmp_path
        )
        assert np.allclose(state.v[::2], v, atol=1e-14)
        assert np.allclose(state.v[1::2], 0.5 * (v[1:] + v[:-1]), atol=1e-3)

    def test_short_table_continues_with_far_field(self, kazhikhov_params, grid, tmp_path):
        write_csv(
            tmp_path / "short.csv",
            ("x", "v", "u"),
            [{"x": 0.0, "v": 1.1, "u": 0.0}, {"x": 1.0, "v": 1.0, "u": 0.0}],
        )
        state = build_initial_state(
            {"kind": "file", "path": "short.csv"}, grid, kazhikhov_params, base_dir=tmp_path
        )
        assert state.v[0] == pytest.approx(1.1)
        assert np.all(state.v[grid.nodes > 1.0] == 1.0)

    @pytest.mark.parametrize(
        "columns,rows",
        (
            # no velocity column
            (("x", "v"), [{"x": 0.0, "v": 1.0}, {"x": 1.0, "v": 1.0}]),
            # does not start at x = 0
            (
                ("x", "v", "u"),
                [{"x": 0.5, "v": 1.0, "u": 0.0}, {"x": 1.0, "v": 1.0, "u": 0.0}],
            ),
            # x not increasing
            (
                ("x", "v", "u"),
                [{"x": 0.0, "v": 1.0, "u": 0.0}, {"x": 0.0, "v": 1.0, "u": 0.0}],
            ),
        ),
    )
    def test_invalid_tables(self, columns, rows, kazhikhov_params, grid, tmp_path):
        write_csv(tmp_path / "bad.csv", columns, rows)
        with pytest.raises(ConfigError):
            build_initial_state(
                {"kind": "file", "path": "bad.csv"}, grid, kazhikhov_params, base_dir=tmp_path
            )

    def test_missing_file(self, kazhikhov_params, grid, tmp_path):
        with pytest.raises(ConfigError):
            build_initial_state(
                {"kind": "file", "path": "absent.csv"}, grid, kazhikhov_params, base_dir=tmp_path
            )
