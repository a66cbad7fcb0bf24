# Copyright 2023 Canonical Ltd.
# See LICENSE file for licensing details.

import math
from contextlib import nullcontext as does_not_raise

import pytest

from nskbench.exceptions import DomainError
from nskbench.regime import (
    CASES,
    Theorem,
    bd_coefficients,
    classify,
    f1,
    f1p,
    f2,
    f2p,
    f3,
    f3p,
    f4,
    f4p,
    positivity_interval,
    sweep_regions,
)


class TestClassify:
    """Truth table of the case tables."""

    @pytest.mark.parametrize(
        "alpha,beta,gamma,theorem,expected_cases",
        (
            # Kazhikhov viscosity
            (0.0, -2.5, 1.4, Theorem.T1_1, ["i"]),
            (7.0, -2.5, 1.4, Theorem.T1_1, ["i"]),
            # corners of the first case are closed
            (-1.0, -3.0, 1.0, Theorem.T1_1, ["i"]),
            (5.0, -2.0, 1.0, Theorem.T1_1, ["i"]),
            (-1.0, -3.5, 2.0, Theorem.T1_1, ["ii"]),
            (-1.5, -4.0, 2.5, Theorem.T1_1, ["ii"]),
            (-1.3, -3.2, 1.5, Theorem.T1_1, ["ii"]),
            (-1.8, -4.8, 3.0, Theorem.T1_1, ["iii"]),
            (-1.72, -4.7, 3.0, Theorem.T1_1, ["iii"]),
            (-1.92, -4.9, 3.5, Theorem.T1_1, ["iii"]),
            (0.0, -1.0, 1.4, Theorem.T1_1, []),
            (0.0, -2.5, 0.9, Theorem.T1_1, []),
            # alpha above beta + 3
            (0.0, -3.5, 2.0, Theorem.T1_1, []),
            # gamma equal to -beta - 2 is excluded
            (-1.0, -3.5, 1.5, Theorem.T1_1, []),
            # alpha below the lower root
            (-1.9, -4.5, 3.0, Theorem.T1_1, []),
            (-2.5, -4.9, 3.5, Theorem.T1_1, []),
            # density dependent viscosity
            (0.0, -2.5, 1.4, Theorem.T1_2, ["i"]),
            (-0.25, -3.5, 2.0, Theorem.T1_2, ["ii", "iii"]),
            (0.0, -3.5, 2.0, Theorem.T1_2, ["iii"]),
            (-1.0, -3.8, 2.0, Theorem.T1_2, ["iii"]),
            (-1.0, -4.5, 3.0, Theorem.T1_2, ["iv"]),
            (-0.75, -4.5, 3.0, Theorem.T1_2, ["ii", "iv"]),
            (-1.5, -5.0, 3.5, Theorem.T1_2, ["v"]),
            (-1.5, -6.0, 4.5, Theorem.T1_2, ["ii", "v"]),
            (-1.2, -4.7, 3.0, Theorem.T1_2, ["iv"]),
            (-1.4, -4.7, 3.0, Theorem.T1_2, ["iv", "v"]),
            (0.0, -5.5, 4.0, Theorem.T1_2, []),
            (0.5, -4.5, 3.0, Theorem.T1_2, []),
            (-0.25, -3.5, 1.5, Theorem.T1_2, []),
            (0.0, -7.0, 6.0, Theorem.T1_2, []),
            # Bresch-Desjardins pair
            (0.5, -2.5, 1.4, Theorem.BD, ["i"]),
            (0.0, -2.5, 1.4, Theorem.BD, []),
            (0.1, -3.5, 2.0, Theorem.BD, ["ii"]),
        ),
    )
    def test_truth_table(self, alpha, beta, gamma, theorem, expected_cases):
        verdict = classify(alpha, beta, gamma, theorem)
        assert verdict.matched_cases == expected_cases
        assert verdict.matched is bool(expected_cases)

    def test_theorem_accepts_strings(self):
        assert classify(0.0, -2.5, 1.4, "T1.1").theorem is Theorem.T1_1

    @pytest.mark.parametrize(
        "triple,expectation",
        (
            ((0.0, -2.5, 1.4), does_not_raise()),
            ((math.nan, -2.5, 1.4), pytest.raises(DomainError)),
            ((0.0, math.nan, 1.4), pytest.raises(DomainError)),
            ((0.0, -2.5, math.nan), pytest.raises(DomainError)),
        ),
    )
    def test_nan_rejected(self, triple, expectation):
        with expectation:
            classify(*triple, Theorem.T1_1)

    def test_slacks_cover_every_condition(self):
        verdict = classify(0.0, -2.5, 1.4, Theorem.T1_2)
        expected = {
            f"{case}:{condition.label}"
            for case, conditions in CASES[Theorem.T1_2].items()
            for condition in conditions
        }
        assert set(verdict.slacks) == expected

    def test_slack_signs(self):
        verdict = classify(0.0, -2.5, 1.4, Theorem.T1_1)
        assert verdict.slacks["i:beta >= -3"] == pytest.approx(0.5)
        assert verdict.slacks["i:beta <= -2"] == pytest.approx(0.5)
        assert verdict.case_slack_min("i") == pytest.approx(0.4)
        # case ii needs beta < -3
        assert verdict.case_slack_min("ii") < 0

    def test_equality_tolerance(self):
        # alpha = (beta + 3) / 2 only up to the tolerance
        assert classify(-0.25 + 1e-13, -3.5, 2.0, Theorem.T1_2).matched_cases == ["ii", "iii"]
        assert classify(-0.25 + 1e-6, -3.5, 2.0, Theorem.T1_2).matched_cases == ["iii"]
        loose = classify(-0.25 + 1e-6, -3.5, 2.0, Theorem.T1_2, eq_tol=1e-5)
        assert loose.matched_cases == ["ii", "iii"]

    @pytest.mark.parametrize(
        "verdict_args,expected_description",
        (
            ((0.0, -2.5, 1.4, Theorem.T1_1), "T1.1 case i"),
            ((-0.25, -3.5, 2.0, Theorem.T1_2), "T1.2 case ii,iii"),
            ((0.0, -1.0, 1.4, Theorem.T1_1), "T1.1 no case"),
        ),
    )
    def test_describe(self, verdict_args, expected_description):
        assert classify(*verdict_args).describe() == expected_description


class TestSignPolynomials:
    @pytest.mark.parametrize(
        "polynomial,alpha,beta",
        (
            (f3p, 0.0, -3.5),
            (f3p, -1.0, -3.8),
            (f3p, -1.0, -4.5),
            (f3p, -1.2, -4.7),
            (f3, -1.5, -5.0),
            (f3, -1.5, -6.0),
            (f3, -1.4, -4.7),
            (f1, -1.72, -4.7),
            (f1p, -1.0, -3.5),
        ),
    )
    def test_positive_inside_cases(self, polynomial, alpha, beta):
        assert polynomial(alpha, beta) > 0

    def test_companions_scale_with_m(self):
        for alpha, beta in ((0.0, -2.5), (-1.0, -3.5), (-1.5, -4.8)):
            assert f2(2, alpha, beta) == pytest.approx(2 * f2(1, alpha, beta))
            assert f2p(2, alpha, beta) == pytest.approx(2 * f2p(1, alpha, beta))

    def test_density_dependent_polynomials_match(self):
        assert f3(-1.0, -4.0) == f1(-1.0, -4.0)
        assert f3p(-1.0, -4.0) == f1p(-1.0, -4.0)
        assert f4(2, -1.0, -4.0) == f2(2, -1.0, -4.0)
        assert (f3, f4, f3p, f4p) == (f1, f2, f1p, f2p)

    def test_positivity_interval_of_f1(self):
        beta = -4.8
        radicand = -2 * beta**2 - 22 * beta - 59
        lower, upper = positivity_interval(f1, beta)
        assert lower == pytest.approx((-3 - math.sqrt(radicand)) / 2, abs=1e-9)
        assert upper == pytest.approx((-3 + math.sqrt(radicand)) / 2, abs=1e-9)

    def test_positivity_interval_of_f1p(self):
        beta = -3.5
        radicand = -2 * (beta + 2) * (beta + 5)
        lower, upper = positivity_interval(f1p, beta)
        assert lower == pytest.approx((beta + 2 - math.sqrt(radicand)) / 3, abs=1e-9)
        assert upper == pytest.approx((beta + 2 + math.sqrt(radicand)) / 3, abs=1e-9)

    def test_positivity_interval_empty(self):
        # the radicand of f1 is negative for beta = -2.5
        assert positivity_interval(f1, -2.5) is None

    def test_bd_coefficients(self):
        assert bd_coefficients(0.5) == (1.0, -1.0)
        assert bd_coefficients(2.0) == (1.0, 2.0)


class TestSweepRegions:
    def test_first_case_rectangle_all_matched(self):
        rows = sweep_regions((-1.0, 1.0), (-3.0, -2.0), 1.4, Theorem.T1_1, 5)
        assert len(rows) == 5
        assert all(len(row) == 5 for row in rows)
        assert all(verdict.matched_cases == ["i"] for row in rows for verdict in row)

    def test_no_case_strip(self):
        rows = sweep_regions((-1.0, 1.0), (-1.9, -1.0), 1.4, Theorem.T1_1, 4)
        assert not any(verdict.matched for row in rows for verdict in row)

    def test_rows_run_over_beta(self):
        rows = sweep_regions((0.0, 1.0), (-3.0, -2.0), 1.4, Theorem.T1_1, (2, 3))
        assert [row[0].beta for row in rows] == [-3.0, -2.5, -2.0]
        assert [verdict.alpha for verdict in rows[0]] == [0.0, 1.0]

    def test_single_point_uses_midpoint(self):
        rows = sweep_regions((0.0, 1.0), (-3.0, -2.0), 1.4, Theorem.T1_1, 1)
        assert len(rows) == 1 and len(rows[0]) == 1
        assert (rows[0][0].alpha, rows[0][0].beta) == (0.5, -2.5)

    def test_workers_do_not_change_result(self):
        args = ((-2.0, 0.5), (-5.0, -2.0), 3.0, Theorem.T1_2, 7)
        serial = sweep_regions(*args)
        parallel = sweep_regions(*args, workers=4)
        assert [[v.matched_cases for v in row] for row in serial] == [
            [v.matched_cases for v in row] for row in parallel
        ]
        assert [[v.slacks for v in row] for row in serial] == [
            [v.slacks for v in row] for row in parallel
        ]

    def test_raising_gamma_only_adds_matches(self):
        args = ((-2.0, 0.5), (-5.0, -2.0))
        low = sweep_regions(*args, 2.0, Theorem.T1_1, 9)
        high = sweep_regions(*args, 3.5, Theorem.T1_1, 9)
        for low_row, high_row in zip(low, high):
            for low_verdict, high_verdict in zip(low_row, high_row):
                assert set(low_verdict.matched_cases) <= set(high_verdict.matched_cases)

    @pytest.mark.parametrize(
        "alpha_range,beta_range,resolution",
        (
            # zero size with more than one point
            ((0.0, 0.0), (-3.0, -2.0), 3),
            ((0.0, 1.0), (-2.0, -3.0), 3),
            ((0.0, math.inf), (-3.0, -2.0), 3),
            ((0.0, 1.0), (-3.0, -2.0), 0),
        ),
    )
    def test_invalid_axes(self, alpha_range, beta_range, resolution):
        with pytest.raises(DomainError):
            sweep_regions(alpha_range, beta_range, 1.4, Theorem.T1_1, resolution)
