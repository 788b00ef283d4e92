import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import smoothing
from empirics import ks_distance_to_normal
from op.distributions import DiscreteDist, std_normal_cdf
from op.errors import DomainError
from op.streams import STEP_AUX, StreamKey, make_generator
from smoothing import (
    DiscreteJoint,
    conditional_moment_norm,
    default_lambda_grid,
    delta_of,
    explicit_constant,
    fit_stated_constants,
    intermediate_inequality_check,
    lambda_star,
    lemma2_bound_check,
    random_joint,
)


def two_level_joint():
    # E(|Y|^k | X=0) = 1, E(|Y|^k | X=1) = 2^k
    return DiscreteJoint.from_atoms([(0.0, 1.0, 0.25), (0.0, -1.0, 0.25), (1.0, 2.0, 0.5)])


def joints(count, seed=11):
    return [random_joint(make_generator(StreamKey(seed, i, STEP_AUX))) for i in range(count)]


class TestDelta:

    def test_point_mass(self):
        assert delta_of(DiscreteDist.point_mass(0.0)) == 0.5

    def test_rademacher(self):
        assert delta_of(DiscreteDist.rademacher()) == pytest.approx(0.5 - std_normal_cdf(-1.0))

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.integers(-12, 12), min_size=1, max_size=40))
    def test_agrees_with_empirical_ks(self, atoms):
        sample = np.asarray(atoms, dtype=np.float64) * 0.25
        law = DiscreteDist.from_weights(sample, np.ones(len(sample), dtype=np.int64))
        assert delta_of(law) == pytest.approx(ks_distance_to_normal(sample), abs=1e-12)


class TestConditionalMoment:

    @pytest.mark.parametrize("k,r,expected", [
        (1, math.inf, 2.0),
        (1, 1, 1.5),
        (1, 2, math.sqrt(2.5)),
        (2, math.inf, 4.0),
        (2, "inf", 4.0),
    ])
    def test_two_level(self, k, r, expected):
        assert conditional_moment_norm(two_level_joint(), k, r) == pytest.approx(expected)

    def test_zero_perturbation(self):
        joint = DiscreteJoint.from_atoms([(-1.0, 0.0, 0.5), (1.0, 0.0, 0.5)])
        assert conditional_moment_norm(joint, 3, 2) == 0.0

    def test_errors(self):
        with pytest.raises(DomainError):
            conditional_moment_norm(two_level_joint(), 0, 1)
        with pytest.raises(DomainError):
            conditional_moment_norm(two_level_joint(), 1, 0.5)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10 ** 6), st.sampled_from([0.5, 1.0, 2.0, 3.0]))
    def test_nondecreasing_in_r(self, seed, k):
        joint = random_joint(make_generator(StreamKey(seed)))
        norms = [conditional_moment_norm(joint, k, r) for r in (1, 2, 4, math.inf)]
        assert all(a <= b * (1 + 1e-12) + 1e-15 for a, b in zip(norms, norms[1:]))


class TestExplicitConstant:

    def test_first_values(self):
        assert explicit_constant(1) == pytest.approx(2 * (2 * math.pi) ** -0.25, rel=1e-15)
        assert explicit_constant(1) == pytest.approx(1.2632376, abs=1e-7)
        assert explicit_constant(2) == pytest.approx(1.083852, abs=1e-6)

    def test_limit(self):
        assert explicit_constant(math.inf) == pytest.approx(2 / math.sqrt(2 * math.pi))
        assert explicit_constant(1e6) == pytest.approx(explicit_constant(math.inf), rel=1e-5)

    @pytest.mark.parametrize("k", [1, 2])
    def test_lambda_star_substitution(self, k):
        lam = lambda_star(1.0, k)
        assert explicit_constant(k) == pytest.approx(lam / math.sqrt(2 * math.pi) + lam ** -k, abs=1e-12)

    def test_lambda_star_balances_terms(self):
        beta, k = 0.3, 2.0
        lam = lambda_star(beta, k)
        assert lam / math.sqrt(2 * math.pi) == pytest.approx(beta * lam ** -k)

    def test_errors(self):
        with pytest.raises(DomainError):
            explicit_constant(0)


class TestIntermediateInequality:

    def test_no_violations_on_random_joints(self):
        for i, joint in enumerate(joints(40)):
            for k in (1.0, 2.0, 3.0):
                for r in (1.0, 2.0, math.inf):
                    assert intermediate_inequality_check(joint, k, r) == [], (i, k, r)

    def test_float_joint(self):
        third = 1.0 / 3.0
        joint = DiscreteJoint.from_atoms([(0.1, 0.3, third), (-0.7, -0.2, third), (1.3, 0.05, third)])
        assert intermediate_inequality_check(joint, 2.0, 2.0) == []

    def test_understated_moment_is_caught(self, monkeypatch):
        monkeypatch.setattr(smoothing, "conditional_moment_norm", lambda joint, k, r: 0.0)
        joint = DiscreteJoint.from_weights([0.0, 0.0], [1.0, -1.0], [1, 1])
        violations = intermediate_inequality_check(joint, 1.0, math.inf, lambdas=[0.5])
        assert violations
        assert {v.side for v in violations} == {"lower", "upper"}
        assert all(v.lam == 0.5 for v in violations)

    def test_explicit_grids(self):
        joint = two_level_joint()
        assert intermediate_inequality_check(joint, 1.0, 1.0, lambdas=[1.0, 2.0],
                                             t_grid=np.linspace(-3, 3, 61)) == []

    def test_lambda_must_be_positive(self):
        with pytest.raises(DomainError):
            intermediate_inequality_check(two_level_joint(), 1.0, 1.0, lambdas=[0.0, 1.0])

    def test_default_grid(self):
        grid = default_lambda_grid()
        assert len(grid) == 50
        assert grid[0] == pytest.approx(1e-3) and grid[-1] == pytest.approx(1e2)


class TestSmoothingBound:

    def test_one_sided_bounds_hold(self):
        for joint in joints(40, seed=5):
            for k in (1.0, 2.0, 3.0):
                for r in (1.0, 2.0, math.inf):
                    report = lemma2_bound_check(joint, k, r)
                    assert report.violations == []
                    assert report.slack >= -1e-12
                    assert report.reverse_slack >= -1e-12

    def test_zero_perturbation_is_tight(self):
        joint = DiscreteJoint.from_weights([-1.0, 1.0], [0.0, 0.0], [1, 1])
        report = lemma2_bound_check(joint, 2.0, math.inf)
        assert report.beta == 0.0
        assert report.delta_x == report.delta_xy
        assert report.bound == report.delta_x
        assert report.c1_required == 0.0 and report.c2_required == 0.0

    def test_report_fields(self):
        report = lemma2_bound_check(two_level_joint(), 1.0, "inf")
        assert report.r == math.inf
        assert report.beta == pytest.approx(2.0)
        assert report.c_prime == explicit_constant(1.0)
        assert report.bound == pytest.approx(report.delta_x + explicit_constant(1.0) * math.sqrt(2.0))
        assert report.variance_branch == pytest.approx(2.0)

    def test_fit_stated_constants(self):
        reports = [lemma2_bound_check(j, 2.0, 2.0) for j in joints(20, seed=3)]
        c1, c2 = fit_stated_constants(reports)
        assert c1 == max(r.c1_required for r in reports)
        assert c2 == max(r.c2_required for r in reports)
        assert fit_stated_constants([]) == (0.0, 0.0)


@pytest.mark.slow
class TestThousandJoints:

    def test_no_violations(self):
        for joint in joints(1000, seed=0):
            for k in (1.0, 2.0, 3.0):
                for r in (1.0, 2.0, math.inf):
                    assert intermediate_inequality_check(joint, k, r) == []
                    assert lemma2_bound_check(joint, k, r).violations == []
