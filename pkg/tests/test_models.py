import math

import numpy as np
import pytest

from models import (
    AdditiveNoise,
    MultiplicativeNoise,
    PredictableScaleRademacher,
    ScaledRademacher,
    enumerate_paths,
    gamma_sequence,
    martingale_defect,
    merge_last_two,
    quadratic_variation_law,
    sample_path,
    theoretical_v2,
    verify_class_membership,
)
from op.distributions import DiscreteDist, UniformNoise
from op.errors import DegenerateModelError, DomainError, UnsupportedError


def rare_three():
    return DiscreteDist.from_atoms([(-3.0, 1 / 18), (0.0, 8 / 9), (3.0, 1 / 18)])


class TestGamma:

    def test_scaled(self):
        seq = gamma_sequence(ScaledRademacher(1.0), 5)
        assert seq.gammas == [1.0] * 5
        assert seq.u_n == 1.0

    def test_predictable_uses_largest_scale(self):
        assert gamma_sequence(PredictableScaleRademacher(0.5, 1.5, 1.0), 3).u_n == 1.5

    def test_additive_rademacher_noise(self):
        model = AdditiveNoise(base=ScaledRademacher(1.0), noise=DiscreteDist.rademacher())
        assert model.gamma(1) == 4.0

    def test_multiplicative_heavy_noise(self):
        model = MultiplicativeNoise(base=ScaledRademacher(1.0), noise=rare_three(), M=2.0)
        assert model.gamma(1) == pytest.approx(6.0, rel=1e-12)

    def test_n_must_be_positive(self):
        with pytest.raises(DomainError):
            gamma_sequence(ScaledRademacher(1.0), 0)


class TestMembership:

    @pytest.mark.parametrize("model", [
        ScaledRademacher(0.3),
        PredictableScaleRademacher(0.5, 1.5, 1.0),
        AdditiveNoise(base=ScaledRademacher(1.0), noise=UniformNoise(1.0)),
        MultiplicativeNoise(base=PredictableScaleRademacher(1.0, 2.0), noise=rare_three(), M=2.0),
    ])
    def test_shipped_models_satisfy_their_bound(self, model):
        report = verify_class_membership(model, 8)
        assert report.passed, report.reason
        assert report.checked >= 8

    def test_too_small_bound_fails(self):
        report = verify_class_membership(ScaledRademacher(1.0), 4, gamma=0.5)
        assert not report.passed
        assert report.max_excess == pytest.approx(0.5)
        assert "k=1" in report.reason

    def test_martingale_defect_is_zero(self):
        model = AdditiveNoise(base=PredictableScaleRademacher(0.5, 1.5), noise=rare_three())
        assert martingale_defect(model, 6) <= 1e-15

    def test_merge_last_two_scaled(self):
        assert merge_last_two(ScaledRademacher(1.0), 2) == pytest.approx(-4.0)

    def test_merge_last_two_stays_in_widened_class(self):
        assert merge_last_two(PredictableScaleRademacher(0.5, 1.5, 1.0), 5) <= 0.0

    def test_merge_needs_two_steps(self):
        with pytest.raises(DomainError):
            merge_last_two(ScaledRademacher(1.0), 1)


class TestVariance:

    def test_predictable_v2(self):
        assert theoretical_v2(PredictableScaleRademacher(0.5, 1.5, 1.0), 3) == pytest.approx(3.5)

    def test_scaled_v2(self):
        assert theoretical_v2(ScaledRademacher(2.0), 10) == pytest.approx(40.0)

    def test_quadratic_variation_law(self):
        law = quadratic_variation_law(PredictableScaleRademacher(0.5, 1.5, 1.0), 3)
        np.testing.assert_allclose(law.values, [1.5, 3.5, 5.5])
        np.testing.assert_allclose(law.probs, [0.25, 0.5, 0.25])
        assert law.mean() == pytest.approx(3.5)

    def test_normalized_law_is_a_point_mass(self):
        model = ScaledRademacher(0.3)
        law = quadratic_variation_law(model, 7)
        assert len(law) == 1
        assert law.values[0] == theoretical_v2(model, 7)

    def test_enumeration_reproduces_v2(self):
        model = PredictableScaleRademacher(0.5, 1.5, 1.0)
        paths = enumerate_paths(model, 3)
        assert len(paths) == 8
        assert math.fsum(p.prob for p in paths) == pytest.approx(1.0)
        assert math.fsum(p.prob * sum(p.values) for p in paths) == pytest.approx(0.0, abs=1e-15)
        assert math.fsum(p.prob * sum(p.cond_vars) for p in paths) == pytest.approx(3.5)

    def test_enumeration_needs_discrete_noise(self):
        model = AdditiveNoise(base=ScaledRademacher(1.0), noise=UniformNoise(1.0))
        with pytest.raises(UnsupportedError):
            enumerate_paths(model, 2)


class TestSamplePath:

    def test_deterministic_in_key(self, key):
        model = PredictableScaleRademacher(0.5, 1.5, 1.0)
        a = sample_path(model, 50, key.substream(3))
        b = sample_path(model, 50, key.substream(3))
        np.testing.assert_array_equal(a.values, b.values)
        assert a.V2 == b.V2

    def test_normalized_kind_has_unit_V2(self, key):
        path = sample_path(ScaledRademacher(0.3), 40, key)
        assert path.V2 == 1.0
        assert path.n == 40
        assert path.S_n == pytest.approx(path.values.sum())

    def test_scales_are_predictable(self, key):
        model = PredictableScaleRademacher(0.5, 1.5, 1.0)
        path = sample_path(model, 64, key.substream(1))
        np.testing.assert_array_equal(model.cond_vars_from_history(path.base_values), path.cond_vars)
        assert set(np.abs(path.values).tolist()) <= {0.5, 1.0, 1.5}

    def test_composite_values(self, key):
        model = AdditiveNoise(base=ScaledRademacher(1.0), noise=DiscreteDist.rademacher())
        path = sample_path(model, 100, key.substream(2))
        assert set(path.values.tolist()) <= {-2.0, 0.0, 2.0}
        np.testing.assert_array_equal(path.cond_vars, np.full(100, 2.0))

    def test_n_must_be_positive(self, key):
        with pytest.raises(DomainError):
            sample_path(ScaledRademacher(1.0), 0, key)

    def test_mean_quadratic_variation(self, key):
        model = PredictableScaleRademacher(0.5, 1.5, 1.0)
        paths = [sample_path(model, 32, key.substream(r)) for r in range(2000)]
        assert np.mean([p.V2 for p in paths]) == pytest.approx(1.0, abs=0.02)
        assert np.mean([p.S_n ** 2 / p.v2 for p in paths]) == pytest.approx(1.0, abs=0.15)


class TestModelErrors:

    def test_nonpositive_scale(self):
        with pytest.raises(DomainError):
            ScaledRademacher(0.0)
        with pytest.raises(DomainError):
            PredictableScaleRademacher(-1.0, 1.0)

    def test_uncentered_noise(self):
        with pytest.raises(DomainError):
            AdditiveNoise(base=ScaledRademacher(1.0), noise=DiscreteDist.point_mass(1.0))

    def test_bound_below_base(self):
        with pytest.raises(DomainError):
            AdditiveNoise(base=ScaledRademacher(2.0), noise=DiscreteDist.rademacher(), M=1.0)

    def test_unknown_noise(self):
        with pytest.raises(UnsupportedError):
            MultiplicativeNoise(base=ScaledRademacher(1.0), noise=object())

    def test_nested_composite(self):
        inner = AdditiveNoise(base=ScaledRademacher(1.0), noise=DiscreteDist.rademacher())
        with pytest.raises(UnsupportedError):
            AdditiveNoise(base=inner, noise=DiscreteDist.rademacher())

    def test_zero_noise_is_degenerate(self):
        model = MultiplicativeNoise(base=ScaledRademacher(1.0), noise=DiscreteDist.point_mass(0.0))
        with pytest.raises(DegenerateModelError):
            model.gamma(1)


@pytest.mark.slow
class TestSquareSumConsistency:

    @pytest.mark.parametrize("model", [
        PredictableScaleRademacher(0.5, 1.5, 1.0),
        AdditiveNoise(base=ScaledRademacher(1.0), noise=UniformNoise(0.5)),
        MultiplicativeNoise(base=PredictableScaleRademacher(1.0, 2.0), noise=rare_three(), M=2.0),
    ])
    def test_within_five_standard_errors(self, key, model):
        n, m = 16, 10 ** 5
        squares = np.array([np.sum(sample_path(model, n, key.substream(r)).values ** 2) for r in range(m)])
        stderr = squares.std(ddof=1) / math.sqrt(m)
        assert abs(squares.mean() - theoretical_v2(model, n)) <= 5 * stderr
