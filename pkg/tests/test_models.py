"""Census arithmetic, model construction and shape checks."""

from fractions import Fraction

import numpy as np
import pytest

from engine.errors import ConfigError, DegenerateCensus, DimensionMismatch, InvalidParameter
from engine.models import (
    ExposureModel,
    GameParams,
    IdsGame,
    InfectionModel,
    PopulationVector,
    StrategyProfile,
    avg_degree,
    check_dimensions,
    check_exposure_model,
    check_infection_model,
    degree_fraction,
    normalize,
    power_law_census,
    read_census_csv,
    weighted_fraction,
)


class TestPopulationVector:

    @pytest.mark.parametrize("raw, expected", [
        ((2, 2), (0.5, 0.5)),
        ((1, 0, 0), (1.0, 0.0, 0.0)),
        ((3, 1), (0.75, 0.25)),
    ])
    def test_normalize(self, raw, expected):
        np.testing.assert_allclose(normalize(raw).masses, expected, rtol=0, atol=1e-15)

    def test_raw_total_is_kept(self):
        s = PopulationVector(np.array([3.0, 1.0]))
        assert s.raw_total == 4.0
        assert s.masses.sum() == pytest.approx(1.0, abs=1e-15)

    def test_all_zero_is_degenerate(self):
        with pytest.raises(DegenerateCensus):
            PopulationVector(np.zeros(3))

    def test_empty_is_degenerate(self):
        with pytest.raises(DegenerateCensus):
            PopulationVector(np.array([]))

    def test_negative_mass_rejected(self):
        with pytest.raises(InvalidParameter):
            PopulationVector(np.array([0.5, -0.1]))

    def test_masses_are_read_only(self):
        s = PopulationVector(np.array([1.0, 1.0]))
        with pytest.raises(ValueError):
            s.masses[0] = 2.0

    def test_degrees_start_at_one(self):
        np.testing.assert_array_equal(PopulationVector(np.ones(4)).degrees, [1, 2, 3, 4])

    def test_degenerate_census_is_a_value_error(self):
        with pytest.raises(ValueError):
            normalize([0.0, 0.0])


class TestFractions:

    def test_degree_fraction_examples(self):
        np.testing.assert_allclose(degree_fraction([0.5, 0.5]), [0.5, 0.5])
        np.testing.assert_allclose(degree_fraction([0.75, 0.25]), [0.75, 0.25])

    def test_fractions_are_scale_invariant(self):
        base = np.array([0.2, 0.3, 0.5])
        np.testing.assert_allclose(degree_fraction(7 * base), degree_fraction(base), rtol=1e-15)
        np.testing.assert_allclose(weighted_fraction(7 * base), weighted_fraction(base), rtol=1e-15)

    def test_weighted_fraction_examples(self):
        np.testing.assert_allclose(weighted_fraction([0.5, 0.5]), [1 / 3, 2 / 3], rtol=1e-15)
        np.testing.assert_allclose(weighted_fraction([1.0]), [1.0])

    @pytest.mark.parametrize("masses, expected", [
        ([0.5, 0.5], 1.5),
        ([1.0], 1.0),
        ([0.0, 1.0], 2.0),
    ])
    def test_avg_degree(self, masses, expected):
        assert avg_degree(masses) == pytest.approx(expected, abs=1e-15)

    def test_neighbor_weights_from_degree_fractions(self, rng):
        for _ in range(100):
            s = PopulationVector(rng.uniform(0.0, 1.0, int(rng.integers(1, 25))) + 1e-3)
            expected = s.degrees * degree_fraction(s) / avg_degree(s)
            np.testing.assert_allclose(weighted_fraction(s), expected, rtol=1e-13)


class TestPowerLawCensus:

    def test_uniform_when_alpha_zero(self):
        np.testing.assert_allclose(power_law_census(0, 3).masses, [1 / 3] * 3, rtol=1e-15)

    def test_alpha_one(self):
        np.testing.assert_allclose(power_law_census(1, 2).masses, [2 / 3, 1 / 3], rtol=1e-15)

    def test_alpha_two_against_exact_fractions(self):
        exact = [Fraction(1, d * d) for d in (1, 2, 3)]
        total = sum(exact)
        expected = [float(x / total) for x in exact]
        assert expected == pytest.approx([36 / 49, 9 / 49, 4 / 49], abs=1e-16)
        np.testing.assert_allclose(power_law_census(2, 3).masses, expected, rtol=1e-14)

    def test_d_max_must_be_positive(self):
        with pytest.raises(InvalidParameter):
            power_law_census(1.0, 0)

    def test_negative_alpha_rejected(self):
        with pytest.raises(InvalidParameter):
            power_law_census(-1.0, 3)


class TestGameParams:

    @pytest.mark.parametrize("kwargs", [
        dict(tau_a=1.5, beta_ia=1.0),
        dict(tau_a=0.5, beta_ia=0.0),
        dict(tau_a=0.5, beta_ia=1.0, i_min=5.0, i_max=5.0),
        dict(tau_a=0.5, beta_ia=1.0, i_min=-1.0),
        dict(tau_a=float("nan"), beta_ia=1.0),
    ])
    def test_invalid_values(self, kwargs):
        with pytest.raises(InvalidParameter):
            GameParams(**kwargs)

    def test_attack_scale(self):
        assert GameParams(tau_a=0.7, beta_ia=0.5).attack_scale == pytest.approx(0.35)


class TestInfectionModel:

    def test_power_law_values(self):
        model = InfectionModel.power_law(1.5, 10.0)
        assert model.p(0.0) == 1.0
        assert model.p(3.0) == pytest.approx(4 ** -1.5)
        assert model.dp(0.0) == pytest.approx(-1.5)
        assert model.expected_loss(0.0) == pytest.approx(10.0)

    def test_power_law_passes_grid_check(self):
        check_infection_model(InfectionModel.power_law(1.5), GameParams(tau_a=0.7, beta_ia=1.0))

    def test_concave_model_fails_convexity(self):
        concave = InfectionModel.custom(lambda a: 1.0 - 0.5 * (np.asarray(a, dtype=float) / 1000.0) ** 2,
                                        lambda a: -np.asarray(a, dtype=float) / 1e6,
                                        loss=10.0)
        with pytest.raises(InvalidParameter, match="convex"):
            check_infection_model(concave, GameParams(tau_a=0.7, beta_ia=1.0))

    def test_increasing_model_rejected(self):
        rising = InfectionModel.custom(lambda a: 1.0 - np.exp(-np.asarray(a, dtype=float)),
                                       lambda a: np.exp(-np.asarray(a, dtype=float)), loss=1.0)
        with pytest.raises(InvalidParameter):
            check_infection_model(rising, GameParams(tau_a=0.7, beta_ia=1.0, i_max=10.0))

    def test_non_positive_zeta_rejected(self):
        with pytest.raises(InvalidParameter):
            InfectionModel.power_law(0.0)

    def test_non_positive_loss_rejected(self):
        with pytest.raises(InvalidParameter):
            InfectionModel.power_law(1.5, loss=0.0)


class TestExposureModel:

    def test_power_values(self):
        model = ExposureModel.power(30.0, 2.0)
        assert model.gplus(0.0) == 0.0
        assert model.gplus(0.5) == pytest.approx(7.5)
        assert model.gplus(0.2433) == pytest.approx(30 * 0.2433 ** 2.0)

    def test_reference_power_value(self):
        assert ExposureModel.power(30.0, 1.1).gplus(0.2433) == pytest.approx(30 * 0.2433 ** 1.1, rel=1e-14)

    def test_zero_coefficient_rejected(self):
        with pytest.raises(InvalidParameter):
            ExposureModel.power(0.0, 1.1)

    def test_decoupled_is_identically_zero(self):
        model = ExposureModel.decoupled()
        np.testing.assert_array_equal(model.gplus(np.linspace(0, 1, 5)), 0.0)
        assert model.is_decoupled
        assert not model.strict

    def test_kappa_conversion(self):
        params = GameParams(tau_a=0.7, beta_ia=0.5)
        model = ExposureModel.power_from_kappa(4.0, 1.5, params)
        gamma = params.attack_scale * 0.3
        assert model.gplus(0.3) == pytest.approx(4.0 * gamma ** 1.5, rel=1e-14)

    def test_from_gamma_composes_attack_scale(self):
        params = GameParams(tau_a=0.5, beta_ia=0.8)
        model = ExposureModel.from_gamma(np.log1p, lambda x: 1.0 / (1.0 + x), params)
        assert model.gplus(0.5) == pytest.approx(np.log1p(0.2))
        assert model.dgplus(0.5) == pytest.approx(0.4 / 1.2)

    def test_derivative_is_finite_at_zero_for_small_exponent(self):
        assert np.isfinite(ExposureModel.power(30.0, 0.5).dgplus(0.0))

    def test_log_model_passes_checks(self):
        check_exposure_model(ExposureModel.log(5.0))

    def test_nonzero_at_origin_rejected(self):
        shifted = ExposureModel.custom(lambda z: 1.0 + np.asarray(z), lambda z: np.ones_like(np.asarray(z)))
        with pytest.raises(InvalidParameter, match="g\\+\\(0\\) = 0"):
            check_exposure_model(shifted)

    def test_unchecked_stub_skips_validation(self):
        flat = ExposureModel.custom(lambda z: np.zeros_like(np.asarray(z, dtype=float)),
                                    lambda z: np.zeros_like(np.asarray(z, dtype=float)), check=False)
        game = IdsGame(params=GameParams(tau_a=0.7, beta_ia=1.0), infection=InfectionModel.power_law(1.5),
                       exposure=flat)
        assert game.validate() is game

    def test_flat_model_rejected_when_checked(self):
        flat = ExposureModel.custom(lambda z: np.zeros_like(np.asarray(z, dtype=float)),
                                    lambda z: np.zeros_like(np.asarray(z, dtype=float)))
        game = IdsGame(params=GameParams(tau_a=0.7, beta_ia=1.0), infection=InfectionModel.power_law(1.5),
                       exposure=flat)
        with pytest.raises(InvalidParameter, match="strictly increasing"):
            game.validate()


class TestStrategyProfile:

    def test_bounds(self):
        params = GameParams(tau_a=0.7, beta_ia=1.0, i_max=10.0)
        StrategyProfile(np.array([0.0, 10.0])).check_bounds(params)
        with pytest.raises(InvalidParameter):
            StrategyProfile(np.array([0.0, 10.5])).check_bounds(params)

    def test_interior(self):
        params = GameParams(tau_a=0.7, beta_ia=1.0, i_max=10.0)
        assert StrategyProfile(np.array([1.0, 2.0])).is_interior(params)
        assert not StrategyProfile(np.array([0.0, 2.0])).is_interior(params)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            check_dimensions(StrategyProfile(np.ones(3)), PopulationVector(np.ones(2)))


class TestReadCensusCsv:

    def test_fills_missing_degrees(self, tmp_path):
        path = tmp_path / "census.csv"
        path.write_text("degree,mass\n1,2\n3,2\n")
        s = read_census_csv(path)
        assert s.d_max == 3
        np.testing.assert_allclose(s.masses, [0.5, 0.0, 0.5])

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            read_census_csv(tmp_path / "absent.csv")

    def test_wrong_header(self, tmp_path):
        path = tmp_path / "census.csv"
        path.write_text("d,m\n1,1\n")
        with pytest.raises(ConfigError):
            read_census_csv(path)

    def test_degree_zero_rejected(self, tmp_path):
        path = tmp_path / "census.csv"
        path.write_text("degree,mass\n0,1\n1,1\n")
        with pytest.raises(InvalidParameter):
            read_census_csv(path)

    def test_repeated_degree_rejected(self, tmp_path):
        path = tmp_path / "census.csv"
        path.write_text("degree,mass\n1,1\n1,1\n")
        with pytest.raises(InvalidParameter):
            read_census_csv(path)

    def test_fractional_degree_rejected(self, tmp_path):
        path = tmp_path / "census.csv"
        path.write_text("degree,mass\n1,0.5\n2.7,0.5\n")
        with pytest.raises(InvalidParameter):
            read_census_csv(path)

    def test_integral_float_degrees_accepted(self, tmp_path):
        path = tmp_path / "census.csv"
        path.write_text("degree,mass\n1.0,1\n2.0,3\n")
        np.testing.assert_allclose(read_census_csv(path).masses, [0.25, 0.75])
