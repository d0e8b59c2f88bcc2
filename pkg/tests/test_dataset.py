"""Dataset invariants, CSV round trips, and the synthetic samplers."""

import math

import numpy as np
import pytest
from scipy.stats import ks_2samp

import regbridge as rb
from regbridge.dataset import check_monotone
from regbridge.errors import ParseError, SchemaError, ValidationError


def small_dataset():
    reg = np.array([[0.3, 1.0], [0.1, 1.0], [0.7, 1.0]])
    return rb.Dataset(reg, np.array([1.0, 2.0, 3.0]),
                      order_columns=(0,), intercept_column=1,
                      regressor_names=("x", "const"))


# ======================================================================
# Dataset invariants
# ======================================================================

class TestDataset:
    def test_roles_and_shapes(self):
        d = small_dataset()
        assert d.n == 3 and d.p == 2
        assert d.order_columns == (0,)
        assert d.intercept_column == 1
        assert d.regressor_names == ("x", "const")

    def test_arrays_read_only(self):
        d = small_dataset()
        with pytest.raises(ValueError):
            d.regressors[0, 0] = 9.0
        with pytest.raises(ValueError):
            d.response[0] = 9.0

    def test_empty_rejected(self):
        with pytest.raises(ValidationError, match="n >= 1"):
            rb.Dataset(np.empty((0, 2)), np.empty(0), order_columns=(0,))

    def test_non_finite_rejected(self):
        with pytest.raises(ValidationError):
            rb.Dataset(np.array([[np.nan], [1.0]]), np.array([1.0, 2.0]), (0,))
        with pytest.raises(ValidationError):
            rb.Dataset(np.array([[0.0], [1.0]]), np.array([1.0, np.inf]), (0,))

    def test_response_length_mismatch(self):
        with pytest.raises(ValidationError):
            rb.Dataset(np.ones((3, 1)), np.ones(2), (0,))

    def test_intercept_must_be_ones(self):
        reg = np.array([[0.3, 1.0], [0.1, 2.0]])
        with pytest.raises(ValidationError, match="identically 1"):
            rb.Dataset(reg, np.zeros(2), (0,), intercept_column=1)

    def test_intercept_cannot_be_ordering(self):
        reg = np.ones((3, 1))
        with pytest.raises(ValidationError):
            rb.Dataset(reg, np.zeros(3), (0,), intercept_column=0)

    def test_order_columns_validated(self):
        with pytest.raises(ValidationError):
            rb.Dataset(np.ones((3, 1)), np.zeros(3), (2,))
        with pytest.raises(ValidationError, match="distinct"):
            rb.Dataset(np.random.default_rng(0).random((3, 2)), np.zeros(3), (0, 0))

    def test_ordering_values(self):
        d = small_dataset()
        assert np.array_equal(d.ordering_values(0), [0.3, 0.1, 0.7])
        with pytest.raises(ValidationError):
            d.ordering_values(1)


# ======================================================================
# CSV
# ======================================================================

class TestCSV:
    def test_round_trip_bit_exact(self, tmp_path):
        model = rb.fixtures.two_uniform_model()
        data = rb.sample_h0(model, 37, 11)
        path = tmp_path / "d.csv"
        rb.write_csv(data, path)
        back = rb.load_csv(path, rb.ColumnSchema(order=("x1", "x2"),
                                                 response="y",
                                                 intercept="const"))
        assert np.array_equal(back.regressors, data.regressors)
        assert np.array_equal(back.response, data.response)
        assert back.order_columns == data.order_columns
        assert back.intercept_column == data.intercept_column

    def test_small_file(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("x,const,y\n0.1,1,2.0\n0.5,1,3.0\n0.3,1,2.5\n")
        d = rb.load_csv(path, rb.ColumnSchema(order=("x",), response="y",
                                              intercept="const"))
        assert d.n == 3 and d.p == 2
        assert d.regressor_names == ("x", "const")

    def test_missing_column(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("a,y\n1,2\n")
        with pytest.raises(SchemaError, match="missing"):
            rb.load_csv(path, rb.ColumnSchema(order=("x",), response="y"))

    def test_duplicate_header(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("x,x,y\n1,2,3\n")
        with pytest.raises(SchemaError, match="duplicated"):
            rb.load_csv(path, rb.ColumnSchema(order=("x",), response="y"))

    def test_bad_cell(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("x,y\n1,2\nabc,3\n")
        with pytest.raises(ParseError, match="row 3.*'x'"):
            rb.load_csv(path, rb.ColumnSchema(order=("x",), response="y"))

    def test_non_finite_cell(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("x,y\nnan,2\n")
        with pytest.raises(ParseError, match="non-finite"):
            rb.load_csv(path, rb.ColumnSchema(order=("x",), response="y"))

    def test_header_only(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("x,y\n")
        with pytest.raises(ValidationError, match="n >= 1"):
            rb.load_csv(path, rb.ColumnSchema(order=("x",), response="y"))

    def test_schema_role_clash(self):
        with pytest.raises(ValidationError):
            rb.ColumnSchema(order=("x",), response="x")


# ======================================================================
# Quantile functions and copulas
# ======================================================================

class TestQuantiles:
    def test_identity_moments(self):
        q = rb.IdentityQuantile()
        assert q.mean() == 0.5
        assert q.second_moment() == pytest.approx(1 / 3)
        assert q.partial_integral(0.4) == pytest.approx(0.08)

    def test_affine_moments_match_quadrature(self):
        q = rb.AffineQuantile(shift=-1.0, scale=2.0)
        base = rb.QuantileFunction.mean(q), rb.QuantileFunction.second_moment(q)
        assert q.mean() == pytest.approx(base[0], abs=1e-9)
        assert q.second_moment() == pytest.approx(base[1], abs=1e-9)
        assert q.partial_integral(0.7) == pytest.approx(
            rb.QuantileFunction.partial_integral(q, 0.7), abs=1e-9)

    def test_function_quantile_quadrature(self):
        q = rb.FunctionQuantile(np.sqrt)
        assert q.mean() == pytest.approx(2 / 3, abs=1e-8)
        assert q.second_moment() == pytest.approx(0.5, abs=1e-8)
        assert q.partial_integral(0.25) == pytest.approx((2 / 3) * 0.125, abs=1e-8)

    def test_monotone_check(self):
        check_monotone(rb.IdentityQuantile())
        with pytest.raises(ValidationError):
            check_monotone(rb.FunctionQuantile(lambda u: -u))


class TestCopulas:
    def test_independence_margins_uniform(self):
        cop = rb.IndependenceCopula(2)
        u = cop.sample(20000, rb.philox_stream(3))
        assert u.shape == (20000, 2)
        assert abs(u.mean() - 0.5) < 0.01
        corr = np.corrcoef(u.T)[0, 1]
        assert abs(corr) < 0.03

    def test_gaussian_copula_margins_and_dependence(self):
        cop = rb.GaussianCopula(rb.exchangeable_correlation(2, 0.6))
        u = cop.sample(20000, rb.philox_stream(4))
        # uniform margins regardless of dependence
        for j in range(2):
            assert abs(u[:, j].mean() - 0.5) < 0.01
            assert abs(np.mean(u[:, j] ** 2) - 1 / 3) < 0.01
        assert np.corrcoef(u.T)[0, 1] > 0.4

    def test_gaussian_copula_validation(self):
        with pytest.raises(ValidationError):
            rb.GaussianCopula(np.array([[1.0, 0.2], [0.3, 1.0]]))
        with pytest.raises(ValidationError):
            rb.GaussianCopula(np.array([[2.0, 0.0], [0.0, 1.0]]))
        with pytest.raises(ValidationError):
            rb.GaussianCopula(np.array([[1.0, 1.0], [1.0, 1.0]]))


# ======================================================================
# Samplers
# ======================================================================

class TestSampleH0:
    def test_zero_noise_exact_linear(self):
        model = rb.SyntheticModel(copula=rb.IndependenceCopula(1),
                                  quantile_funcs=(rb.IdentityQuantile(),),
                                  theta=(2.0, 1.0),
                                  noise=rb.NoiseSpec("normal", 0.0))
        d = rb.sample_h0(model, 100, 5)
        assert np.allclose(d.response, 2.0 * d.regressors[:, 0] + 1.0)

    def test_roles(self):
        d = rb.sample_h0(rb.fixtures.two_uniform_model(), 50, 1)
        assert d.order_columns == (0, 1)
        assert d.intercept_column == 2
        assert np.all(d.regressors[:, 2] == 1.0)

    def test_deterministic_in_seed(self):
        m = rb.fixtures.single_uniform_model()
        a = rb.sample_h0(m, 64, 9)
        b = rb.sample_h0(m, 64, 9)
        c = rb.sample_h0(m, 64, 10)
        assert np.array_equal(a.response, b.response)
        assert not np.array_equal(a.response, c.response)

    def test_independence_sample_correlation_small(self):
        d = rb.sample_h0(rb.fixtures.two_uniform_model(), 100000, 21)
        corr = np.corrcoef(d.regressors[:, 0], d.regressors[:, 1])[0, 1]
        assert abs(corr) < 0.01

    def test_uniform_noise_variance(self):
        model = rb.SyntheticModel(copula=rb.IndependenceCopula(1),
                                  theta=(0.0, 0.0),
                                  noise=rb.NoiseSpec("uniform", 2.5))
        d = rb.sample_h0(model, 100000, 2)
        assert abs(np.var(d.response) - 2.5) < 0.05
        assert abs(d.response.mean()) < 0.02

    def test_theta_length_validated(self):
        with pytest.raises(ValidationError, match="theta"):
            rb.SyntheticModel(copula=rb.IndependenceCopula(2), theta=(1.0, 2.0))


class TestSampleAlternative:
    def test_quadratic_changes_response_only(self):
        m = rb.fixtures.single_uniform_model()
        h0 = rb.sample_h0(m, 200, 3)
        alt = rb.sample_alternative(m, rb.AddQuadratic(1.5, 0), 200, 3)
        assert np.array_equal(alt.regressors, h0.regressors)
        assert np.allclose(alt.response - h0.response,
                           1.5 * h0.regressors[:, 0] ** 2)

    def test_constant_scale_equals_h0_in_distribution(self):
        m = rb.fixtures.single_uniform_model()
        breach = rb.Heteroscedastic(rb.fixtures.unit_scale)
        a = rb.sample_alternative(m, breach, 10000, 100)
        b = rb.sample_h0(m, 10000, 200)
        stat = ks_2samp(a.response, b.response)
        assert stat.pvalue > 0.01

    def test_constant_scale_same_seed_bit_equal(self):
        m = rb.fixtures.single_uniform_model()
        breach = rb.Heteroscedastic(rb.fixtures.unit_scale)
        a = rb.sample_alternative(m, breach, 500, 77)
        b = rb.sample_h0(m, 500, 77)
        assert np.array_equal(a.response, b.response)

    def test_unknown_breach(self):
        m = rb.fixtures.single_uniform_model()
        with pytest.raises(ValidationError, match="breach"):
            rb.sample_alternative(m, object(), 10, 0)

    def test_negative_scale_rejected(self):
        m = rb.fixtures.single_uniform_model()
        breach = rb.Heteroscedastic(lambda block: np.zeros(len(block)))
        with pytest.raises(ValidationError, match="positive"):
            rb.sample_alternative(m, breach, 10, 0)


class TestSampleConcomitant:
    def test_shapes_and_moments(self):
        model = rb.fixtures.zero_mean_field_model(2)
        X, Y = rb.sample_concomitant(model, 100000, 31)
        assert X.shape == (100000, 2) and Y.shape == (100000,)
        assert 0.98 < np.var(Y) < 1.02
        assert abs(Y.mean()) < 0.02

    def test_mean_map_applied(self):
        model = rb.fixtures.field_model(2)
        X, Y = rb.sample_concomitant(model, 200000, 8)
        # regressing Y on (x1 - 1/2) recovers slope 1
        g = X[:, 0] - 0.5
        slope = float(g @ Y) / float(g @ g)
        assert abs(slope - 1.0) < 0.03

    def test_requires_conditional_maps(self):
        with pytest.raises(ValidationError, match="cond_mean"):
            rb.sample_concomitant(rb.fixtures.single_uniform_model(), 10, 0)

    def test_negative_variance_rejected(self):
        model = rb.SyntheticModel(copula=rb.IndependenceCopula(1),
                                  cond_mean=rb.fixtures.zero_mean,
                                  cond_var=lambda u: -np.ones(len(u)))
        with pytest.raises(ValidationError):
            rb.sample_concomitant(model, 10, 0)


class TestNoiseSpec:
    def test_validation(self):
        with pytest.raises(ValidationError):
            rb.NoiseSpec("cauchy", 1.0)
        with pytest.raises(ValidationError):
            rb.NoiseSpec("normal", -1.0)

    def test_unit_variance_draws(self):
        for kind in ("normal", "uniform"):
            draws = rb.NoiseSpec(kind, 1.0).sample(rb.philox_stream(6), 200000)
            assert abs(np.var(draws) - 1.0) < 0.02, kind
