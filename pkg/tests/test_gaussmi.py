import math

import numpy as np
import pytest
from _oracles import model_from_moments
from numpy.testing import assert_allclose

from midmetric import (
    DataError,
    PairBatch,
    fit_reference,
    gen_synthetic,
    kl_gaussian,
    mid,
    mid_via_kl,
    mutual_information,
    pmi,
    smd_expectation_decomposition,
)
from midmetric.gaussmi import DEFAULT_EPSILON, EPSILON_PRESETS
from midmetric.harness import SyntheticSpec
from midmetric.matstat import RegularizedGaussian, mahalanobis_sq_rows


def _synthetic_model(dim, rho, n, seed, eps=0.0):
    x, y = gen_synthetic(SyntheticSpec(dim=dim, rho=rho, n=n, seed=seed))
    return fit_reference(x, y, epsilon=eps), x.data, y.data


def test_epsilon_presets():
    assert DEFAULT_EPSILON == 5e-4
    assert EPSILON_PRESETS["default"] == 5e-4
    assert EPSILON_PRESETS["foil"] == 1e-15


class TestFitReference:
    def test_independent_samples_near_zero_mi(self):
        rng = np.random.default_rng(100)
        x = rng.standard_normal((1_000_000, 1))
        y = rng.standard_normal((1_000_000, 1))
        model = fit_reference(x, y, epsilon=0.0)
        assert abs(model.mi) < 1e-2

    def test_duplicated_modality_needs_ridge(self):
        rng = np.random.default_rng(101)
        x = rng.standard_normal((500, 3))
        model = fit_reference(x, x, epsilon=5e-4)
        assert math.isfinite(model.mi)

    def test_single_sample_errors(self):
        with pytest.raises(DataError, match="at least 2"):
            fit_reference([[1.0]], [[1.0]])

    def test_row_count_mismatch_names_both(self):
        with pytest.raises(DataError, match="3.*2|x has 3.*y has 2"):
            fit_reference(np.zeros((3, 2)), np.zeros((2, 2)))

    def test_non_finite_rows_reported(self):
        x = np.zeros((4, 2))
        x[2, 1] = np.nan
        with pytest.raises(DataError, match=r"rows \[2\]"):
            fit_reference(x, np.zeros((4, 2)))

    def test_joint_blocks_equal_marginals(self):
        model, _, _ = _synthetic_model(3, 0.5, 400, 5)
        d = model.dim
        assert np.array_equal(model.z_joint.cov[:d, :d], model.x_marg.cov)
        assert np.array_equal(model.z_joint.cov[d:, d:], model.y_marg.cov)
        assert np.array_equal(
            model.z_joint.mean, np.concatenate([model.x_marg.mean, model.y_marg.mean])
        )

    def test_accepts_embedding_sets_and_arrays(self):
        x, y = gen_synthetic(SyntheticSpec(dim=2, rho=0.4, n=300, seed=6))
        m1 = fit_reference(x, y, epsilon=0.0)
        m2 = fit_reference(x.data, y.data, epsilon=0.0)
        assert m1.mi == m2.mi


class TestMutualInformation:
    def test_independent_blocks_zero(self):
        model = model_from_moments(
            [0.0, 0.0], np.eye(2), [0.0, 0.0], np.eye(2), np.zeros((2, 2))
        )
        assert mutual_information(model) == pytest.approx(0.0, abs=1e-12)

    def test_scalar_correlation_closed_form(self):
        model = model_from_moments([0.0], [[1.0]], [0.0], [[1.0]], [[0.8]])
        assert mutual_information(model) == pytest.approx(-0.5 * math.log(0.36))

    def test_product_over_dimensions(self):
        model = model_from_moments(
            np.zeros(4), np.eye(4), np.zeros(4), np.eye(4), 0.5 * np.eye(4)
        )
        assert mutual_information(model) == pytest.approx(-2.0 * math.log(0.75))

    def test_nonnegative_on_fitted_samples(self):
        for seed in range(5):
            model, _, _ = _synthetic_model(4, 0.3, 500, seed)
            assert model.mi >= -1e-10


class TestPmi:
    def test_at_means_equals_mi(self):
        model, _, _ = _synthetic_model(3, 0.6, 1000, 7)
        val = pmi(model, model.x_marg.mean, model.y_marg.mean)
        assert val == pytest.approx(model.mi, abs=1e-12)

    def test_hand_evaluated_point(self):
        model = model_from_moments([0.0], [[1.0]], [0.0], [[1.0]], [[0.8]])
        got = pmi(model, [1.0], [1.0])
        mi = -0.5 * math.log(0.36)
        smd_z = (1.0 - 0.8 - 0.8 + 1.0) / 0.36  # (1,1) quadratic form
        want = mi + 0.5 * (1.0 + 1.0 - smd_z)
        assert got == pytest.approx(want, rel=1e-12)
        assert got == pytest.approx(0.9553, abs=5e-5)

    def test_modality_swap_symmetric_model(self):
        cov_xy = 0.7 * np.eye(2)
        model = model_from_moments(
            [0.0, 0.0], np.eye(2), [0.0, 0.0], np.eye(2), cov_xy
        )
        a, b = np.array([0.3, -1.2]), np.array([2.0, 0.1])
        assert pmi(model, a, b) == pytest.approx(pmi(model, b, a), rel=1e-12)

    def test_dimension_mismatch(self):
        model = model_from_moments([0.0], [[1.0]], [0.0], [[1.0]], [[0.0]])
        with pytest.raises(DataError):
            pmi(model, [1.0, 2.0], [0.0])


class TestMid:
    def test_reference_batch_reduces_to_mi(self):
        model, x, y = _synthetic_model(4, 0.7, 2000, 17)
        report = mid(model, PairBatch(x_hat=x, y_hat=y))
        assert report.mid == pytest.approx(model.mi, rel=1e-9)

    def test_independent_pairs_closed_form(self):
        # marginal-preserving but independent pairs under a rho=0.8 model
        model = model_from_moments([0.0], [[1.0]], [0.0], [[1.0]], [[0.8]])
        rng = np.random.default_rng(404)
        m = 1_000_000
        batch = PairBatch(
            x_hat=rng.standard_normal((m, 1)), y_hat=rng.standard_normal((m, 1))
        )
        want = -0.5 * math.log(0.36) + 0.5 * (1.0 + 1.0 - 2.0 / 0.36)
        assert mid(model, batch).mid == pytest.approx(want, abs=0.02)

    def test_single_pair_batch_equals_pmi(self):
        model, x, y = _synthetic_model(2, 0.5, 300, 23)
        report = mid(model, PairBatch(x_hat=x[:1], y_hat=y[:1]))
        assert report.mid == pmi(model, x[0], y[0])

    def test_report_internal_consistency(self):
        model, x, y = _synthetic_model(3, 0.4, 500, 29)
        report = mid(model, PairBatch(x_hat=x[:100], y_hat=y[:100]))
        recomposed = report.mi + 0.5 * (
            report.mean_smd_x + report.mean_smd_y - report.mean_smd_z
        )
        assert report.mid == pytest.approx(recomposed, abs=1e-12)
        assert report.mid == pytest.approx(float(np.mean(report.pmi)), abs=1e-12)
        assert report.n_pairs == 100

    def test_empty_batch_errors(self):
        model, _, _ = _synthetic_model(2, 0.5, 300, 23)
        with pytest.raises(DataError, match="empty"):
            mid(model, PairBatch(x_hat=np.zeros((0, 2)), y_hat=np.zeros((0, 2))))

    def test_ragged_batch_errors(self):
        with pytest.raises(DataError, match="ragged"):
            PairBatch(x_hat=np.zeros((3, 2)), y_hat=np.zeros((2, 2)))


class TestSmdDecomposition:
    def test_fitting_samples_give_pure_dimension(self):
        rng = np.random.default_rng(31)
        s = rng.standard_normal((400, 3))
        mu = s.mean(axis=0)
        c = (s - mu).T @ (s - mu) / len(s)
        ref = RegularizedGaussian.from_moments(mu, (c + c.T) / 2, 0.0)
        dec = smd_expectation_decomposition(ref, s)
        assert dec.bias == pytest.approx(0.0, abs=1e-12)
        assert dec.var_trace == pytest.approx(0.0, abs=1e-10)
        assert dec.total == pytest.approx(3.0, rel=1e-12)

    def test_total_matches_direct_mean(self):
        rng = np.random.default_rng(37)
        for eps in (0.0, 5e-4, 0.1):
            d = int(rng.integers(1, 6))
            a = rng.standard_normal((d, d))
            ref = RegularizedGaussian.from_moments(
                rng.standard_normal(d), a @ a.T + 0.2 * np.eye(d), eps
            )
            samples = rng.standard_normal((200, d)) * 2.0 + 0.5
            dec = smd_expectation_decomposition(ref, samples)
            direct = float(mahalanobis_sq_rows(samples, ref).mean())
            assert dec.total == pytest.approx(direct, rel=1e-9)
            assert dec.total == pytest.approx(
                dec.bias + dec.var_trace + dec.dim, abs=1e-12
            )
            assert dec.bias >= 0.0

    def test_shifted_fixture_approaches_five(self):
        ref = RegularizedGaussian.from_moments([0.0], [[1.0]], 0.0)
        rng = np.random.default_rng(41)
        samples = rng.standard_normal((1_000_000, 1)) + 2.0
        dec = smd_expectation_decomposition(ref, samples)
        assert dec.total == pytest.approx(5.0, abs=0.02)

    def test_scaled_fixture_approaches_nine(self):
        ref = RegularizedGaussian.from_moments([0.0], [[1.0]], 0.0)
        rng = np.random.default_rng(43)
        samples = rng.standard_normal((1_000_000, 1)) * 3.0
        dec = smd_expectation_decomposition(ref, samples)
        assert dec.total == pytest.approx(9.0, abs=0.02)


class TestKlGaussian:
    def test_identical_is_zero(self):
        g = RegularizedGaussian.from_moments([1.0, -1.0], np.eye(2) * 2.0, 0.0)
        assert kl_gaussian(g, g) == pytest.approx(0.0, abs=1e-12)

    def test_unit_mean_shift(self):
        p = RegularizedGaussian.from_moments([1.0], [[1.0]], 0.0)
        q = RegularizedGaussian.from_moments([0.0], [[1.0]], 0.0)
        assert kl_gaussian(p, q) == pytest.approx(0.5)

    def test_variance_ratio(self):
        p = RegularizedGaussian.from_moments([0.0], [[4.0]], 0.0)
        q = RegularizedGaussian.from_moments([0.0], [[1.0]], 0.0)
        assert kl_gaussian(p, q) == pytest.approx(0.5 * (3.0 - math.log(4.0)))

    def test_nonnegative_within_slack(self):
        rng = np.random.default_rng(47)
        for _ in range(20):
            d = int(rng.integers(1, 5))
            a = rng.standard_normal((d, d))
            b = rng.standard_normal((d, d))
            p = RegularizedGaussian.from_moments(
                rng.standard_normal(d), a @ a.T + 0.1 * np.eye(d), 0.0
            )
            q = RegularizedGaussian.from_moments(
                rng.standard_normal(d), b @ b.T + 0.1 * np.eye(d), 0.0
            )
            assert kl_gaussian(p, q) >= -1e-10

    def test_dimension_mismatch(self):
        p = RegularizedGaussian.from_moments([0.0], [[1.0]], 0.0)
        q = RegularizedGaussian.from_moments([0.0, 0.0], np.eye(2), 0.0)
        with pytest.raises(DataError):
            kl_gaussian(p, q)


class TestMidViaKl:
    def test_self_evaluation_returns_mi(self):
        model, _, _ = _synthetic_model(3, 0.6, 800, 53)
        assert mid_via_kl(model, model) == pytest.approx(model.mi, abs=1e-10)

    def test_agrees_with_direct_route(self):
        rng = np.random.default_rng(59)
        for eps in (0.0, 5e-4):
            model, x, y = _synthetic_model(3, 0.65, 3000, 61, eps=eps)
            xe = x[:500] + rng.standard_normal((500, 3)) * 0.3
            ye = y[:500]
            direct = mid(model, PairBatch(x_hat=xe, y_hat=ye)).mid
            eval_model = fit_reference(xe, ye, epsilon=eps)
            via_kl = mid_via_kl(model, eval_model)
            assert via_kl == pytest.approx(direct, rel=1e-8)

    def test_same_condition_kills_y_term(self):
        model, x, y = _synthetic_model(2, 0.5, 4000, 67)
        xe = x[:4000] * 0.9  # perturb x only; y identical to the reference fit
        eval_model = fit_reference(xe, y, epsilon=0.0)
        assert kl_gaussian(eval_model.y_marg, model.y_marg) == pytest.approx(
            0.0, abs=1e-10
        )

    def test_epsilon_mismatch_errors(self):
        m0, x, y = _synthetic_model(2, 0.5, 300, 71, eps=0.0)
        m1 = fit_reference(x, y, epsilon=5e-4)
        with pytest.raises(DataError, match="epsilon"):
            mid_via_kl(m0, m1)


def test_affine_invariance_single_instance():
    rng = np.random.default_rng(73)
    model, x, y = _synthetic_model(4, 0.6, 5000, 79)
    batch = PairBatch(x_hat=x[:600], y_hat=y[:600])
    base = mid(model, batch).mid

    a = rng.standard_normal((4, 4)) + 2.0 * np.eye(4)
    b = rng.standard_normal((4, 4)) + 2.0 * np.eye(4)
    shift_a, shift_b = rng.standard_normal(4), rng.standard_normal(4)
    model2 = fit_reference(x @ a.T + shift_a, y @ b.T + shift_b, epsilon=0.0)
    mapped = PairBatch(x_hat=x[:600] @ a.T + shift_a, y_hat=y[:600] @ b.T + shift_b)
    assert mid(model2, mapped).mid == pytest.approx(base, abs=1e-6)


def test_mi_converges_with_sample_count():
    spec_small = SyntheticSpec(dim=2, rho=0.5, n=2000, seed=83)
    spec_big = SyntheticSpec(dim=2, rho=0.5, n=200_000, seed=83)
    oracle = spec_big.oracle_mi
    err_small = abs(
        fit_reference(*gen_synthetic(spec_small), epsilon=0.0).mi - oracle
    )
    err_big = abs(fit_reference(*gen_synthetic(spec_big), epsilon=0.0).mi - oracle)
    assert err_big < err_small
    assert err_big < 5e-3
