import math

import numpy as np
import pytest
from scipy.integrate import quad

from jsdm.angular import AngularSet
from jsdm.channel import (
    ArrayGeometry,
    ClusterSpec,
    Covariance,
    EnergyFraction,
    MpcSpec,
    RelativeThreshold,
    UserProfile,
    array_response,
    covariance_from_clusters,
    covariance_from_mpcs,
    effective_rank,
    sample_channel,
    sample_channels,
    spectral_density_integral,
    spectral_support,
)

DEG = math.pi / 180.0

# Frozen values from the adaptive-quadrature oracle (scipy.integrate.quad on
# real/imag parts, epsabs=1e-13) for a single cluster at 0 deg, 15 deg spread,
# half-wavelength spacing.
ORACLE_LAG_ENTRIES = {
    1: 0.8924264396539197 + 0.0j,
    57: 0.015457898683240986 + 0.0j,
    399: -0.002358985471927521 + 0.0j,
}


@pytest.fixture(scope="module")
def single_cluster_m400():
    geom = ArrayGeometry(400, 0.5)
    prof = UserProfile("u", clusters=(ClusterSpec(0.0, 15 * DEG),))
    return geom, prof, covariance_from_clusters(geom, prof)


class TestArrayResponse:
    def test_broadside_is_all_ones(self):
        a = array_response(ArrayGeometry(8, 0.5), 0.0)
        assert np.allclose(a, np.ones(8))

    def test_endfire_alternates(self):
        a = array_response(ArrayGeometry(2, 0.5), math.pi / 2)
        assert np.allclose(a, [1.0, -1.0], atol=1e-12)

    def test_quarter_spacing_thirty_degrees(self):
        a = array_response(ArrayGeometry(4, 0.25), math.pi / 6)
        expected = np.exp(-1j * np.pi / 4 * np.arange(4))
        assert np.allclose(a, expected, atol=1e-12)

    def test_unit_modulus(self):
        a = array_response(ArrayGeometry(16, 0.37), 0.7)
        assert np.allclose(np.abs(a), 1.0)


class TestClusterCovariance:
    def test_unit_diagonal(self):
        geom = ArrayGeometry(32, 0.5)
        prof = UserProfile(
            "u",
            clusters=(ClusterSpec(-0.4, 0.1, 2.0), ClusterSpec(0.6, 0.2, 1.0)),
        )
        cov = covariance_from_clusters(geom, prof)
        assert np.allclose(np.diag(cov.matrix), 1.0, atol=1e-12)

    def test_toeplitz_structure(self):
        geom = ArrayGeometry(16, 0.5)
        prof = UserProfile("u", clusters=(ClusterSpec(0.3, 0.15),))
        r = covariance_from_clusters(geom, prof).matrix
        assert np.allclose(r[1:, 1:], r[:-1, :-1], atol=1e-12)

    def test_point_cluster_limit_is_rank_one(self):
        geom = ArrayGeometry(16, 0.5)
        theta = 0.3
        cov = covariance_from_clusters(
            geom, UserProfile("u", clusters=(ClusterSpec(theta, 1e-7),))
        )
        a = array_response(geom, theta)
        assert np.linalg.norm(cov.matrix - np.outer(a, a.conj())) / geom.M < 1e-6
        assert cov.eigenvalues[0] == pytest.approx(geom.M, rel=1e-6)

    def test_against_adaptive_quadrature_oracle(self, single_cluster_m400):
        _, _, cov = single_cluster_m400
        for lag, expected in ORACLE_LAG_ENTRIES.items():
            assert abs(cov.matrix[lag, 0] - expected) <= 1e-9

    def test_overlapping_clusters_rejected(self):
        with pytest.raises(ValueError, match="overlap"):
            UserProfile("u", clusters=(ClusterSpec(0.0, 0.2), ClusterSpec(0.1, 0.2)))

    def test_nonpositive_spread_rejected(self):
        with pytest.raises(ValueError):
            ClusterSpec(0.0, 0.0)


class TestMpcCovariance:
    def test_single_broadside_mpc(self):
        geom = ArrayGeometry(6, 0.5)
        cov = covariance_from_mpcs(geom, UserProfile("u", mpcs=(MpcSpec(1.0, 0.0),)))
        assert np.allclose(cov.matrix, np.ones((6, 6)))
        assert cov.rank == 1

    def test_orthogonal_pair_eigenvalues(self):
        # sin spaced by 1/(D*M) makes the steering vectors exactly orthogonal
        geom = ArrayGeometry(8, 0.5)
        t1, t2 = 0.0, math.asin(0.25)
        a1, a2 = array_response(geom, t1), array_response(geom, t2)
        assert abs(np.vdot(a1, a2)) < 1e-10
        prof = UserProfile("u", mpcs=(MpcSpec(1.0, t1), MpcSpec(1.0, t2)))
        cov = covariance_from_mpcs(geom, prof)
        assert cov.rank == 2
        assert np.allclose(cov.eigenvalues, [8.0, 8.0])

    def test_power_ratio_on_orthogonal_pair(self):
        geom = ArrayGeometry(8, 0.5)
        prof = UserProfile(
            "u", mpcs=(MpcSpec(2.0, 0.0), MpcSpec(1.0, math.asin(0.25)))
        )
        cov = covariance_from_mpcs(geom, prof)
        assert cov.eigenvalues[0] / cov.eigenvalues[1] == pytest.approx(2.0)

    def test_trace_is_antennas_times_total_power(self):
        geom = ArrayGeometry(12, 0.4)
        prof = UserProfile("u", mpcs=(MpcSpec(0.3, 0.2), MpcSpec(0.9, -0.7)))
        cov = covariance_from_mpcs(geom, prof)
        assert np.trace(cov.matrix).real == pytest.approx(12 * 1.2)


class TestCovarianceValidation:
    def test_rejects_non_hermitian(self):
        m = np.array([[1.0, 2.0], [0.0, 1.0]], dtype=complex)
        with pytest.raises(ValueError, match="Hermitian"):
            Covariance.from_matrix(m)

    def test_rejects_indefinite(self):
        m = np.diag([1.0, -0.5]).astype(complex)
        with pytest.raises(ValueError, match="semidefinite"):
            Covariance.from_matrix(m)

    def test_eigenvector_orthonormality(self, single_cluster_m400):
        _, _, cov = single_cluster_m400
        u = cov.eigenvectors
        assert np.linalg.norm(u.conj().T @ u - np.eye(cov.rank)) < 1e-10

    def test_matrices_are_read_only(self):
        cov = Covariance.from_matrix(np.eye(3, dtype=complex))
        with pytest.raises(ValueError):
            cov.matrix[0, 0] = 5.0


class TestSampling:
    def test_rank_one_draws_are_collinear(self):
        geom = ArrayGeometry(8, 0.5)
        a = array_response(geom, 0.4)
        cov = Covariance.from_matrix(np.outer(a, a.conj()))
        h = sample_channel(cov, np.random.default_rng(3))
        corr = abs(np.vdot(h, a)) / (np.linalg.norm(h) * np.linalg.norm(a))
        assert corr == pytest.approx(1.0, abs=1e-12)

    def test_empirical_covariance_error_shrinks(self):
        geom = ArrayGeometry(8, 0.5)
        prof = UserProfile("u", clusters=(ClusterSpec(0.2, 0.3),))
        cov = covariance_from_clusters(geom, prof)
        errs = []
        for n in (1000, 16000):
            draws = sample_channels(cov, n, np.random.default_rng(7))
            emp = draws @ draws.conj().T / n
            errs.append(np.linalg.norm(emp - cov.matrix) / np.linalg.norm(cov.matrix))
        assert errs[1] < errs[0]

    def test_fixed_seed_reproduces(self):
        cov = Covariance.from_matrix(np.eye(5, dtype=complex))
        h1 = sample_channel(cov, np.random.default_rng(11))
        h2 = sample_channel(cov, np.random.default_rng(11))
        assert np.array_equal(h1, h2)


class TestSpectralSupport:
    def test_single_cluster_interval(self):
        geom = ArrayGeometry(64, 0.5)
        prof = UserProfile("u", clusters=(ClusterSpec(0.0, 15 * DEG),))
        support = spectral_support(geom, prof)
        edge = 0.5 * math.sin(15 * DEG)  # 0.12940952255126037
        assert len(support.pieces) == 1
        lo, hi = support.pieces[0]
        assert lo == pytest.approx(-0.12940952255126037, abs=1e-15)
        assert hi == pytest.approx(0.12940952255126037, abs=1e-15)
        assert edge == pytest.approx(0.12940952255126037)

    def test_broadside_mpc_center_bin(self):
        geom = ArrayGeometry(400, 0.5)
        prof = UserProfile("u", mpcs=(MpcSpec(1.0, 0.0),))
        support = spectral_support(geom, prof)
        assert len(support.pieces) == 1
        assert support.pieces[0] == pytest.approx((-0.00125, 0.00125), abs=1e-15)

    def test_two_mpcs_same_bin_union_idempotent(self):
        geom = ArrayGeometry(100, 0.5)
        prof = UserProfile("u", mpcs=(MpcSpec(1.0, 1e-4), MpcSpec(2.0, -1e-4)))
        support = spectral_support(geom, prof)
        assert support.measure == pytest.approx(1 / 100)


class TestSpectralDensityIntegral:
    def test_empty_set(self):
        geom = ArrayGeometry(32, 0.5)
        prof = UserProfile("u", clusters=(ClusterSpec(0.1, 0.2),))
        assert spectral_density_integral(geom, prof, AngularSet.empty()) == 0.0

    def test_full_support_is_unit(self):
        geom = ArrayGeometry(32, 0.5)
        prof = UserProfile(
            "u", clusters=(ClusterSpec(-0.5, 0.1, 0.7), ClusterSpec(0.5, 0.2, 0.3))
        )
        support = spectral_support(geom, prof)
        assert spectral_density_integral(geom, prof, support) == pytest.approx(1.0)

    def test_half_cluster_against_quadrature(self):
        geom = ArrayGeometry(32, 0.5)
        delta = 15 * DEG
        prof = UserProfile("u", clusters=(ClusterSpec(0.0, delta),))
        upper = AngularSet.from_interval(0.0, 0.5 * math.sin(delta))
        got = spectral_density_integral(geom, prof, upper)
        # Independent oracle: numeric quadrature of the arcsine density.
        oracle = quad(
            lambda f: 1.0 / (2 * delta * math.sqrt(0.25 - f * f)),
            0.0,
            0.5 * math.sin(delta),
            epsabs=1e-13,
        )[0]
        assert got == pytest.approx(0.5, abs=1e-12)
        assert abs(got - oracle) <= 1e-10

    def test_additive_over_disjoint_sets(self):
        geom = ArrayGeometry(32, 0.5)
        prof = UserProfile("u", clusters=(ClusterSpec(0.0, 0.3),))
        a = AngularSet.from_interval(-0.1, 0.0)
        b = AngularSet.from_interval(0.02, 0.09)
        fa = spectral_density_integral(geom, prof, a)
        fb = spectral_density_integral(geom, prof, b)
        fab = spectral_density_integral(geom, prof, a.union(b))
        assert fab == pytest.approx(fa + fb, abs=1e-12)
        assert fa <= spectral_density_integral(geom, prof, a.union(b)) + 1e-12

    def test_mpc_power_attribution(self):
        geom = ArrayGeometry(50, 0.5)
        prof = UserProfile("u", mpcs=(MpcSpec(0.25, 0.0), MpcSpec(0.75, 0.9)))
        support_all = spectral_support(geom, prof)
        assert spectral_density_integral(geom, prof, support_all) == pytest.approx(1.0)
        center_only = AngularSet.from_interval(-0.01, 0.01)
        assert spectral_density_integral(geom, prof, center_only) == pytest.approx(0.25)


class TestEffectiveRank:
    def test_rank_one(self):
        cov = Covariance.from_matrix(np.outer([1, 1j], [1, -1j]).astype(complex))
        assert effective_rank(cov, EnergyFraction(0.5)) == 1
        assert effective_rank(cov, EnergyFraction(1.0)) == 1

    def test_identity_energy_fraction(self):
        cov = Covariance.from_matrix(np.eye(4, dtype=complex))
        assert effective_rank(cov, EnergyFraction(0.75)) == 3

    def test_relative_threshold(self):
        cov = Covariance.from_matrix(np.diag([1.0, 0.5, 0.005]).astype(complex))
        assert effective_rank(cov, RelativeThreshold(0.01)) == 2

    def test_single_cluster_matches_support_share(self, single_cluster_m400):
        _, _, cov = single_cluster_m400
        r = effective_rank(cov, EnergyFraction(0.95))
        expected = 400 * 2 * 0.5 * math.sin(15 * DEG)  # about 103.5
        assert abs(r - expected) / expected < 0.15

    def test_non_negligible_count_converges_to_support_measure(self):
        # large-array limit: the fraction of non-negligible eigenvalues
        # approaches the support measure with shrinking error
        delta = 15 * DEG
        target = 2 * 0.5 * math.sin(delta)
        prof = UserProfile("u", clusters=(ClusterSpec(0.0, delta),))
        errors = []
        for m in (100, 200, 400):
            cov = covariance_from_clusters(ArrayGeometry(m, 0.5), prof)
            errors.append(abs(effective_rank(cov, RelativeThreshold(0.01)) / m - target))
        assert all(b < a for a, b in zip(errors, errors[1:]))
        assert errors[-1] <= 0.01


class TestProfileValidation:
    def test_requires_exactly_one_model(self):
        with pytest.raises(ValueError):
            UserProfile("u")
        with pytest.raises(ValueError):
            UserProfile("u", clusters=(ClusterSpec(0, 0.1),), mpcs=(MpcSpec(1, 0),))

    def test_geometry_bounds(self):
        with pytest.raises(ValueError):
            ArrayGeometry(0, 0.5)
        with pytest.raises(ValueError):
            ArrayGeometry(4, 0.6)
