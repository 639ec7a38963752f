"""Channel covariances, eigen-spectra and random realizations.

A user channel is described either by scattering clusters (diffuse power,
uniform over an azimuth interval) or by discrete multi-path components.
Both descriptions yield an antenna-domain covariance for a uniform linear
array; realizations are drawn as colored complex Gaussian vectors.

Covariances are immutable and carry a cached eigendecomposition (stable
descending order, PSD-clamped), so they can be shared across concurrent
evaluation tasks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Union

import numpy as np
from scipy.linalg import toeplitz
from scipy.special import roots_legendre

from .angular import AngularSet, angular_bin, bin_index

HERMITIAN_RTOL = 1e-12
PSD_CLAMP_RTOL = 1e-10
RANK_CUTOFF_RTOL = 1e-12


@dataclass(frozen=True)
class ArrayGeometry:
    """Uniform linear array: element count and wavelength-normalized spacing."""

    M: int
    D: float = 0.5

    def __post_init__(self):
        if self.M < 1:
            raise ValueError("antenna count must be >= 1")
        if not 0.0 < self.D <= 0.5:
            raise ValueError("antenna spacing must lie in (0, 0.5]")


@dataclass(frozen=True)
class ClusterSpec:
    """One scattering cluster: azimuth center, half-width spread, relative power."""

    azimuth: float
    spread: float
    weight: float = 1.0

    def __post_init__(self):
        if self.spread <= 0:
            raise ValueError("cluster spread must be positive")
        if not (-math.pi / 2 < self.azimuth - self.spread
                and self.azimuth + self.spread < math.pi / 2):
            raise ValueError("cluster must lie strictly inside (-pi/2, pi/2)")
        if self.weight < 0:
            raise ValueError("cluster weight must be non-negative")

    def sin_range(self) -> tuple[float, float]:
        return (math.sin(self.azimuth - self.spread),
                math.sin(self.azimuth + self.spread))


@dataclass(frozen=True)
class MpcSpec:
    """One discrete multi-path component seen from the array.

    ``power`` is linear scale.  ``phase`` is optional; when absent a fresh
    uniform phase is drawn per realization.  ``delay`` and ``aoa`` are
    carried through I/O but do not affect the covariance.
    """

    power: float
    aod: float
    phase: Optional[float] = None
    delay: float = 0.0
    aoa: Optional[float] = None

    def __post_init__(self):
        if self.power < 0:
            raise ValueError("MPC power must be non-negative")
        if not -math.pi / 2 < self.aod < math.pi / 2:
            raise ValueError("angle of departure must lie in (-pi/2, pi/2)")


@dataclass(frozen=True)
class UserProfile:
    """Per-user channel description: scattering clusters or discrete MPCs."""

    user_id: str
    clusters: Optional[tuple[ClusterSpec, ...]] = None
    mpcs: Optional[tuple[MpcSpec, ...]] = None

    def __post_init__(self):
        if self.clusters is not None:
            object.__setattr__(self, "clusters", tuple(self.clusters))
        if self.mpcs is not None:
            object.__setattr__(self, "mpcs", tuple(self.mpcs))
        has_clusters = bool(self.clusters)
        has_mpcs = bool(self.mpcs)
        if has_clusters == has_mpcs:
            raise ValueError(f"user {self.user_id!r}: provide clusters or MPCs, not both")
        if has_clusters:
            ranges = sorted(c.sin_range() for c in self.clusters)
            for (_, hi), (lo, _) in zip(ranges, ranges[1:]):
                if lo < hi - 1e-12:
                    raise ValueError(
                        f"user {self.user_id!r}: cluster intervals overlap in the "
                        "sin-angle domain"
                    )

    @property
    def kind(self) -> str:
        return "clusters" if self.clusters else "mpcs"


@dataclass(frozen=True, eq=False)
class Covariance:
    """Hermitian PSD antenna covariance with cached eigendecomposition.

    Eigenpairs are sorted descending (stable, so exact ties keep their
    canonical order); eigenvalues below RANK_CUTOFF_RTOL * max are dropped
    and define the stored rank.
    """

    matrix: np.ndarray
    eigenvectors: np.ndarray
    eigenvalues: np.ndarray
    rank: int

    @classmethod
    def from_matrix(cls, matrix: np.ndarray) -> "Covariance":
        matrix = np.asarray(matrix, dtype=complex)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise ValueError("covariance must be a square matrix")
        scale = np.linalg.norm(matrix)
        herm_err = np.linalg.norm(matrix - matrix.conj().T)
        if scale > 0 and herm_err > HERMITIAN_RTOL * scale * matrix.shape[0]:
            raise ValueError("matrix is not Hermitian within tolerance")
        sym = (matrix + matrix.conj().T) / 2.0
        vals, vecs = np.linalg.eigh(sym)
        order = np.argsort(-vals, kind="stable")
        vals, vecs = vals[order], vecs[:, order]
        top = vals[0] if vals.size else 0.0
        if top > 0 and vals[-1] < -PSD_CLAMP_RTOL * top:
            raise ValueError("matrix is not positive semidefinite within tolerance")
        vals = np.maximum(vals, 0.0)
        rank = int(np.count_nonzero(vals > RANK_CUTOFF_RTOL * top)) if top > 0 else 0
        obj = cls(
            matrix=matrix,
            eigenvectors=np.ascontiguousarray(vecs[:, :rank]),
            eigenvalues=np.ascontiguousarray(vals[:rank]),
            rank=rank,
        )
        for arr in (obj.matrix, obj.eigenvectors, obj.eigenvalues):
            arr.setflags(write=False)
        return obj

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def scaled(self, factor: float) -> "Covariance":
        return Covariance.from_matrix(self.matrix * factor)


@dataclass(frozen=True)
class EnergyFraction:
    """Effective rank = fewest leading eigenvalues capturing this energy share."""

    eta: float = 0.95

    def __post_init__(self):
        if not 0.0 < self.eta <= 1.0:
            raise ValueError("energy fraction must lie in (0, 1]")


@dataclass(frozen=True)
class RelativeThreshold:
    """Effective rank = eigenvalues at least this fraction of the largest."""

    gamma: float = 0.01

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("relative threshold must lie in (0, 1)")


RankPolicy = Union[EnergyFraction, RelativeThreshold]


def array_response(geometry: ArrayGeometry, theta: float) -> np.ndarray:
    """Steering vector of the array for a planar wave at azimuth theta."""
    m = np.arange(geometry.M)
    return np.exp(-2j * np.pi * geometry.D * m * math.sin(theta))


@lru_cache(maxsize=32)
def _gl_nodes(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = roots_legendre(n)
    return x, w


def _cluster_lag_integrals(geometry: ArrayGeometry, cluster: ClusterSpec) -> np.ndarray:
    """(1/2*spread)-normalized integral of exp(-j*2*pi*D*lag*sin(a)) per lag.

    The integrand oscillates about D*lag*(sin hi - sin lo) times over the
    cluster, so the Gauss-Legendre node count scales with D*M*span; 16
    nodes per oscillation keeps the error well below 1e-9.
    """
    lo = cluster.azimuth - cluster.spread
    hi = cluster.azimuth + cluster.spread
    span = math.sin(hi) - math.sin(lo)
    n = max(128, 16 * math.ceil(geometry.D * geometry.M * span * math.pi))
    x, w = _gl_nodes(n)
    alpha = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
    weights = w * 0.5 * (hi - lo) / (2.0 * cluster.spread)
    lags = np.arange(geometry.M)
    phases = np.exp(-2j * np.pi * geometry.D * np.outer(lags, np.sin(alpha)))
    return phases @ weights


def covariance_from_clusters(geometry: ArrayGeometry, profile: UserProfile) -> Covariance:
    """Weighted multi-cluster covariance; Hermitian Toeplitz with unit diagonal.

    Entry (m, n) depends only on the lag m - n (array stationarity), so one
    quadrature per lag per cluster suffices.  Cluster weights are
    normalized to sum to one.
    """
    if not profile.clusters:
        raise ValueError(f"user {profile.user_id!r} has no cluster description")
    total = sum(c.weight for c in profile.clusters)
    if total <= 0:
        raise ValueError(f"user {profile.user_id!r}: cluster weights sum to zero")
    first = np.zeros(geometry.M, dtype=complex)
    for c in profile.clusters:
        first += (c.weight / total) * _cluster_lag_integrals(geometry, c)
    matrix = toeplitz(first, first.conj())
    return Covariance.from_matrix(matrix)


def covariance_from_mpcs(geometry: ArrayGeometry, profile: UserProfile) -> Covariance:
    """Sum of rank-one steering outer products weighted by MPC powers."""
    if not profile.mpcs:
        raise ValueError(f"user {profile.user_id!r} has no MPC description")
    matrix = np.zeros((geometry.M, geometry.M), dtype=complex)
    for p in profile.mpcs:
        a = array_response(geometry, p.aod)
        matrix += p.power * np.outer(a, a.conj())
    return Covariance.from_matrix(matrix)


def covariance_of(geometry: ArrayGeometry, profile: UserProfile) -> Covariance:
    if profile.clusters:
        return covariance_from_clusters(geometry, profile)
    return covariance_from_mpcs(geometry, profile)


def sample_channel(cov: Covariance, rng: np.random.Generator) -> np.ndarray:
    """One channel realization h with E[h h^H] equal to the covariance."""
    return sample_channels(cov, 1, rng)[:, 0]


def sample_channels(cov: Covariance, count: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``count`` i.i.d. realizations as columns of an M x count array."""
    r = cov.rank
    if r == 0:
        return np.zeros((cov.dim, count), dtype=complex)
    w = rng.standard_normal((r, count)) + 1j * rng.standard_normal((r, count))
    w /= math.sqrt(2.0)
    return cov.eigenvectors @ (np.sqrt(cov.eigenvalues)[:, None] * w)


def cluster_support_interval(geometry: ArrayGeometry, cluster: ClusterSpec) -> tuple[float, float]:
    """Spatial-frequency interval occupied by one cluster."""
    lo, hi = cluster.sin_range()
    return (-geometry.D * hi, -geometry.D * lo)


def spectral_support(geometry: ArrayGeometry, profile: UserProfile) -> AngularSet:
    """Support of the large-array eigenvalue spectrum of the user covariance.

    Clusters map to spatial-frequency intervals; discrete MPCs occupy the
    width-1/M bin containing their frequency.
    """
    if profile.clusters:
        return AngularSet(cluster_support_interval(geometry, c) for c in profile.clusters)
    bins = {bin_index(-geometry.D * math.sin(p.aod), geometry.M) for p in profile.mpcs}
    return AngularSet(angular_bin(i, geometry.M) for i in sorted(bins))


def spectral_density_integral(
    geometry: ArrayGeometry, profile: UserProfile, subset: AngularSet
) -> float:
    """Integral of the user's eigenvalue spectrum over a frequency set.

    For clusters the density has the arcsine antiderivative, evaluated in
    closed form on each piece of the overlap; it integrates to 1 over the
    full support.  For MPCs each component contributes its whole power
    when the center of its bin lies in the set.
    """
    if profile.clusters:
        total = sum(c.weight for c in profile.clusters)
        d = geometry.D
        value = 0.0
        for c in profile.clusters:
            own = AngularSet.from_interval(*cluster_support_interval(geometry, c))
            scale = (c.weight / total) / (2.0 * c.spread)
            for lo, hi in subset.intersect(own).pieces:
                value += scale * (
                    math.asin(min(1.0, max(-1.0, hi / d)))
                    - math.asin(min(1.0, max(-1.0, lo / d)))
                )
        return value
    value = 0.0
    for p in profile.mpcs:
        i = bin_index(-geometry.D * math.sin(p.aod), geometry.M)
        if subset.contains(i / geometry.M - 0.5):
            value += p.power
    return value


def effective_rank(cov: Covariance, policy: RankPolicy) -> int:
    """Number of dominant eigenmodes retained under the given policy."""
    vals = cov.eigenvalues
    if vals.size == 0:
        return 0
    if isinstance(policy, EnergyFraction):
        cum = np.cumsum(vals)
        target = policy.eta * cum[-1]
        return int(np.searchsorted(cum, target * (1.0 - 1e-12)) + 1)
    if isinstance(policy, RelativeThreshold):
        return int(np.count_nonzero(vals >= policy.gamma * vals[0]))
    raise TypeError(f"unknown rank policy: {policy!r}")
