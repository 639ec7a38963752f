"""Two-stage downlink precoders.

Stage one is a statistics-only pre-beamformer per group: an orthonormal
basis that nulls the dominant eigenmodes of every other group's
covariance, followed by eigen-beamforming of the own covariance projected
onto that complement.  Stage two is per-group zero forcing on the
instantaneous effective channel.  Degenerate variants cover
covariance-only operation (single-column beamformers, no instantaneous
CSIT) and full-eigenmode transmission for orthogonal-resource serving.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .channel import Covariance, EnergyFraction, RankPolicy, effective_rank

NULLING_RTOL = 1e-8
SEMI_UNITARY_TOL = 1e-10
MAX_CONDITION = 1e12


class BdDimensionError(ValueError):
    """Raised when a group's nulling complement is too small for its width.

    ``shortfalls`` lists (group label, available dimensions, requested
    width); the caller must drop groups or shrink widths.
    """

    def __init__(self, shortfalls):
        self.shortfalls = list(shortfalls)
        detail = "; ".join(
            f"group {g}: complement dimension {avail} < requested width {want}"
            for g, avail, want in self.shortfalls
        )
        super().__init__(f"block diagonalization infeasible: {detail}")


@dataclass(frozen=True, eq=False)
class PreBeamformer:
    """Semi-unitary M x b projection serving one group."""

    matrix: np.ndarray
    group_id: str = ""

    def __post_init__(self):
        b = self.matrix
        gram = b.conj().T @ b
        if np.linalg.norm(gram - np.eye(b.shape[1])) > SEMI_UNITARY_TOL * max(1, b.shape[1]):
            raise ValueError(f"pre-beamformer for group {self.group_id!r} is not semi-unitary")

    @property
    def width(self) -> int:
        return self.matrix.shape[1]


@dataclass(frozen=True, eq=False)
class GroupPrecoder:
    """Inner precoder of one group: b x K matrix plus its diagonal gain.

    ``gain`` is the common power-normalization scalar of the zero-forcing
    construction; the effective channel times the precoder equals
    gain * identity.
    """

    matrix: np.ndarray
    gain: float

    @property
    def streams(self) -> int:
        return self.matrix.shape[1]


@dataclass(frozen=True, eq=False)
class PrecoderSet:
    """Per-group (pre-beamformer, inner precoder) pairs and the power budget."""

    entries: tuple[tuple[PreBeamformer, GroupPrecoder], ...]
    total_power: float

    def __post_init__(self):
        radiated = sum(
            float(np.linalg.norm(b.matrix @ p.matrix) ** 2) for b, p in self.entries
        )
        if self.total_power > 0 and abs(radiated - self.total_power) > 1e-8 * self.total_power:
            raise ValueError(
                f"radiated power {radiated:.6g} does not match budget {self.total_power:.6g}"
            )

    @property
    def total_streams(self) -> int:
        return sum(p.streams for _, p in self.entries)


def dominant_eigenvectors(cov: Covariance, policy: RankPolicy) -> np.ndarray:
    """The covariance's leading eigenvectors under the rank policy."""
    return cov.eigenvectors[:, : effective_rank(cov, policy)]


def orthogonal_complement(stack: np.ndarray, dim: int) -> np.ndarray:
    """Orthonormal basis of the orthogonal complement of the columns of stack.

    Uses the full unitary factor of the SVD; directions with singular value
    below NULLING_RTOL * max join the dimensional complement, which keeps
    the basis robust to near-rank-deficient stacks.
    """
    if stack.shape[1] == 0:
        return np.eye(dim, dtype=complex)
    u, s, _ = np.linalg.svd(stack, full_matrices=True)
    rank = int(np.count_nonzero(s > NULLING_RTOL * s[0])) if s.size else 0
    return u[:, rank:]


def approximate_bd(
    covariances: Sequence[Covariance],
    rank_policy: RankPolicy = EnergyFraction(0.95),
    widths: Union[int, Sequence[Optional[int]], None] = None,
    max_widths: Optional[Sequence[int]] = None,
    group_ids: Optional[Sequence[str]] = None,
) -> list[PreBeamformer]:
    """Pre-beamformers that null the other groups' dominant eigenmodes.

    For each group: stack the other groups' dominant eigenvectors, take an
    orthonormal basis of the stack's orthogonal complement, eigendecompose
    the own covariance projected onto it, and keep the top ``b`` projected
    eigenmodes.  A single group degenerates to plain eigen-beamforming.

    ``widths`` fixes b per group (raising BdDimensionError when a
    complement is too small); when omitted, b defaults to the effective
    rank of the projected covariance, optionally capped by ``max_widths``.
    The output is exact-nulling: the retained eigenmodes of every other
    group see the beamformer as numerically zero.
    """
    n = len(covariances)
    if n == 0:
        raise ValueError("at least one group is required")
    ids = [str(g) for g in (group_ids or range(n))]
    if isinstance(widths, int):
        widths = [widths] * n
    dim = covariances[0].dim
    stars = [dominant_eigenvectors(c, rank_policy) for c in covariances]

    beams: list[PreBeamformer] = []
    shortfalls = []
    for g, cov in enumerate(covariances):
        others = [stars[j] for j in range(n) if j != g]
        stack = np.hstack(others) if others else np.empty((dim, 0), dtype=complex)
        complement = orthogonal_complement(stack, dim)
        available = complement.shape[1]
        requested = widths[g] if widths is not None else None
        if requested is not None and requested > available:
            shortfalls.append((ids[g], available, requested))
            continue
        if available == 0:
            shortfalls.append((ids[g], 0, 1))
            continue
        projected = complement.conj().T @ cov.matrix @ complement
        proj_cov = Covariance.from_matrix(projected)
        b = requested
        if b is None:
            b = max(1, effective_rank(proj_cov, rank_policy))
            if max_widths is not None:
                b = min(b, max_widths[g])
            b = min(b, available, max(proj_cov.rank, 1))
        if b < 1:
            raise ValueError(f"group {ids[g]}: width must be at least 1")
        if b <= proj_cov.rank:
            basis = proj_cov.eigenvectors[:, :b]
        else:
            # explicit width beyond the projected rank: extend with the
            # null eigenmodes of the projected matrix (they carry no
            # signal but keep the basis orthonormal)
            sym = (projected + projected.conj().T) / 2.0
            vals, vecs = np.linalg.eigh(sym)
            order = np.argsort(-vals, kind="stable")
            basis = vecs[:, order[:b]]
        beams.append(PreBeamformer(matrix=complement @ basis, group_id=ids[g]))
    if shortfalls:
        raise BdDimensionError(shortfalls)
    return beams


def zero_forcing(
    effective_channel: np.ndarray,
    allocated_power: float,
    group: str = "",
) -> GroupPrecoder:
    """Zero-forcing inner precoder on the effective channel, power normalized.

    The precoder is the right pseudo-inverse direction of the effective
    channel scaled by a single per-group gain so the transmitted power
    equals the allocation.  Diagonalization then holds by construction:
    effective_channel^H @ matrix = gain * identity.
    """
    h = np.asarray(effective_channel, dtype=complex)
    if h.ndim != 2:
        raise ValueError("effective channel must be a matrix")
    b, k = h.shape
    if k > b:
        raise ValueError(
            f"group {group!r}: {k} streams exceed the beamformer width {b}"
        )
    if allocated_power < 0:
        raise ValueError("allocated power must be non-negative")
    s = np.linalg.svd(h, compute_uv=False)
    if s.size == 0 or s[-1] * MAX_CONDITION <= s[0]:
        raise ValueError(
            f"group {group!r}: effective channel is rank deficient "
            "(users with numerically identical instantaneous channels)"
        )
    gram = h.conj().T @ h
    direction = h @ np.linalg.solve(gram, np.eye(k, dtype=complex))
    gain = float(np.sqrt(allocated_power / np.trace(np.linalg.inv(gram)).real))
    return GroupPrecoder(matrix=gain * direction, gain=gain)


def covariance_beamformer(projected_cov: Covariance, group_id: str = "") -> PreBeamformer:
    """Single-column beamformer from second-order statistics alone.

    Takes the dominant eigenvector of the (already projected) covariance;
    serves exactly one user per group with no instantaneous CSIT.  Exact
    eigenvalue ties resolve to the earliest canonical direction because
    the covariance eigendecomposition is stably ordered.
    """
    if projected_cov.rank < 1:
        raise ValueError(f"group {group_id!r}: projected covariance has rank zero")
    return PreBeamformer(matrix=projected_cov.eigenvectors[:, :1], group_id=group_id)


def full_eigen_beamformer(cov: Covariance, width: int, group_id: str = "") -> PreBeamformer:
    """Top-``width`` eigenmodes of the group's own covariance, no nulling."""
    if not 1 <= width <= cov.rank:
        raise ValueError(
            f"group {group_id!r}: width {width} outside [1, rank {cov.rank}]"
        )
    return PreBeamformer(matrix=cov.eigenvectors[:, :width], group_id=group_id)
