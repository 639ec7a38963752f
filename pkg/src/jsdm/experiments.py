"""Randomized scenario families for selection and mode-comparison studies.

Three families, all built on a shared pool of pairwise-disjoint scattering
clusters so that users (or groups) can overlap on common scatterers:

* groups with one private cluster each plus randomly shared common
  clusters, sized so each group can multiplex as many users as its
  private cluster supports;
* isolated single-antenna users, each drawing a few clusters from the
  pool (heavy overlap when users outnumber clusters);
* isolated users with sparse discrete multi-path components at random
  departure angles.

Generators are deterministic given a seed.
"""

from __future__ import annotations

import math
from typing import Optional

import numpy as np

from .channel import ArrayGeometry, ClusterSpec, MpcSpec, UserProfile
from .evaluation import EvalConfig, Group, Scenario

DEG = math.pi / 180.0


def disjoint_cluster_pool(
    rng: np.random.Generator,
    count: int,
    spread_deg: tuple[float, float] = (2.0, 6.0),
    azimuth_limit_deg: float = 75.0,
    max_attempts: int = 10_000,
) -> list[ClusterSpec]:
    """Random clusters with pairwise-disjoint sin-angle intervals."""
    clusters: list[ClusterSpec] = []
    taken: list[tuple[float, float]] = []
    attempts = 0
    while len(clusters) < count:
        attempts += 1
        if attempts > max_attempts:
            raise RuntimeError("could not place disjoint clusters; relax the parameters")
        azimuth = rng.uniform(-azimuth_limit_deg, azimuth_limit_deg) * DEG
        spread = rng.uniform(*spread_deg) * DEG
        lo, hi = math.sin(azimuth - spread), math.sin(azimuth + spread)
        if any(lo < t_hi and t_lo < hi for t_lo, t_hi in taken):
            continue
        taken.append((lo, hi))
        clusters.append(ClusterSpec(azimuth, spread))
    return clusters


def multicluster_user_scenario(
    seed: int,
    n_users: int = 20,
    pool_size: int = 14,
    max_clusters: int = 5,
    geometry: ArrayGeometry = ArrayGeometry(400, 0.5),
    config: Optional[EvalConfig] = None,
) -> Scenario:
    """Isolated users sharing clusters from a common pool.

    Every user draws 1..max_clusters distinct pool clusters, so common
    scatterers couple many users and limit how many can be served at once.
    """
    rng = np.random.default_rng(seed)
    pool = disjoint_cluster_pool(rng, pool_size)
    groups = []
    for u in range(n_users):
        take = int(rng.integers(1, max_clusters + 1))
        chosen = rng.choice(pool_size, size=min(take, pool_size), replace=False)
        profile = UserProfile(
            f"u{u + 1}", clusters=tuple(pool[int(c)] for c in sorted(chosen))
        )
        groups.append(Group(f"u{u + 1}", profile, 1))
    cfg = config or EvalConfig(
        grid_db=(10.0,), trials=4, seed=seed, mode="covariance", algorithm="greedy2",
        epsilon=1e-3,
    )
    return Scenario(f"multicluster-users-{seed}", geometry, tuple(groups), cfg)


def multicluster_group_scenario(
    seed: int,
    n_groups: int = 5,
    pool_size: int = 10,
    geometry: ArrayGeometry = ArrayGeometry(400, 0.5),
    config: Optional[EvalConfig] = None,
) -> Scenario:
    """User groups with a private cluster each plus shared common clusters.

    The first ``n_groups`` pool clusters are private, one per group; each
    remaining cluster joins every group independently with probability
    one half (redrawn if it joins none).  Group sizes follow the
    large-array rank of the private cluster, so every group can fill its
    own spatial dimensions.
    """
    if n_groups >= pool_size:
        raise ValueError("pool must be larger than the group count")
    rng = np.random.default_rng(seed)
    pool = disjoint_cluster_pool(rng, pool_size)
    members: list[list[ClusterSpec]] = [[pool[g]] for g in range(n_groups)]
    for cluster in pool[n_groups:]:
        joined = [g for g in range(n_groups) if rng.uniform() < 0.5]
        if not joined:
            joined = [int(rng.integers(0, n_groups))]
        for g in joined:
            members[g].append(cluster)
    groups = []
    for g in range(n_groups):
        private = pool[g]
        lo, hi = private.sin_range()
        users = max(1, round(geometry.M * geometry.D * (hi - lo)))
        profile = UserProfile(
            f"g{g + 1}",
            clusters=tuple(sorted(members[g], key=lambda c: c.azimuth)),
        )
        groups.append(Group(f"g{g + 1}", profile, users))
    cfg = config or EvalConfig(
        grid_db=tuple(range(-10, 31, 5)), trials=20, seed=seed,
        mode="multiplexing", algorithm="greedy2", epsilon=0.01,
    )
    return Scenario(f"multicluster-groups-{seed}", geometry, tuple(groups), cfg)


def sparse_mpc_scenario(
    seed: int,
    n_users: int,
    max_mpcs: int = 10,
    geometry: ArrayGeometry = ArrayGeometry(400, 0.5),
    power_spread_db: float = 20.0,
    config: Optional[EvalConfig] = None,
) -> Scenario:
    """Isolated users with a few discrete MPCs at random departure angles.

    Emulates highly directional propagation: each user gets 1..max_mpcs
    components with log-uniform powers (normalized per user) and angles
    uniform in (-80, 80) degrees.
    """
    rng = np.random.default_rng(seed)
    groups = []
    for u in range(n_users):
        count = int(rng.integers(1, max_mpcs + 1))
        gains_db = rng.uniform(-power_spread_db, 0.0, size=count)
        powers = 10.0 ** (gains_db / 10.0)
        powers /= powers.sum()
        mpcs = tuple(
            MpcSpec(power=float(p), aod=float(rng.uniform(-80.0, 80.0) * DEG))
            for p in powers
        )
        profile = UserProfile(f"u{u + 1}", mpcs=mpcs)
        groups.append(Group(f"u{u + 1}", profile, 1))
    cfg = config or EvalConfig(
        grid_db=tuple(range(10, 51, 5)), grid_kind="tx_power_dbm",
        noise=10.0 ** (-100.0 / 10.0), trials=20, seed=seed,
        mode="covariance", algorithm="greedy2", epsilon=0.0,
    )
    return Scenario(f"sparse-mpc-{seed}", geometry, tuple(groups), cfg)
