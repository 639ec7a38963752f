"""Monte Carlo link-level evaluation.

Given a scenario (array geometry plus user groups), this module runs the
full pipeline per transmit mode: select compatible groups on the conflict
graph, build the two-stage precoders, draw independent channel
realizations, and average sum spectral efficiency over an SNR or transmit
power grid.

Reproducibility: all randomness flows from one master seed.  Trial t uses
``numpy.random.default_rng(SeedSequence(seed).spawn(trials)[t])``; the
same trial streams are replayed for every grid point (common random
numbers), so curves over the grid are smooth and runs are bit-stable.
Trials are independent and may be evaluated concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from .channel import (
    ArrayGeometry,
    Covariance,
    EnergyFraction,
    RankPolicy,
    UserProfile,
    covariance_of,
    effective_rank,
    sample_channels,
)
from .grouping import (
    ConflictGraph,
    SelectionResult,
    build_graph,
    exhaustive_search,
    greedy_algorithm_1,
    greedy_algorithm_2,
    select_all,
)
from .precoding import (
    BdDimensionError,
    GroupPrecoder,
    PreBeamformer,
    PrecoderSet,
    approximate_bd,
    full_eigen_beamformer,
    zero_forcing,
)

MODES = ("multiplexing", "orthogonalization", "covariance", "zf")
ALGORITHMS = ("none", "greedy1", "greedy2", "es-q1", "es-q2")
GRID_KINDS = ("snr_db", "tx_power_dbm")

DEFAULT_COMPARE_PAIRS = (
    ("multiplexing", "greedy1"),
    ("multiplexing", "greedy2"),
    ("orthogonalization", "greedy1"),
    ("orthogonalization", "greedy2"),
    ("covariance", "greedy1"),
    ("covariance", "greedy2"),
    ("zf", "none"),
)


@dataclass(frozen=True)
class Group:
    """One served unit: a user (n_users=1) or a co-located user group."""

    group_id: str
    profile: UserProfile
    n_users: int = 1

    def __post_init__(self):
        if self.n_users < 1:
            raise ValueError(f"group {self.group_id!r}: user count must be >= 1")


@dataclass(frozen=True)
class EvalConfig:
    """Sweep definition: grid, noise, trial count, mode and selection choices."""

    grid_db: tuple[float, ...]
    grid_kind: str = "snr_db"
    noise: float = 1.0
    trials: int = 100
    seed: int = 0
    mode: str = "multiplexing"
    algorithm: str = "greedy2"
    epsilon: float = 0.0
    objective: str = "power"
    rank_policy: RankPolicy = EnergyFraction(0.95)
    power_allocation: str = "per_stream"  # inter-group split: per_stream | per_group
    orthogonalization_power: str = "full"  # per-slot budget: full | split
    exhaustive_cap: int = 20

    def __post_init__(self):
        object.__setattr__(self, "grid_db", tuple(float(v) for v in self.grid_db))
        if not self.grid_db:
            raise ValueError("grid must be non-empty")
        if any(b <= a for a, b in zip(self.grid_db, self.grid_db[1:])):
            raise ValueError("grid must be strictly increasing")
        if self.grid_kind not in GRID_KINDS:
            raise ValueError(f"unknown grid kind {self.grid_kind!r}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if self.noise <= 0:
            raise ValueError("noise power must be positive")
        if self.epsilon < 0:
            raise ValueError("epsilon must be non-negative")
        if self.power_allocation not in ("per_stream", "per_group"):
            raise ValueError(f"unknown power allocation {self.power_allocation!r}")
        if self.orthogonalization_power not in ("full", "split"):
            raise ValueError(f"unknown orthogonalization power rule {self.orthogonalization_power!r}")

    def power(self, grid_db: float) -> float:
        """Transmit power (linear) at a grid point."""
        if self.grid_kind == "snr_db":
            return self.noise * 10.0 ** (grid_db / 10.0)
        return 10.0 ** (grid_db / 10.0)  # dBm grid: linear milliwatts


@dataclass(frozen=True)
class Scenario:
    name: str
    geometry: ArrayGeometry
    groups: tuple[Group, ...]
    config: EvalConfig

    def __post_init__(self):
        if not self.groups:
            raise ValueError("scenario needs at least one group")
        ids = [g.group_id for g in self.groups]
        if len(set(ids)) != len(ids):
            raise ValueError("group ids must be unique")

    @property
    def total_users(self) -> int:
        return sum(g.n_users for g in self.groups)


@dataclass(frozen=True)
class GridPointResult:
    grid_db: float
    sum_rate: float
    sum_rate_stderr: float
    users_served_mean: float
    samples: tuple[float, ...]


@dataclass(frozen=True)
class EvalResult:
    mode: str
    algorithm: str
    grid_kind: str
    points: tuple[GridPointResult, ...]
    selection: Optional[SelectionResult]
    served_group_ids: tuple[str, ...]


def trial_rngs(seed: int, count: int) -> list[np.random.Generator]:
    """One independent generator per trial, spawned from the master seed."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(count)]


@lru_cache(maxsize=256)
def _cached_covariance(geometry: ArrayGeometry, profile: UserProfile) -> Covariance:
    return covariance_of(geometry, profile)


def sinr_per_user(
    channels: Sequence[np.ndarray],
    precoders: PrecoderSet,
    noise: float,
) -> list[np.ndarray]:
    """Per-user SINRs for unit-variance streams under the given precoders.

    ``channels[g]`` holds the served users of group g as columns; entry
    (k, j) of the effective matrix H_g^H B_g' P_g' couples stream j of
    group g' into user k of group g.  The SINR denominator collects the
    noise, the intra-group off-diagonal and all inter-group terms.
    """
    if len(channels) != len(precoders.entries):
        raise ValueError("one channel matrix per precoded group is required")
    transmit = [b.matrix @ p.matrix for b, p in precoders.entries]
    out = []
    for g, h in enumerate(channels):
        own = h.conj().T @ transmit[g]
        if own.shape[0] != own.shape[1]:
            raise ValueError(
                f"group {g}: {own.shape[0]} receivers vs {own.shape[1]} streams"
            )
        signal = np.abs(np.diag(own)) ** 2
        intra = np.sum(np.abs(own) ** 2, axis=1) - signal
        inter = np.zeros_like(signal)
        for j, v in enumerate(transmit):
            if j != g:
                inter += np.sum(np.abs(h.conj().T @ v) ** 2, axis=1)
        out.append(signal / (noise + intra + inter))
    return out


def sum_spectral_efficiency(
    sinrs: Sequence[np.ndarray],
    resource_fractions: Optional[Sequence[float]] = None,
) -> float:
    """Gaussian-input sum rate; each group weighted by its resource share."""
    fractions = resource_fractions if resource_fractions is not None else [1.0] * len(sinrs)
    return float(
        sum(f * np.sum(np.log2(1.0 + np.asarray(s))) for f, s in zip(fractions, sinrs))
    )


def select_groups(graph: ConflictGraph, config: EvalConfig) -> SelectionResult:
    """Run the configured selection algorithm on a conflict graph."""
    if config.algorithm == "none":
        return select_all(graph)
    if config.algorithm == "greedy1":
        return greedy_algorithm_1(graph)
    if config.algorithm == "greedy2":
        return greedy_algorithm_2(graph, config.epsilon)
    if config.algorithm == "es-q1":
        return exhaustive_search(graph, "q1", cap=config.exhaustive_cap)
    if config.algorithm == "es-q2":
        return exhaustive_search(graph, "q2", epsilon=config.epsilon, cap=config.exhaustive_cap)
    raise ValueError(f"unknown algorithm {config.algorithm!r}")


@dataclass(frozen=True)
class _Entry:
    group_index: int
    beam: PreBeamformer
    streams: int
    statistical: bool  # True: fixed scalar inner precoder (no instantaneous CSIT)


@dataclass(frozen=True)
class _Slot:
    """One time-frequency resource: the groups transmitting in it."""

    fraction: float
    entries: tuple[_Entry, ...]
    merged: bool = False  # merged slots zero-force across all entries jointly


def _bd_with_drops(
    covs: Sequence[Covariance],
    policy: RankPolicy,
    ids: Sequence[str],
    widths: Optional[int] = None,
    max_widths: Optional[Sequence[int]] = None,
) -> tuple[list[int], list[PreBeamformer]]:
    """Approximate BD, dropping groups whose nulling complement vanishes."""
    kept = list(range(len(covs)))
    while kept:
        try:
            beams = approximate_bd(
                [covs[i] for i in kept],
                policy,
                widths=widths,
                max_widths=[max_widths[i] for i in kept] if max_widths is not None else None,
                group_ids=[ids[i] for i in kept],
            )
            return kept, beams
        except BdDimensionError as err:
            bad = {g for g, _, _ in err.shortfalls}
            remaining = [i for i in kept if ids[i] not in bad]
            if len(remaining) == len(kept):
                raise
            kept = remaining
    return [], []


def _build_slots(scenario: Scenario, config: EvalConfig, selected: list[int]) -> list[_Slot]:
    geometry = scenario.geometry
    covs = [_cached_covariance(geometry, scenario.groups[i].profile) for i in selected]
    ids = [scenario.groups[i].group_id for i in selected]
    n_users = [scenario.groups[i].n_users for i in selected]
    policy = config.rank_policy

    if config.mode == "multiplexing":
        # Beamformer width follows the effective rank of the projected
        # covariance, NOT min(streams, rank): a width equal to the stream
        # count makes the zero-forcing inversion square and ill-conditioned,
        # which collapses the multiplexing rate.
        kept, beams = _bd_with_drops(covs, policy, ids)
        entries = tuple(
            _Entry(selected[i], beam, min(n_users[i], beam.width), False)
            for i, beam in zip(kept, beams)
        )
        return [_Slot(1.0, entries)] if entries else []

    if config.mode == "orthogonalization":
        served = []
        for i, cov in enumerate(covs):
            width = max(1, effective_rank(cov, policy))
            beam = full_eigen_beamformer(cov, width, group_id=ids[i])
            served.append(_Entry(selected[i], beam, min(n_users[i], width), False))
        fraction = 1.0 / len(served)
        return [_Slot(fraction, (entry,)) for entry in served]

    if config.mode == "covariance":
        kept, beams = _bd_with_drops(covs, policy, ids, widths=1)
        entries = tuple(
            _Entry(selected[i], beam, 1, True) for i, beam in zip(kept, beams)
        )
        return [_Slot(1.0, entries)] if entries else []

    if config.mode == "zf":
        identity = PreBeamformer(matrix=np.eye(geometry.M, dtype=complex), group_id="all")
        entries = []
        budget = geometry.M  # joint ZF cannot exceed the antenna count
        for i in range(len(selected)):
            take = min(n_users[i], budget)
            if take <= 0:
                break
            entries.append(_Entry(selected[i], identity, take, False))
            budget -= take
        return [_Slot(1.0, tuple(entries), merged=True)] if entries else []

    raise ValueError(f"unknown mode {config.mode!r}")


def _slot_channels(
    scenario: Scenario, slot: _Slot, rng: np.random.Generator
) -> list[np.ndarray]:
    geometry = scenario.geometry
    return [
        sample_channels(
            _cached_covariance(geometry, scenario.groups[e.group_index].profile),
            e.streams,
            rng,
        )
        for e in slot.entries
    ]


def _slot_rate(
    slot: _Slot,
    channels: list[np.ndarray],
    power: float,
    config: EvalConfig,
) -> float:
    if config.mode == "orthogonalization" and config.orthogonalization_power == "split":
        slot_power = power * slot.fraction
    else:
        slot_power = power

    if slot.merged:
        h = np.hstack(channels)
        beam = slot.entries[0].beam
        precoder = zero_forcing(beam.matrix.conj().T @ h, slot_power, group="all")
        precoders = PrecoderSet(entries=((beam, precoder),), total_power=slot_power)
        sinrs = sinr_per_user([h], precoders, config.noise)
        return slot.fraction * sum_spectral_efficiency(sinrs)

    total_streams = sum(e.streams for e in slot.entries)
    pairs = []
    for e, h in zip(slot.entries, channels):
        if config.power_allocation == "per_group":
            alloc = slot_power / len(slot.entries)
        else:
            alloc = slot_power * e.streams / total_streams
        if e.statistical:
            inner = GroupPrecoder(
                matrix=np.full((e.beam.width, e.streams), math.sqrt(alloc), dtype=complex),
                gain=math.sqrt(alloc),
            )
        else:
            inner = zero_forcing(
                e.beam.matrix.conj().T @ h, alloc, group=e.beam.group_id
            )
        pairs.append((e.beam, inner))
    precoders = PrecoderSet(entries=tuple(pairs), total_power=slot_power)
    sinrs = sinr_per_user(channels, precoders, config.noise)
    return slot.fraction * sum_spectral_efficiency(sinrs)


def run_sweep(scenario: Scenario, config: Optional[EvalConfig] = None) -> EvalResult:
    """Evaluate one (mode, algorithm) pair over the whole grid.

    Selection and pre-beamformers depend only on the channel statistics
    and are built once; each trial redraws channels and re-solves the
    instantaneous inner precoders at every grid power.
    """
    cfg = config if config is not None else scenario.config
    geometry = scenario.geometry
    profiles = [g.profile for g in scenario.groups]
    graph = build_graph(profiles, geometry, objective=cfg.objective)
    selection = select_groups(graph, cfg)
    selected = list(selection.selected)

    slots = _build_slots(scenario, cfg, selected) if selected else []
    if not slots:
        points = tuple(
            GridPointResult(db, 0.0, 0.0, 0.0, (0.0,) * cfg.trials) for db in cfg.grid_db
        )
        return EvalResult(cfg.mode, cfg.algorithm, cfg.grid_kind, points, selection, ())

    served_ids = tuple(
        scenario.groups[e.group_index].group_id for slot in slots for e in slot.entries
    )
    served_per_resource = sum(
        slot.fraction * sum(e.streams for e in slot.entries) for slot in slots
    )

    samples: list[list[float]] = [[] for _ in cfg.grid_db]
    for rng in trial_rngs(cfg.seed, cfg.trials):
        drawn = [_slot_channels(scenario, slot, rng) for slot in slots]
        for gi, db in enumerate(cfg.grid_db):
            power = cfg.power(db)
            rate = sum(
                _slot_rate(slot, channels, power, cfg)
                for slot, channels in zip(slots, drawn)
            )
            samples[gi].append(rate)

    points = []
    for db, vals in zip(cfg.grid_db, samples):
        arr = np.asarray(vals)
        stderr = float(arr.std(ddof=1) / math.sqrt(len(arr))) if len(arr) > 1 else 0.0
        points.append(
            GridPointResult(db, float(arr.mean()), stderr, served_per_resource, tuple(vals))
        )
    return EvalResult(cfg.mode, cfg.algorithm, cfg.grid_kind, tuple(points), selection, served_ids)


def compare_modes(
    scenario: Scenario,
    config: Optional[EvalConfig] = None,
    pairs: Optional[Sequence[tuple[str, str]]] = None,
) -> list[EvalResult]:
    """One sweep per (mode, algorithm) pair over the shared grid.

    All pairs reuse the same master seed, so they see identical channel
    draws (variance reduction for cross-mode comparisons).
    """
    cfg = config if config is not None else scenario.config
    chosen = tuple(pairs) if pairs is not None else DEFAULT_COMPARE_PAIRS
    return [
        run_sweep(scenario, replace(cfg, mode=mode, algorithm=algorithm))
        for mode, algorithm in chosen
    ]
