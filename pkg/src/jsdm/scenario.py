"""Scenario files, multi-path CSV ingestion and results export.

Scenarios are YAML documents validated against the pydantic schema below
(publishable via ``ScenarioModel.model_json_schema()``).  Angles live in
degrees and powers in dB in files; conversion to radians and linear scale
happens only at this boundary.  Defaults (half-wavelength spacing, the
0.95 energy-fraction rank policy, 100 trials) are applied on load and
echoed back by validation.

Multi-path CSV rows carry one component per line under the exact header
``user_id,power_dbm,delay_ns,aod_deg,aoa_deg``; per-user powers are
normalized to sum to one on import, so selection and precoding stay
scale-free and the absolute link budget enters through the power grid.
"""

from __future__ import annotations

import csv
import io as _io
import math
from importlib import resources
from pathlib import Path
from typing import Literal, Optional, Sequence, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .channel import ArrayGeometry, ClusterSpec, EnergyFraction, MpcSpec, RelativeThreshold, UserProfile
from .evaluation import EvalConfig, EvalResult, Group, Scenario

DEG = math.pi / 180.0

MPC_CSV_HEADER = ("user_id", "power_dbm", "delay_ns", "aod_deg", "aoa_deg")
RESULTS_CSV_HEADER = "grid_db,mode,algorithm,sum_rate_bps_hz,sum_rate_stderr,users_served_mean"

BUILTIN_SCENARIOS = (
    "fig2_common_scatterer",
    "sec4c_two_user_example",
    "sec5_multicluster_g5",
    "raytrace_template",
)


class ScenarioError(Exception):
    """Malformed scenario or data file; message carries the field path."""


# ---------------------------------------------------------------------------
# Schema
# ---------------------------------------------------------------------------


class _StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class GeometryModel(_StrictModel):
    M: int = Field(ge=1, description="antenna count of the uniform linear array")
    D: float = Field(default=0.5, gt=0.0, le=0.5, description="antenna spacing / wavelength")


class ClusterModel(_StrictModel):
    azimuth_deg: float
    spread_deg: float = Field(gt=0.0)
    weight: float = Field(default=1.0, ge=0.0)

    @model_validator(mode="after")
    def _inside_front_halfplane(self):
        if not (-90.0 < self.azimuth_deg - self.spread_deg
                and self.azimuth_deg + self.spread_deg < 90.0):
            raise ValueError("cluster must lie strictly inside (-90, 90) degrees")
        return self


class MpcModel(_StrictModel):
    power_db: float
    delay_ns: float = 0.0
    aod_deg: float
    aoa_deg: Optional[float] = None
    phase_rad: Optional[float] = None

    @field_validator("aod_deg")
    @classmethod
    def _aod_range(cls, v):
        if not -90.0 < v < 90.0:
            raise ValueError("angle of departure must lie in (-90, 90) degrees")
        return v


class UserModel(_StrictModel):
    id: str
    count: int = Field(default=1, ge=1)
    clusters: Optional[list[ClusterModel]] = None
    mpcs: Optional[list[MpcModel]] = None

    @field_validator("id", mode="before")
    @classmethod
    def _coerce_id(cls, v):
        return str(v)

    @model_validator(mode="after")
    def _one_model(self):
        if bool(self.clusters) == bool(self.mpcs):
            raise ValueError("provide exactly one of clusters / mpcs")
        return self


class RankPolicyModel(_StrictModel):
    type: Literal["energy_fraction", "relative_threshold"] = "energy_fraction"
    value: float = 0.95


class EvalModel(_StrictModel):
    mode: Literal["multiplexing", "orthogonalization", "covariance", "zf"] = "multiplexing"
    algorithm: Literal["none", "greedy1", "greedy2", "es-q1", "es-q2"] = "greedy2"
    objective: Literal["power", "measure"] = "power"
    epsilon: float = Field(default=0.0, ge=0.0)
    snr_db: Optional[list[float]] = None
    tx_power_dbm: Optional[list[float]] = None
    noise_linear: Optional[float] = None
    noise_dbm: Optional[float] = None
    trials: int = Field(default=100, ge=1)
    seed: int = 0
    rank_policy: RankPolicyModel = RankPolicyModel()
    power_allocation: Literal["per_stream", "per_group"] = "per_stream"
    orthogonalization_power: Literal["full", "split"] = "full"

    @model_validator(mode="after")
    def _grids_and_noise(self):
        if (self.snr_db is None) == (self.tx_power_dbm is None):
            raise ValueError("provide exactly one of snr_db / tx_power_dbm")
        if not (self.snr_db or self.tx_power_dbm):
            raise ValueError("grid must be non-empty")
        if self.noise_linear is not None and self.noise_dbm is not None:
            raise ValueError("provide at most one of noise_linear / noise_dbm")
        return self


class ScenarioModel(_StrictModel):
    name: str = ""
    geometry: GeometryModel
    users: list[UserModel] = Field(min_length=1)
    eval: EvalModel

    @model_validator(mode="after")
    def _unique_ids(self):
        ids = [u.id for u in self.users]
        if len(set(ids)) != len(ids):
            raise ValueError("user ids must be unique")
        return self


# ---------------------------------------------------------------------------
# Schema <-> runtime conversion
# ---------------------------------------------------------------------------


def _profile_from_model(user: UserModel) -> UserProfile:
    if user.clusters:
        clusters = tuple(
            ClusterSpec(c.azimuth_deg * DEG, c.spread_deg * DEG, c.weight)
            for c in user.clusters
        )
        return UserProfile(user.id, clusters=clusters)
    total = sum(10.0 ** (m.power_db / 10.0) for m in user.mpcs)
    if total <= 0:
        raise ScenarioError(f"user {user.id!r}: MPC powers sum to zero")
    mpcs = tuple(
        MpcSpec(
            power=10.0 ** (m.power_db / 10.0) / total,
            aod=m.aod_deg * DEG,
            phase=m.phase_rad,
            delay=m.delay_ns * 1e-9,
            aoa=m.aoa_deg * DEG if m.aoa_deg is not None else None,
        )
        for m in user.mpcs
    )
    return UserProfile(user.id, mpcs=mpcs)


def _config_from_model(ev: EvalModel) -> EvalConfig:
    if ev.snr_db is not None:
        grid, kind = ev.snr_db, "snr_db"
        noise = ev.noise_linear if ev.noise_linear is not None else (
            10.0 ** (ev.noise_dbm / 10.0) if ev.noise_dbm is not None else 1.0
        )
    else:
        grid, kind = ev.tx_power_dbm, "tx_power_dbm"
        noise_dbm = ev.noise_dbm if ev.noise_dbm is not None else -100.0
        noise = ev.noise_linear if ev.noise_linear is not None else 10.0 ** (noise_dbm / 10.0)
    if ev.rank_policy.type == "energy_fraction":
        policy = EnergyFraction(ev.rank_policy.value)
    else:
        policy = RelativeThreshold(ev.rank_policy.value)
    return EvalConfig(
        grid_db=tuple(sorted(set(grid))),
        grid_kind=kind,
        noise=noise,
        trials=ev.trials,
        seed=ev.seed,
        mode=ev.mode,
        algorithm=ev.algorithm,
        epsilon=ev.epsilon,
        objective=ev.objective,
        rank_policy=policy,
        power_allocation=ev.power_allocation,
        orthogonalization_power=ev.orthogonalization_power,
    )


def scenario_from_model(model: ScenarioModel) -> Scenario:
    try:
        groups = tuple(
            Group(u.id, _profile_from_model(u), u.count) for u in model.users
        )
        config = _config_from_model(model.eval)
        return Scenario(model.name, ArrayGeometry(model.geometry.M, model.geometry.D), groups, config)
    except ValueError as err:
        raise ScenarioError(str(err)) from err


def _format_validation_error(err: ValidationError) -> str:
    lines = []
    for item in err.errors():
        path = ".".join(str(p) for p in item["loc"]) or "<root>"
        lines.append(f"{path}: {item['msg']}")
    return "; ".join(lines)


def loads_scenario(text: str, name: str = "") -> Scenario:
    """Parse and validate a scenario document from YAML text."""
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as err:
        raise ScenarioError(f"parse error: {err}") from err
    if not isinstance(raw, dict):
        raise ScenarioError("scenario document must be a mapping")
    try:
        model = ScenarioModel.model_validate(raw)
    except ValidationError as err:
        raise ScenarioError(_format_validation_error(err)) from err
    scenario = scenario_from_model(model)
    if name and not scenario.name:
        scenario = Scenario(name, scenario.geometry, scenario.groups, scenario.config)
    return scenario


def load_scenario(path: Union[str, Path]) -> Scenario:
    """Load a scenario from a YAML file (or a built-in scenario name)."""
    p = Path(path)
    if not p.exists():
        if str(path) in BUILTIN_SCENARIOS:
            return loads_scenario(builtin_scenario_text(str(path)), name=str(path))
        raise ScenarioError(f"scenario file not found: {path}")
    return loads_scenario(p.read_text(), name=p.stem)


def builtin_scenario_text(name: str) -> str:
    if name not in BUILTIN_SCENARIOS:
        raise ScenarioError(
            f"unknown built-in scenario {name!r}; available: {', '.join(BUILTIN_SCENARIOS)}"
        )
    return resources.files("jsdm").joinpath(f"scenarios/{name}.yaml").read_text()


def model_from_scenario(scenario: Scenario) -> ScenarioModel:
    users = []
    for g in scenario.groups:
        prof = g.profile
        if prof.clusters:
            users.append(
                UserModel(
                    id=g.group_id,
                    count=g.n_users,
                    clusters=[
                        ClusterModel(
                            azimuth_deg=c.azimuth / DEG,
                            spread_deg=c.spread / DEG,
                            weight=c.weight,
                        )
                        for c in prof.clusters
                    ],
                )
            )
        else:
            users.append(
                UserModel(
                    id=g.group_id,
                    count=g.n_users,
                    mpcs=[
                        MpcModel(
                            power_db=10.0 * math.log10(m.power) if m.power > 0 else -300.0,
                            delay_ns=m.delay * 1e9,
                            aod_deg=m.aod / DEG,
                            aoa_deg=m.aoa / DEG if m.aoa is not None else None,
                            phase_rad=m.phase,
                        )
                        for m in prof.mpcs
                    ],
                )
            )
    cfg = scenario.config
    policy = cfg.rank_policy
    ev = EvalModel(
        mode=cfg.mode,
        algorithm=cfg.algorithm,
        objective=cfg.objective,
        epsilon=cfg.epsilon,
        snr_db=list(cfg.grid_db) if cfg.grid_kind == "snr_db" else None,
        tx_power_dbm=list(cfg.grid_db) if cfg.grid_kind == "tx_power_dbm" else None,
        noise_linear=cfg.noise,
        trials=cfg.trials,
        seed=cfg.seed,
        rank_policy=RankPolicyModel(
            type="energy_fraction" if isinstance(policy, EnergyFraction) else "relative_threshold",
            value=policy.eta if isinstance(policy, EnergyFraction) else policy.gamma,
        ),
        power_allocation=cfg.power_allocation,
        orthogonalization_power=cfg.orthogonalization_power,
    )
    return ScenarioModel(
        name=scenario.name,
        geometry=GeometryModel(M=scenario.geometry.M, D=scenario.geometry.D),
        users=users,
        eval=ev,
    )


def dump_scenario(scenario: Scenario) -> str:
    """Serialize a scenario back to YAML (normalized units and defaults)."""
    data = model_from_scenario(scenario).model_dump(exclude_none=True)
    return yaml.safe_dump(data, sort_keys=False)


# ---------------------------------------------------------------------------
# Multi-path CSV import
# ---------------------------------------------------------------------------


def import_mpc_rows(text: str) -> list[UserProfile]:
    """Parse ray-tracing / measurement MPC rows into user profiles.

    Users keep their first-appearance order; powers are converted from
    dBm to linear and normalized per user.
    """
    reader = csv.reader(_io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ScenarioError("empty MPC file") from None
    if tuple(h.strip() for h in header) != MPC_CSV_HEADER:
        raise ScenarioError(
            f"unknown header {','.join(header)!r}; expected {','.join(MPC_CSV_HEADER)!r}"
        )
    order: list[str] = []
    rows: dict[str, list[tuple[float, float, float, float]]] = {}
    for lineno, row in enumerate(reader, start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != len(MPC_CSV_HEADER):
            raise ScenarioError(f"line {lineno}: expected {len(MPC_CSV_HEADER)} fields")
        user = row[0].strip()
        try:
            power_dbm, delay_ns, aod_deg, aoa_deg = (float(v) for v in row[1:])
        except ValueError as err:
            raise ScenarioError(f"line {lineno}: non-numeric field ({err})") from err
        if not -90.0 < aod_deg < 90.0:
            raise ScenarioError(f"line {lineno}: angle of departure out of (-90, 90)")
        if user not in rows:
            order.append(user)
            rows[user] = []
        rows[user].append((power_dbm, delay_ns, aod_deg, aoa_deg))
    if not order:
        raise ScenarioError("MPC file has no data rows")
    profiles = []
    for user in order:
        powers = [10.0 ** (p / 10.0) for p, _, _, _ in rows[user]]
        total = sum(powers)
        if total <= 0:
            raise ScenarioError(f"user {user!r} has no received power")
        mpcs = tuple(
            MpcSpec(
                power=p / total,
                aod=aod * DEG,
                delay=delay * 1e-9,
                aoa=aoa * DEG,
            )
            for p, (_, delay, aod, aoa) in zip(powers, rows[user])
        )
        profiles.append(UserProfile(user, mpcs=mpcs))
    return profiles


def import_mpc_csv(path: Union[str, Path], geometry: ArrayGeometry) -> list[UserProfile]:
    """Load MPC rows from a CSV file.

    ``geometry`` is part of the ingestion contract (the angular bins a
    profile occupies depend on it downstream) but the profiles themselves
    are geometry-free.
    """
    del geometry
    p = Path(path)
    if not p.exists():
        raise ScenarioError(f"MPC file not found: {path}")
    return import_mpc_rows(p.read_text())


def dump_user_fragment(profiles: Sequence[UserProfile]) -> str:
    """YAML ``users:`` block for imported profiles (a scenario fragment)."""
    users = []
    for prof in profiles:
        users.append(
            {
                "id": prof.user_id,
                "mpcs": [
                    {
                        "power_db": 10.0 * math.log10(m.power) if m.power > 0 else -300.0,
                        "delay_ns": m.delay * 1e9,
                        "aod_deg": m.aod / DEG,
                        **({"aoa_deg": m.aoa / DEG} if m.aoa is not None else {}),
                    }
                    for m in prof.mpcs
                ],
            }
        )
    return yaml.safe_dump({"users": users}, sort_keys=False)


# ---------------------------------------------------------------------------
# Results export
# ---------------------------------------------------------------------------


def result_rows(results: Union[EvalResult, Sequence[EvalResult]]) -> list[tuple]:
    """Flatten results into sorted (grid, mode, algorithm, ...) tuples."""
    if isinstance(results, EvalResult):
        results = [results]
    rows = [
        (p.grid_db, r.mode, r.algorithm, p.sum_rate, p.sum_rate_stderr, p.users_served_mean)
        for r in results
        for p in r.points
    ]
    rows.sort(key=lambda row: (row[0], row[1], row[2]))
    return rows


def format_result_row(row: tuple) -> str:
    grid_db, mode, algorithm, rate, stderr, served = row
    return (
        f"{grid_db:.6g},{mode},{algorithm},{rate:.6g},{stderr:.6g},{served:.6g}"
    )


def results_csv(results: Union[EvalResult, Sequence[EvalResult]]) -> str:
    lines = [RESULTS_CSV_HEADER]
    lines.extend(format_result_row(row) for row in result_rows(results))
    return "\n".join(lines) + "\n"


def export_results(results: Union[EvalResult, Sequence[EvalResult]], path: Union[str, Path]) -> None:
    """Write the results CSV (stable ordering, 6-significant-digit fields)."""
    Path(path).write_text(results_csv(results))
