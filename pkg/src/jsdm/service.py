"""HTTP service wrapping the simulator.

Endpoints accept the scenario document itself (same schema as the YAML
files) so the service stays stateless; the CLI is a thin client of the
handler functions below, either in-process or over HTTP.  Long sweeps are
plain synchronous POSTs: one request, one finished table.
"""

from __future__ import annotations

from dataclasses import replace
from typing import Optional

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from . import __version__
from .evaluation import EvalResult, compare_modes, run_sweep, select_groups
from .grouping import build_graph
from .scenario import (
    ScenarioError,
    ScenarioModel,
    dump_user_fragment,
    import_mpc_rows,
    scenario_from_model,
)


class HealthResponse(BaseModel):
    status: str = "ok"
    version: str = __version__


class ConfigOverrides(BaseModel):
    mode: Optional[str] = None
    algorithm: Optional[str] = None
    trials: Optional[int] = Field(default=None, ge=1)
    seed: Optional[int] = None
    epsilon: Optional[float] = Field(default=None, ge=0.0)
    objective: Optional[str] = None


class ScenarioRequest(BaseModel):
    scenario: ScenarioModel
    overrides: ConfigOverrides = ConfigOverrides()


class ValidateResponse(BaseModel):
    ok: bool
    name: str
    antennas: int
    spacing: float
    groups: int
    users: int
    mode: str
    algorithm: str
    grid_kind: str
    grid_points: int
    trials: int
    seed: int


class RetainedSet(BaseModel):
    id: str
    intervals: list[tuple[float, float]]
    measure: float


class SelectResponse(BaseModel):
    algorithm: str
    objective_value: float
    selected: list[RetainedSet]


class SweepPoint(BaseModel):
    grid_db: float
    sum_rate_bps_hz: float
    sum_rate_stderr: float
    users_served_mean: float


class SweepResponse(BaseModel):
    mode: str
    algorithm: str
    grid_kind: str
    served_groups: list[str]
    points: list[SweepPoint]


class CompareResponse(BaseModel):
    results: list[SweepResponse]


class MpcImportRequest(BaseModel):
    csv_text: str


class MpcImportResponse(BaseModel):
    users: int
    mpcs: int
    fragment_yaml: str


def _load(request: ScenarioRequest):
    try:
        scenario = scenario_from_model(request.scenario)
    except ScenarioError as err:
        raise HTTPException(status_code=400, detail=str(err)) from err
    cfg = scenario.config
    ov = request.overrides
    updates = {
        key: value
        for key, value in (
            ("mode", ov.mode),
            ("algorithm", ov.algorithm),
            ("trials", ov.trials),
            ("seed", ov.seed),
            ("epsilon", ov.epsilon),
            ("objective", ov.objective),
        )
        if value is not None
    }
    try:
        if updates:
            cfg = replace(cfg, **updates)
    except ValueError as err:
        raise HTTPException(status_code=400, detail=str(err)) from err
    return scenario, cfg


def _sweep_response(result: EvalResult) -> SweepResponse:
    return SweepResponse(
        mode=result.mode,
        algorithm=result.algorithm,
        grid_kind=result.grid_kind,
        served_groups=list(result.served_group_ids),
        points=[
            SweepPoint(
                grid_db=p.grid_db,
                sum_rate_bps_hz=p.sum_rate,
                sum_rate_stderr=p.sum_rate_stderr,
                users_served_mean=p.users_served_mean,
            )
            for p in result.points
        ],
    )


def health() -> HealthResponse:
    return HealthResponse()


def validate_scenario(request: ScenarioRequest) -> ValidateResponse:
    scenario, cfg = _load(request)
    return ValidateResponse(
        ok=True,
        name=scenario.name,
        antennas=scenario.geometry.M,
        spacing=scenario.geometry.D,
        groups=len(scenario.groups),
        users=scenario.total_users,
        mode=cfg.mode,
        algorithm=cfg.algorithm,
        grid_kind=cfg.grid_kind,
        grid_points=len(cfg.grid_db),
        trials=cfg.trials,
        seed=cfg.seed,
    )


def run_selection(request: ScenarioRequest) -> SelectResponse:
    scenario, cfg = _load(request)
    graph = build_graph(
        [g.profile for g in scenario.groups], scenario.geometry, objective=cfg.objective
    )
    result = select_groups(graph, cfg)
    return SelectResponse(
        algorithm=cfg.algorithm,
        objective_value=result.objective,
        selected=[
            RetainedSet(
                id=graph.nodes[i].node_id,
                intervals=[tuple(p) for p in result.retained[i].pieces],
                measure=result.retained[i].measure,
            )
            for i in result.selected
        ],
    )


def run_sweep_request(request: ScenarioRequest) -> SweepResponse:
    scenario, cfg = _load(request)
    return _sweep_response(run_sweep(scenario, cfg))


def run_compare(request: ScenarioRequest) -> CompareResponse:
    scenario, cfg = _load(request)
    return CompareResponse(
        results=[_sweep_response(r) for r in compare_modes(scenario, cfg)]
    )


def import_mpcs(request: MpcImportRequest) -> MpcImportResponse:
    try:
        profiles = import_mpc_rows(request.csv_text)
    except ScenarioError as err:
        raise HTTPException(status_code=400, detail=str(err)) from err
    return MpcImportResponse(
        users=len(profiles),
        mpcs=sum(len(p.mpcs) for p in profiles),
        fragment_yaml=dump_user_fragment(profiles),
    )


def create_app() -> FastAPI:
    app = FastAPI(
        title="jsdm",
        version=__version__,
        description="Directional multiuser MIMO downlink simulator",
    )
    app.get("/health", response_model=HealthResponse)(health)
    app.post("/scenario/validate", response_model=ValidateResponse)(validate_scenario)
    app.post("/selection", response_model=SelectResponse)(run_selection)
    app.post("/sweep", response_model=SweepResponse)(run_sweep_request)
    app.post("/compare", response_model=CompareResponse)(run_compare)
    app.post("/mpc-import", response_model=MpcImportResponse)(import_mpcs)
    return app


app = create_app()
