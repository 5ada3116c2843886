"""HTTP service exposing the simulator to multiple clients.

Handlers are plain functions over pydantic request/response models; the
FastAPI routes and the command-line client both call them, so results
are identical whether the simulator runs in-process or behind a server.
Configuration errors map to HTTP 422.
"""

from __future__ import annotations

import math
from typing import Optional

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from . import __version__
from .channel import ENVIRONMENTS, TRAJECTORY_KINDS
from .config import DetectorModel, GatesModel, ScenarioConfig
from .detect import (
    DEFAULT_CUTOFF_FRACTION,
    SeriesAnalysis,
    analyze_series,
)
from .errors import ConfigError, SwipePairError
from .harness import (
    CalibrationResult,
    MonteCarloResult,
    RocResult,
    RunMetrics,
    calibrate_threshold,
    imperfect_swipe_suite,
    monte_carlo,
    roc_for_scenario,
    run_scenario,
)
from .presets import environment_preset, trajectory_preset


def _clean(x: float | None) -> float | None:
    """NaN is not valid JSON; report missing metrics as null."""
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return None
    return x


class RunMetricsModel(BaseModel):
    seed: int
    run_index: int
    accepted: bool
    failed_check: Optional[str] = None
    residual_std_fwd: Optional[float] = None
    residual_std_rev: Optional[float] = None
    depth_db: Optional[float] = None
    width_s: Optional[float] = None
    peak_level_db: Optional[float] = None
    valley_level_db: Optional[float] = None
    valley_found: bool
    geometry_ok: bool
    accepted_a: bool
    accepted_b: bool

    @classmethod
    def from_metrics(cls, m: RunMetrics) -> "RunMetricsModel":
        return cls(seed=m.seed, run_index=m.run_index, accepted=m.accepted,
                   failed_check=m.failed_check,
                   residual_std_fwd=_clean(m.residual_std_fwd),
                   residual_std_rev=_clean(m.residual_std_rev),
                   depth_db=_clean(m.depth_db), width_s=_clean(m.width_s),
                   peak_level_db=_clean(m.peak_level_db),
                   valley_level_db=_clean(m.valley_level_db),
                   valley_found=m.valley_found, geometry_ok=m.geometry_ok,
                   accepted_a=m.accepted_a, accepted_b=m.accepted_b)


class PairRequest(BaseModel):
    config: ScenarioConfig = Field(default_factory=ScenarioConfig)
    run_index: int = 0
    include_transcript: bool = False


class PairResponse(BaseModel):
    accepted: bool
    failed_check: Optional[str] = None
    metrics: RunMetricsModel
    transcript: Optional[dict] = None


def handle_pair(req: PairRequest) -> PairResponse:
    result = run_scenario(req.config, req.run_index)
    return PairResponse(
        accepted=result.outcome.accepted,
        failed_check=result.outcome.failed_check,
        metrics=RunMetricsModel.from_metrics(result.metrics),
        transcript=result.outcome.transcript.to_json_dict()
        if req.include_transcript else None,
    )


class MonteCarloRequest(BaseModel):
    config: ScenarioConfig = Field(default_factory=ScenarioConfig)
    n_runs: int = 100


class MonteCarloResponse(BaseModel):
    summary: dict
    runs: list[RunMetricsModel]


def _mc_response(mc: MonteCarloResult) -> MonteCarloResponse:
    summary = {k: _clean(v) if isinstance(v, float) else v
               for k, v in mc.summary.items()}
    return MonteCarloResponse(summary=summary,
                              runs=[RunMetricsModel.from_metrics(r) for r in mc.rows])


def handle_monte_carlo(req: MonteCarloRequest) -> MonteCarloResponse:
    return _mc_response(monte_carlo(req.config, req.n_runs))


class RocRequest(BaseModel):
    config: ScenarioConfig
    n_runs: int = 500


class RocPointModel(BaseModel):
    threshold_db: float
    fpr: float
    tpr: float


class RocResponse(BaseModel):
    points: list[RocPointModel]
    auc: float
    n_legit: int
    n_attack: int
    legit_summary: dict
    attack_summary: dict


def handle_roc(req: RocRequest) -> RocResponse:
    roc: RocResult = roc_for_scenario(req.config, req.n_runs)
    return RocResponse(
        points=[RocPointModel(threshold_db=p.threshold_db, fpr=p.fpr, tpr=p.tpr)
                for p in roc.points],
        auc=roc.auc, n_legit=roc.n_legit, n_attack=roc.n_attack,
        legit_summary={k: _clean(v) if isinstance(v, float) else v
                       for k, v in roc.legit_summary.items()},
        attack_summary={k: _clean(v) if isinstance(v, float) else v
                        for k, v in roc.attack_summary.items()},
    )


class AnalyzeRequest(BaseModel):
    times_s: list[float]
    pathloss_db: list[float]
    detector: DetectorModel = Field(default_factory=DetectorModel)
    gates: GatesModel = Field(default_factory=GatesModel)
    variation_threshold_db: float = 1.27
    cutoff_fraction: float = DEFAULT_CUTOFF_FRACTION


class ValleyReportModel(BaseModel):
    found: bool
    start_idx: int
    end_idx: int
    valley_idx: int
    depth_db: Optional[float] = None
    peak_level_db: Optional[float] = None
    valley_level_db: Optional[float] = None
    width_s: Optional[float] = None


class VariationReportModel(BaseModel):
    residual_std_db: Optional[float] = None
    threshold_db: float
    passed: bool
    reason: Optional[str] = None


class AnalyzeResponse(BaseModel):
    valley: ValleyReportModel
    geometry_ok: bool
    variation: Optional[VariationReportModel] = None
    accepted: bool
    failed_check: Optional[str] = None


def analysis_response(analysis: SeriesAnalysis) -> AnalyzeResponse:
    v = analysis.valley
    variation = None
    if analysis.variation is not None:
        variation = VariationReportModel(
            residual_std_db=_clean(analysis.variation.residual_std_db),
            threshold_db=analysis.variation.threshold_db,
            passed=analysis.variation.passed,
            reason=analysis.variation.reason)
    return AnalyzeResponse(
        valley=ValleyReportModel(found=v.found, start_idx=v.start_idx,
                                 end_idx=v.end_idx, valley_idx=v.valley_idx,
                                 depth_db=_clean(v.depth_db),
                                 peak_level_db=_clean(v.peak_level_db),
                                 valley_level_db=_clean(v.valley_level_db),
                                 width_s=_clean(v.width_s)),
        geometry_ok=analysis.geometry_ok, variation=variation,
        accepted=analysis.accepted, failed_check=analysis.failed_check)


def handle_analyze(req: AnalyzeRequest) -> AnalyzeResponse:
    if len(req.times_s) != len(req.pathloss_db):
        raise ConfigError("times_s and pathloss_db must be equally long")
    analysis = analyze_series(req.times_s, req.pathloss_db,
                              req.detector.build(), req.gates.build(),
                              req.variation_threshold_db, req.cutoff_fraction,
                              req.detector.smooth_window)
    return analysis_response(analysis)


class CalibrateRequest(BaseModel):
    environment: str = "office"
    target_fpr: float = 0.10
    target_tpr: float = 0.90
    n_runs: int = 500
    seed: int = 0
    attacker_distance_m: Optional[float] = None
    attacker_kind: str = "supreme"


class CalibrateResponse(BaseModel):
    environment: str
    feasible: bool
    threshold_db: Optional[float] = None
    achieved_fpr: Optional[float] = None
    achieved_tpr: Optional[float] = None


def handle_calibrate(req: CalibrateRequest) -> CalibrateResponse:
    preset = environment_preset(req.environment)
    distance = (req.attacker_distance_m if req.attacker_distance_m is not None
                else preset.min_attacker_distance_m)
    cfg = ScenarioConfig(environment=req.environment, seed=req.seed,
                         attacker={"kind": req.attacker_kind,
                                   "distance_m": distance})
    cal: CalibrationResult = calibrate_threshold(cfg, req.target_fpr,
                                                 req.target_tpr, req.n_runs)
    return CalibrateResponse(environment=cal.environment, feasible=cal.feasible,
                             threshold_db=cal.threshold_db,
                             achieved_fpr=cal.achieved_fpr,
                             achieved_tpr=cal.achieved_tpr)


class PresetModel(BaseModel):
    name: str
    alpha: float
    sigma_meas_db: float
    system_loss_db: float
    fading_table: list[tuple[float, float]]
    min_attacker_distance_m: float


class PresetsResponse(BaseModel):
    environments: list[PresetModel]
    trajectories: dict[str, dict]


def handle_presets() -> PresetsResponse:
    envs = []
    for name in ENVIRONMENTS:
        p = environment_preset(name)
        envs.append(PresetModel(name=name, alpha=p.channel.alpha,
                                sigma_meas_db=p.channel.sigma_meas_db,
                                system_loss_db=p.channel.system_loss_db,
                                fading_table=list(p.fading_table),
                                min_attacker_distance_m=p.min_attacker_distance_m))
    trajectories = {}
    for kind in TRAJECTORY_KINDS:
        t = trajectory_preset(kind)
        trajectories[kind] = {
            "perp_offset_m": t.perp_offset_m, "half_span_m": t.half_span_m,
            "speed_mps": t.speed_mps, "start_offset_m": t.start_offset_m,
            "lead_in_s": t.lead_in_s, "lead_out_s": t.lead_out_s,
        }
    return PresetsResponse(environments=envs, trajectories=trajectories)


class ImperfectSwipeRequest(BaseModel):
    seed: int = 0
    n_runs: int = 200
    environment: str = "office"


class ImperfectSwipeResponse(BaseModel):
    table: dict[str, dict]


def handle_imperfect(req: ImperfectSwipeRequest) -> ImperfectSwipeResponse:
    table = imperfect_swipe_suite(req.seed, req.n_runs, req.environment)
    clean = {k: {kk: _clean(vv) if isinstance(vv, float) else vv
                 for kk, vv in row.items()} for k, row in table.items()}
    return ImperfectSwipeResponse(table=clean)


def create_app() -> FastAPI:
    app = FastAPI(title="swipepair", version=__version__,
                  description="Swipe-motion RSSI proximity pairing simulator")

    def guarded(handler, *args):
        try:
            return handler(*args)
        except (ConfigError, SwipePairError) as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok", "version": __version__}

    @app.get("/presets", response_model=PresetsResponse)
    def presets() -> PresetsResponse:
        return handle_presets()

    @app.post("/pair", response_model=PairResponse)
    def pair_endpoint(req: PairRequest) -> PairResponse:
        return guarded(handle_pair, req)

    @app.post("/montecarlo", response_model=MonteCarloResponse)
    def montecarlo_endpoint(req: MonteCarloRequest) -> MonteCarloResponse:
        return guarded(handle_monte_carlo, req)

    @app.post("/roc", response_model=RocResponse)
    def roc_endpoint(req: RocRequest) -> RocResponse:
        return guarded(handle_roc, req)

    @app.post("/analyze", response_model=AnalyzeResponse)
    def analyze_endpoint(req: AnalyzeRequest) -> AnalyzeResponse:
        return guarded(handle_analyze, req)

    @app.post("/calibrate", response_model=CalibrateResponse)
    def calibrate_endpoint(req: CalibrateRequest) -> CalibrateResponse:
        return guarded(handle_calibrate, req)

    @app.post("/imperfect-swipes", response_model=ImperfectSwipeResponse)
    def imperfect_endpoint(req: ImperfectSwipeRequest) -> ImperfectSwipeResponse:
        return guarded(handle_imperfect, req)

    return app


app = create_app()
