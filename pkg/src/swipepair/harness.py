"""Scenario execution, Monte-Carlo sweeps, ROC curves, and calibration.

Seeding: run k of a sweep uses ``numpy.random.SeedSequence(base_seed,
spawn_key=(k,))``, so any subset of runs is reproducible independently
and the whole table is bit-stable for a given base seed.

ROC polarity: "positive" means the attack was detected.  The true
positive rate is the fraction of attacker runs whose decision statistic
exceeds the threshold (attack rejected); the false positive rate is the
fraction of legitimate runs wrongly rejected.  The per-run statistic is
the larger of the forward/reverse residual stds on device A, matching
the accept rule (both directions must stay under the threshold).
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .config import ScenarioConfig
from .detect import check_valley_geometry
from .errors import ConfigError
from .presets import environment_preset
from .protocol import PairingOutcome, PairingSettings, pair

ROC_SWEEP_POINTS = 200

IMPERFECT_MOTIONS = ("asymmetric-swipe", "diagonal-swipe", "slow-swipe", "far-swipe")


def run_rng(base_seed: int, run_index: int) -> np.random.Generator:
    """Independent, reproducible stream for one Monte-Carlo run."""
    return np.random.default_rng(
        np.random.SeedSequence(base_seed, spawn_key=(run_index,)))


@dataclass(frozen=True)
class RunMetrics:
    """Per-run metric row (device A's perspective)."""

    seed: int
    run_index: int
    accepted: bool
    failed_check: str | None
    residual_std_fwd: float
    residual_std_rev: float
    depth_db: float
    width_s: float
    peak_level_db: float
    valley_level_db: float
    valley_found: bool
    geometry_ok: bool
    accepted_a: bool
    accepted_b: bool

    @property
    def decision_stat(self) -> float:
        """Variation-check statistic: worst direction's residual std."""
        return max(self.residual_std_fwd, self.residual_std_rev)


@dataclass(frozen=True)
class ScenarioResult:
    metrics: RunMetrics
    outcome: PairingOutcome


def _settings_from_config(cfg: ScenarioConfig) -> PairingSettings:
    return PairingSettings(
        tx_range_dbm=tuple(cfg.tx_range_dbm),
        tx_fixed_dbm=cfg.tx_fixed_dbm,
        n_probes=cfg.n_probes,
        rate_hz=cfg.rate_hz,
        detector=cfg.detector.build(),
        gates=cfg.gates.build(),
        variation_threshold_db=cfg.variation_threshold_db,
        cutoff_fraction=cfg.extent_cutoff,
        smooth_window=cfg.detector.smooth_window,
        quantize_db=cfg.quantize_rssi_db,
    )


def run_scenario(cfg: ScenarioConfig, run_index: int = 0) -> ScenarioResult:
    """One end-to-end pairing; deterministic for (cfg.seed, run_index)."""
    preset = environment_preset(cfg.environment)
    settings = _settings_from_config(cfg)
    rng = run_rng(cfg.seed, run_index)
    outcome = pair(cfg.trajectory.build(), preset.channel, settings, rng,
                   attacker=cfg.attacker.build() if cfg.attacker else None,
                   fading_sigma=preset.fading_sigma)
    a = outcome.device_a.auth
    valley = a.valley if a is not None else None
    geometry_ok = bool(valley is not None and valley.found
                       and check_valley_geometry(valley, settings.gates))
    metrics = RunMetrics(
        seed=cfg.seed,
        run_index=run_index,
        accepted=outcome.accepted,
        failed_check=outcome.failed_check,
        residual_std_fwd=(a.variation_fwd.residual_std_db
                          if a is not None and a.variation_fwd else math.nan),
        residual_std_rev=(a.variation_rev.residual_std_db
                          if a is not None and a.variation_rev else math.nan),
        depth_db=valley.depth_db if valley is not None else math.nan,
        width_s=valley.width_s if valley is not None else math.nan,
        peak_level_db=valley.peak_level_db if valley is not None else math.nan,
        valley_level_db=valley.valley_level_db if valley is not None else math.nan,
        valley_found=bool(valley is not None and valley.found),
        geometry_ok=geometry_ok,
        accepted_a=bool(a is not None and a.accepted),
        accepted_b=bool(outcome.device_b.auth is not None
                        and outcome.device_b.auth.accepted),
    )
    return ScenarioResult(metrics=metrics, outcome=outcome)


@dataclass
class MonteCarloResult:
    config: ScenarioConfig
    rows: list[RunMetrics]
    summary: dict

    def decision_stats(self) -> np.ndarray:
        """Finite per-run decision statistics (runs with a located valley)."""
        vals = [r.decision_stat for r in self.rows]
        return np.array([v for v in vals if math.isfinite(v)])


def _rate(flags) -> float:
    flags = list(flags)
    return float(np.mean(flags)) if flags else math.nan


def _nanmean(values) -> float:
    arr = np.asarray(list(values), dtype=float)
    if not len(arr) or np.all(np.isnan(arr)):
        return math.nan
    return float(np.nanmean(arr))


def monte_carlo(cfg: ScenarioConfig, n_runs: int) -> MonteCarloResult:
    if n_runs < 1:
        raise ConfigError("n_runs must be at least 1")
    rows = [run_scenario(cfg, k).metrics for k in range(n_runs)]
    summary = {
        "n_runs": n_runs,
        "base_seed": cfg.seed,
        "accept_rate": _rate(r.accepted for r in rows),
        "valley_found_rate": _rate(r.valley_found for r in rows),
        "geometry_pass_rate": _rate(r.geometry_ok for r in rows),
        "mean_residual_std_fwd": _nanmean(r.residual_std_fwd for r in rows),
        "mean_residual_std_rev": _nanmean(r.residual_std_rev for r in rows),
        "mean_depth_db": _nanmean(r.depth_db for r in rows),
        "mean_width_s": _nanmean(r.width_s for r in rows),
        "failed_checks": _failure_histogram(rows),
    }
    return MonteCarloResult(config=cfg, rows=rows, summary=summary)


def _failure_histogram(rows: list[RunMetrics]) -> dict[str, int]:
    hist: dict[str, int] = {}
    for r in rows:
        if r.failed_check:
            hist[r.failed_check] = hist.get(r.failed_check, 0) + 1
    return dict(sorted(hist.items()))


@dataclass(frozen=True)
class RocPoint:
    threshold_db: float
    fpr: float
    tpr: float


def roc_curve(legit_stds, attack_stds, thresholds=None) -> list[RocPoint]:
    """Threshold sweep over the two populations' decision statistics."""
    legit = np.asarray(legit_stds, dtype=float)
    attack = np.asarray(attack_stds, dtype=float)
    if len(legit) == 0 or len(attack) == 0:
        raise ConfigError("both populations must be nonempty")
    if thresholds is None:
        pooled = np.concatenate([legit, attack])
        thresholds = np.linspace(pooled.min(), pooled.max(), ROC_SWEEP_POINTS)
    points = []
    for tau in np.asarray(thresholds, dtype=float):
        points.append(RocPoint(threshold_db=float(tau),
                               fpr=float(np.mean(legit > tau)),
                               tpr=float(np.mean(attack > tau))))
    return points


def roc_auc(points: list[RocPoint]) -> float:
    """Area under the (fpr, tpr) curve, anchored at (0,0) and (1,1)."""
    pts = sorted([(p.fpr, p.tpr) for p in points])
    xs = [0.0] + [p[0] for p in pts] + [1.0]
    ys = [0.0] + [p[1] for p in pts] + [1.0]
    return float(np.trapezoid(ys, xs))


def best_operating_point(points: list[RocPoint], max_fpr: float,
                         ) -> RocPoint | None:
    """Point maximizing tpr subject to fpr <= max_fpr, or None."""
    feasible = [p for p in points if p.fpr <= max_fpr]
    if not feasible:
        return None
    return max(feasible, key=lambda p: (p.tpr, -p.threshold_db))


def legit_variant(cfg: ScenarioConfig) -> ScenarioConfig:
    """The same scenario without the interceptor."""
    return cfg.model_copy(update={"attacker": None})


@dataclass
class RocResult:
    points: list[RocPoint]
    auc: float
    legit_summary: dict
    attack_summary: dict
    n_legit: int
    n_attack: int


def roc_for_scenario(cfg: ScenarioConfig, n_runs: int) -> RocResult:
    """Paired legit/attack sweeps and the variation-statistic ROC."""
    if cfg.attacker is None:
        raise ConfigError("ROC needs a scenario with an attacker")
    legit = monte_carlo(legit_variant(cfg), n_runs)
    attack = monte_carlo(cfg, n_runs)
    legit_stats = legit.decision_stats()
    attack_stats = attack.decision_stats()
    points = roc_curve(legit_stats, attack_stats)
    return RocResult(points=points, auc=roc_auc(points),
                     legit_summary=legit.summary, attack_summary=attack.summary,
                     n_legit=len(legit_stats), n_attack=len(attack_stats))


@dataclass
class CalibrationResult:
    environment: str
    target_fpr: float
    target_tpr: float
    feasible: bool
    threshold_db: float | None
    achieved_fpr: float | None
    achieved_tpr: float | None
    best_point: RocPoint | None


def calibrate_threshold(cfg: ScenarioConfig, target_fpr: float, target_tpr: float,
                        n_runs: int = 500) -> CalibrationResult:
    """Pick the variation threshold meeting the rate targets, if any.

    Among thresholds with fpr <= target, the one maximizing tpr is
    returned; infeasible targets yield the best achievable point.
    """
    roc = roc_for_scenario(cfg, n_runs)
    best = best_operating_point(roc.points, target_fpr)
    if best is not None and best.tpr > target_tpr:
        return CalibrationResult(environment=cfg.environment,
                                 target_fpr=target_fpr, target_tpr=target_tpr,
                                 feasible=True, threshold_db=best.threshold_db,
                                 achieved_fpr=best.fpr, achieved_tpr=best.tpr,
                                 best_point=best)
    fallback = best if best is not None else max(
        roc.points, key=lambda p: p.tpr - p.fpr)
    return CalibrationResult(environment=cfg.environment,
                             target_fpr=target_fpr, target_tpr=target_tpr,
                             feasible=False, threshold_db=None,
                             achieved_fpr=fallback.fpr, achieved_tpr=fallback.tpr,
                             best_point=fallback)


def imperfect_swipe_suite(seed: int, n_runs: int = 200,
                          environment: str = "office") -> dict[str, dict]:
    """Valley detectability of the imperfect pairing motions."""
    table = {}
    for kind in IMPERFECT_MOTIONS:
        cfg = ScenarioConfig(environment=environment, seed=seed,
                             trajectory={"kind": kind})
        mc = monte_carlo(cfg, n_runs)
        table[kind] = {
            "valley_found_rate": mc.summary["valley_found_rate"],
            "valley_pass_rate": mc.summary["geometry_pass_rate"],
            "accept_rate": mc.summary["accept_rate"],
            "mean_depth_db": mc.summary["mean_depth_db"],
            "mean_width_s": mc.summary["mean_width_s"],
        }
    return table


# ---------------------------------------------------------------------------
# output writers

CSV_COLUMNS = ("seed", "accepted", "failed_check", "residual_std_fwd",
               "residual_std_rev", "depth_db", "width_s")


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return "" if math.isnan(value) else f"{value:.6f}"
    return str(value)


def write_runs_csv(path: str | Path, result: MonteCarloResult) -> None:
    """One row per run; seed identifies the run's stream as base:index."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for r in result.rows:
            writer.writerow([
                f"{r.seed}:{r.run_index}",
                _fmt(r.accepted), _fmt(r.failed_check),
                _fmt(r.residual_std_fwd), _fmt(r.residual_std_rev),
                _fmt(r.depth_db), _fmt(r.width_s),
            ])


def dump_json(path: str | Path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def roc_payload(roc: RocResult) -> dict:
    return {
        "points": [asdict(p) for p in roc.points],
        "auc": roc.auc,
        "n_legit": roc.n_legit,
        "n_attack": roc.n_attack,
        "legit_summary": roc.legit_summary,
        "attack_summary": roc.attack_summary,
    }
