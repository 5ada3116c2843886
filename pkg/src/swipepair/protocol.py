"""The four-stage pairing flow between two simulated devices.

Stage 1 exchanges n probe packets with per-probe uniformly randomized Tx
power while one device swipes past the other; each side records its own
Tx and Rx series.  Stage 2 seals the records under the session key
derived from the key exchange and swaps them with the half-block
interlock.  Stage 3 reconstructs the bidirectional pathloss from own and
peer-claimed powers.  Stage 4 accepts only if the valley shape and the
fading-variation checks pass on both devices.

With an interceptor configured, both victims unknowingly pair with it:
probes traverse the victim-interceptor links and the records received
through the interlock are the interceptor's falsified claims.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import adversary, crypto
from .adversary import AttackerProfile, FalsifiedReport
from .channel import ChannelParams, Trajectory, observed_deterministic
from .detect import (
    DEFAULT_SMOOTH_WINDOW,
    GeometryGates,
    ValleyDetectionParams,
    ValleyReport,
    VariationReport,
    build_valley_report,
    check_valley_geometry,
    detect_signals,
    locate_extent,
    smooth_series,
    variation_check,
)
from .errors import (
    ConfigError,
    FramingError,
    KeyAgreementError,
    OrderingViolation,
    RecordFormatError,
)
from .records import PowerRecord

TRANSCRIPT_SCHEMA_VERSION = 1

FAILED_CHECKS = ("valley-shape", "fading-variation", "key-agreement",
                 "interlock-ordering", "framing")


@dataclass(frozen=True)
class PathlossSeries:
    """Bidirectional reconstructed pathloss with probe timestamps."""

    pl_fwd_db: np.ndarray  # own Tx minus peer-claimed Rx
    pl_rev_db: np.ndarray  # peer-claimed Tx minus own Rx
    times_s: np.ndarray

    @property
    def n(self) -> int:
        return len(self.times_s)

    @property
    def mean_db(self) -> np.ndarray:
        return 0.5 * (self.pl_fwd_db + self.pl_rev_db)


def probe_times(n: int, rate_hz: float) -> np.ndarray:
    """Uniform probe timestamps: probe i (1-based) at (i-1)/rate."""
    if rate_hz <= 0:
        raise ConfigError("rate_hz must be positive")
    if n < 1:
        raise ConfigError("probe count must be at least 1")
    return np.arange(n, dtype=float) / rate_hz


@dataclass(frozen=True)
class LinkTruth:
    """Ground truth of one simulated bidirectional link (for analysis only)."""

    distance_m: np.ndarray
    fading_db: np.ndarray
    fading_sigma_db: np.ndarray


@dataclass(frozen=True)
class ProbeStageResult:
    record_a: PowerRecord
    record_b: PowerRecord
    times_s: np.ndarray
    truth: LinkTruth


def _draw_tx(n: int, tx_range_dbm: tuple[float, float],
             tx_fixed_dbm: float | None, rng: np.random.Generator) -> np.ndarray:
    if tx_fixed_dbm is not None:
        return np.full(n, float(tx_fixed_dbm))
    lo, hi = tx_range_dbm
    return rng.uniform(lo, hi, size=n)


def run_probe_stage(traj: Trajectory, params: ChannelParams,
                    tx_range_dbm: tuple[float, float], n: int, rate_hz: float,
                    rng: np.random.Generator,
                    fading_sigma: Callable | float | None = None,
                    tx_fixed_dbm: float | None = None,
                    quantize_db: float | None = None) -> ProbeStageResult:
    """Stage 1 over the legitimate A-B link.

    Channel reciprocity is modelled as one shared fading draw per
    bidirectional probe pair (replies are immediate), with independent
    measurement errors per receiving device.  ``fading_sigma`` may be a
    constant or a callable of distance; None falls back to the value in
    ``params``.  ``quantize_db`` optionally rounds recorded Rx powers to
    emulate coarse RSSI reporting.
    """
    times = probe_times(n, rate_hz)
    if times[-1] > traj.duration_s:
        raise ConfigError(
            f"probe window {times[-1]:.3f}s exceeds trajectory duration "
            f"{traj.duration_s:.3f}s")
    d = np.asarray(traj.distance_at(times), dtype=float)
    det = observed_deterministic(d, params)
    sigma_f = _resolve_sigma(fading_sigma, params, d)
    chi = rng.normal(0.0, 1.0, size=n) * sigma_f
    e_b = rng.normal(0.0, params.sigma_meas_db, size=n)  # error at B's receiver
    e_a = rng.normal(0.0, params.sigma_meas_db, size=n)  # error at A's receiver
    tx_a = _draw_tx(n, tx_range_dbm, tx_fixed_dbm, rng)
    tx_b = _draw_tx(n, tx_range_dbm, tx_fixed_dbm, rng)
    rx_b = tx_a - (det + chi + e_b)
    rx_a = tx_b - (det + chi + e_a)
    if quantize_db:
        rx_b = np.round(rx_b / quantize_db) * quantize_db
        rx_a = np.round(rx_a / quantize_db) * quantize_db
    truth = LinkTruth(distance_m=d, fading_db=chi, fading_sigma_db=np.broadcast_to(
        np.asarray(sigma_f, dtype=float), (n,)).copy())
    return ProbeStageResult(record_a=PowerRecord(tx_a, rx_a),
                            record_b=PowerRecord(tx_b, rx_b),
                            times_s=times, truth=truth)


def _resolve_sigma(fading_sigma, params: ChannelParams, d: np.ndarray):
    if fading_sigma is None:
        return params.sigma_fading_db
    if callable(fading_sigma):
        return np.asarray(fading_sigma(d), dtype=float)
    return float(fading_sigma)


def compute_pathloss(own_tx, peer_rx_claimed, peer_tx_claimed, own_rx,
                     times_s) -> PathlossSeries:
    """Stage 3: bidirectional pathloss from own and peer-claimed powers."""
    seqs = [np.asarray(s, dtype=float)
            for s in (own_tx, peer_rx_claimed, peer_tx_claimed, own_rx, times_s)]
    n = len(seqs[0])
    if any(len(s) != n for s in seqs):
        raise FramingError("power/time series lengths disagree")
    own_tx, peer_rx, peer_tx, own_rx, times = seqs
    return PathlossSeries(pl_fwd_db=own_tx - peer_rx,
                          pl_rev_db=peer_tx - own_rx,
                          times_s=times)


@dataclass(frozen=True)
class AuthResult:
    valley: ValleyReport
    variation_fwd: VariationReport | None
    variation_rev: VariationReport | None
    accepted: bool
    failed_check: str | None


def authenticate(series: PathlossSeries, detect_params: ValleyDetectionParams,
                 gates: GeometryGates, variation_threshold_db: float,
                 cutoff_fraction: float = 0.01,
                 smooth_window: int = DEFAULT_SMOOTH_WINDOW) -> AuthResult:
    """Stage 4 on one device.

    The valley is detected and fitted on the mean of the forward and
    reverse series (both are observable to the device and share the
    deterministic term); detection sees a lightly smoothed copy, while
    the model fit and the fading-variation residuals use raw data.  The
    variation check runs on each direction against the shared fit, and
    both directions must pass.
    """
    if series.n <= detect_params.lag:
        raise ConfigError("series shorter than detector lag")
    mean = series.mean_db
    signals = detect_signals(smooth_series(mean, smooth_window), detect_params)
    fit = locate_extent(mean, signals, cutoff_fraction)
    valley = build_valley_report(fit, series.times_s)
    if fit is None or not check_valley_geometry(valley, gates):
        return AuthResult(valley=valley, variation_fwd=None, variation_rev=None,
                          accepted=False, failed_check="valley-shape")
    sl = slice(fit.start_idx, fit.end_idx + 1)
    model = fit.model(np.arange(series.n)[sl])
    var_fwd = variation_check(series.pl_fwd_db[sl], model, variation_threshold_db)
    var_rev = variation_check(series.pl_rev_db[sl], model, variation_threshold_db)
    if not (var_fwd.passed and var_rev.passed):
        return AuthResult(valley=valley, variation_fwd=var_fwd, variation_rev=var_rev,
                          accepted=False, failed_check="fading-variation")
    return AuthResult(valley=valley, variation_fwd=var_fwd, variation_rev=var_rev,
                      accepted=True, failed_check=None)


@dataclass
class DeviceView:
    """What one device ends the run with (its own authentication inputs)."""

    name: str
    series: PathlossSeries | None = None
    auth: AuthResult | None = None


@dataclass
class Transcript:
    """Audit log of a pairing run."""

    times_s: np.ndarray
    record_a: PowerRecord
    record_b: PowerRecord
    claimed_to_a: PowerRecord | None = None  # None => honest peer record
    claimed_to_b: PowerRecord | None = None
    truth: dict[str, LinkTruth] = field(default_factory=dict)
    interlock_frames: list[dict] = field(default_factory=list)
    notes: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        def rec(r: PowerRecord | None):
            if r is None:
                return None
            return {"tx_dbm": r.tx_dbm.tolist(), "rx_dbm": r.rx_dbm.tolist()}

        return {
            "schema_version": TRANSCRIPT_SCHEMA_VERSION,
            "times_s": self.times_s.tolist(),
            "device_a": rec(self.record_a),
            "device_b": rec(self.record_b),
            "claimed_to_a": rec(self.claimed_to_a),
            "claimed_to_b": rec(self.claimed_to_b),
            "links": {
                name: {
                    "distance_m": t.distance_m.tolist(),
                    "fading_db": t.fading_db.tolist(),
                    "fading_sigma_db": t.fading_sigma_db.tolist(),
                } for name, t in self.truth.items()
            },
            "interlock_frames": self.interlock_frames,
            "notes": self.notes,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True)


@dataclass(frozen=True)
class PairingOutcome:
    accepted: bool
    failed_check: str | None
    device_a: DeviceView
    device_b: DeviceView
    transcript: Transcript

    def __post_init__(self) -> None:
        if self.failed_check is not None and self.failed_check not in FAILED_CHECKS:
            raise ConfigError(f"unknown failed check {self.failed_check!r}")


@dataclass(frozen=True)
class PairingSettings:
    """Knobs of a single pairing run (environment-independent)."""

    tx_range_dbm: tuple[float, float] = (0.0, 30.0)
    tx_fixed_dbm: float | None = None
    n_probes: int = 500
    rate_hz: float = 500.0
    detector: ValleyDetectionParams = ValleyDetectionParams()
    gates: GeometryGates = GeometryGates()
    variation_threshold_db: float = 1.27
    cutoff_fraction: float = 0.01
    smooth_window: int = DEFAULT_SMOOTH_WINDOW
    quantize_db: float | None = None

    @property
    def tx_randomized(self) -> bool:
        return self.tx_fixed_dbm is None and self.tx_range_dbm[0] < self.tx_range_dbm[1]


def _interlock_session(key_a: bytes, key_b: bytes, rec_a: PowerRecord,
                       rec_b: PowerRecord, n: int, transcript: Transcript,
                       session: str, violate: bool = False,
                       ) -> tuple[PowerRecord, PowerRecord]:
    """Seal, exchange, and reopen both records; logs every frame."""
    ct_a = crypto.seal_power_record(key_a, rec_a)
    ct_b = crypto.seal_power_record(key_b, rec_b)
    blocks = len(ct_a) // crypto.BLOCK_BYTES
    ep_a = crypto.InterlockEndpoint(f"{session}:a", key_a, ct_a, blocks)
    ep_b = crypto.InterlockEndpoint(f"{session}:b", key_b, ct_b, blocks)
    log: list[dict] = []
    try:
        got_a, got_b = crypto.interlock_exchange(
            ep_a, ep_b, expected_n=n,
            premature_second_half_from=ep_b if violate else None,
            frame_log=log)
    finally:
        transcript.interlock_frames.append(
            {"session": session, "blocks": blocks, "frames": log})
    return got_a, got_b


def pair(traj: Trajectory, params: ChannelParams, settings: PairingSettings,
         rng: np.random.Generator,
         attacker: AttackerProfile | None = None,
         fading_sigma: Callable | float | None = None,
         inject_fault: str | None = None) -> PairingOutcome:
    """Run the full pairing flow and return the mutual outcome.

    ``inject_fault`` is a diagnostic hook: 'bad-public-key' hands one
    side a degenerate key-exchange point, 'truncate-record' drops probes
    from one sealed record.  An attacker with ``violate_interlock`` sends
    a second-half frame first.
    """
    view_a = DeviceView("A")
    view_b = DeviceView("B")
    try:
        if attacker is None:
            return _pair_honest(traj, params, settings, rng, fading_sigma,
                                inject_fault, view_a, view_b)
        return _pair_intercepted(traj, params, settings, rng, attacker,
                                 fading_sigma, view_a, view_b)
    except KeyAgreementError:
        return _aborted("key-agreement", view_a, view_b, settings)
    except OrderingViolation:
        return _aborted("interlock-ordering", view_a, view_b, settings)
    except (FramingError, RecordFormatError):
        return _aborted("framing", view_a, view_b, settings)


def _aborted(check: str, view_a: DeviceView, view_b: DeviceView,
             settings: PairingSettings) -> PairingOutcome:
    empty = Transcript(times_s=probe_times(settings.n_probes, settings.rate_hz),
                       record_a=PowerRecord(np.empty(0), np.empty(0)),
                       record_b=PowerRecord(np.empty(0), np.empty(0)),
                       notes={"aborted": check})
    return PairingOutcome(accepted=False, failed_check=check,
                          device_a=view_a, device_b=view_b, transcript=empty)


def _session_keys(rng: np.random.Generator, inject_fault: str | None,
                  ) -> tuple[bytes, bytes]:
    """ECDH both ways; returns the (identical) session keys of A and B."""
    kp_a = crypto.generate_keypair(rng)
    kp_b = crypto.generate_keypair(rng)
    peer_pub_for_a = kp_b.public_bytes
    if inject_fault == "bad-public-key":
        peer_pub_for_a = b"\x00" * 32  # degenerate point, must be rejected
    secret_a = crypto.derive_shared_secret(kp_a.private_bytes, peer_pub_for_a)
    secret_b = crypto.derive_shared_secret(kp_b.private_bytes, kp_a.public_bytes)
    return crypto.derive_session_key(secret_a), crypto.derive_session_key(secret_b)


def _pair_honest(traj, params, settings: PairingSettings, rng, fading_sigma,
                 inject_fault, view_a: DeviceView, view_b: DeviceView) -> PairingOutcome:
    stage1 = run_probe_stage(traj, params, settings.tx_range_dbm,
                             settings.n_probes, settings.rate_hz, rng,
                             fading_sigma=fading_sigma,
                             tx_fixed_dbm=settings.tx_fixed_dbm,
                             quantize_db=settings.quantize_db)
    transcript = Transcript(times_s=stage1.times_s, record_a=stage1.record_a,
                            record_b=stage1.record_b,
                            truth={"ab": stage1.truth})
    key_a, key_b = _session_keys(rng, inject_fault)
    rec_a_sent = stage1.record_a
    if inject_fault == "truncate-record":
        rec_a_sent = PowerRecord(stage1.record_a.tx_dbm[:-1],
                                 stage1.record_a.rx_dbm[:-1])
    rec_b_at_a, rec_a_at_b = _interlock_session(
        key_a, key_b, rec_a_sent, stage1.record_b, settings.n_probes,
        transcript, session="ab")
    # interlock returns (what a received, what b received); a received b's
    # record and vice versa
    view_a.series = compute_pathloss(stage1.record_a.tx_dbm, rec_b_at_a.rx_dbm,
                                     rec_b_at_a.tx_dbm, stage1.record_a.rx_dbm,
                                     stage1.times_s)
    view_b.series = compute_pathloss(stage1.record_b.tx_dbm, rec_a_at_b.rx_dbm,
                                     rec_a_at_b.tx_dbm, stage1.record_b.rx_dbm,
                                     stage1.times_s)
    return _judge(view_a, view_b, settings, transcript)


def _judge(view_a: DeviceView, view_b: DeviceView, settings: PairingSettings,
           transcript: Transcript) -> PairingOutcome:
    view_a.auth = authenticate(view_a.series, settings.detector, settings.gates,
                               settings.variation_threshold_db,
                               settings.cutoff_fraction, settings.smooth_window)
    view_b.auth = authenticate(view_b.series, settings.detector, settings.gates,
                               settings.variation_threshold_db,
                               settings.cutoff_fraction, settings.smooth_window)
    accepted = view_a.auth.accepted and view_b.auth.accepted
    failed = None
    if not accepted:
        failed = view_a.auth.failed_check or view_b.auth.failed_check
    return PairingOutcome(accepted=accepted, failed_check=failed,
                          device_a=view_a, device_b=view_b, transcript=transcript)


def _intercepted_probe_stage(traj: Trajectory, params: ChannelParams,
                             settings: PairingSettings, profile: AttackerProfile,
                             rng: np.random.Generator, fading_sigma):
    """Stage 1 with all probes routed through the interceptor.

    Returns per-victim own records, the interceptor's observations, and
    ground-truth link data.  The interceptor transmits at its own
    randomized power; its receivers see the victim-interceptor links.
    """
    n = settings.n_probes
    times = probe_times(n, settings.rate_hz)
    if times[-1] > traj.duration_s:
        raise ConfigError("probe window exceeds trajectory duration")
    d_ab = np.asarray(traj.distance_at(times), dtype=float)
    d_am = np.asarray(traj.distance_to_point(times, profile.position), dtype=float)
    d_bm = np.full(n, float(np.hypot(*profile.position)))

    sigma_meas_m = profile.resolved_measurement_noise(params.sigma_meas_db)

    def link(d_series):
        sigma = _resolve_sigma(fading_sigma, params, d_series)
        det = observed_deterministic(d_series, params)
        chi = rng.normal(0.0, 1.0, size=n) * sigma
        return det, chi, np.broadcast_to(np.asarray(sigma, dtype=float), (n,)).copy()

    det_am, chi_am, sig_am = link(d_am)
    det_bm, chi_bm, sig_bm = link(d_bm)

    tx_a = _draw_tx(n, settings.tx_range_dbm, settings.tx_fixed_dbm, rng)
    tx_b = _draw_tx(n, settings.tx_range_dbm, settings.tx_fixed_dbm, rng)
    tx_m_to_a = _draw_tx(n, settings.tx_range_dbm, None, rng)
    tx_m_to_b = _draw_tx(n, settings.tx_range_dbm, None, rng)

    e_a = rng.normal(0.0, params.sigma_meas_db, size=n)
    e_b = rng.normal(0.0, params.sigma_meas_db, size=n)
    e_m_from_a = (rng.normal(0.0, sigma_meas_m, size=n) if sigma_meas_m > 0
                  else np.zeros(n))
    e_m_from_b = (rng.normal(0.0, sigma_meas_m, size=n) if sigma_meas_m > 0
                  else np.zeros(n))

    # reciprocity per link: the same fading draw serves both directions
    rx_m_from_a = tx_a - (det_am + chi_am + e_m_from_a)
    rx_a = tx_m_to_a - (det_am + chi_am + e_a)
    rx_m_from_b = tx_b - (det_bm + chi_bm + e_m_from_b)
    rx_b = tx_m_to_b - (det_bm + chi_bm + e_b)
    if settings.quantize_db:
        q = settings.quantize_db
        rx_a, rx_b = (np.round(r / q) * q for r in (rx_a, rx_b))

    truth = {
        "ab": LinkTruth(d_ab, np.zeros(n), np.zeros(n)),
        "am": LinkTruth(d_am, chi_am, sig_am),
        "bm": LinkTruth(d_bm, chi_bm, sig_bm),
    }
    return {
        "times": times, "d_ab": d_ab, "d_am": d_am, "d_bm": d_bm,
        "record_a": PowerRecord(tx_a, rx_a), "record_b": PowerRecord(tx_b, rx_b),
        "tx_m_to_a": tx_m_to_a, "tx_m_to_b": tx_m_to_b,
        "rx_m_from_a": rx_m_from_a, "rx_m_from_b": rx_m_from_b,
        "truth": truth,
    }


def _falsify(profile: AttackerProfile, tx_m, rx_m, d_vm, d_ab,
             params: ChannelParams, settings: PairingSettings,
             rng: np.random.Generator) -> FalsifiedReport:
    """Apply the profile's strategy for one victim."""
    if profile.kind == "general":
        return adversary.general_report(tx_m, rx_m)
    if profile.kind == "advanced":
        d_vm_est = adversary.estimate_distances(d_vm, profile.sigma_d, rng)
        d_ab_est = adversary.estimate_distances(d_ab, profile.sigma_d, rng)
        return adversary.advanced_report(tx_m, rx_m, d_vm_est, d_ab_est, params.alpha)
    if profile.kind == "supreme":
        return adversary.supreme_report(tx_m, rx_m, d_vm, d_ab, params.alpha)
    if profile.kind == "fixed-power-exploit":
        if settings.tx_randomized or settings.tx_fixed_dbm is None:
            raise ConfigError(
                "fixed-power exploit requires a fixed, known victim Tx power")
        return adversary.fixed_power_exploit(
            settings.tx_fixed_dbm, tx_m, rx_m, d_vm, d_ab, params,
            tx_randomization_enabled=False)
    if profile.kind == "averaging":
        return adversary.averaging_attack(tx_m, rx_m, d_vm, d_ab, params,
                                          dither_db=profile.dither_db, rng=rng)
    raise ConfigError(f"unknown attacker kind {profile.kind!r}")


def _pair_intercepted(traj, params, settings: PairingSettings, rng,
                      profile: AttackerProfile, fading_sigma,
                      view_a: DeviceView, view_b: DeviceView) -> PairingOutcome:
    stage1 = _intercepted_probe_stage(traj, params, settings, profile, rng,
                                      fading_sigma)
    claims_to_a = _falsify(profile, stage1["tx_m_to_a"], stage1["rx_m_from_a"],
                           stage1["d_am"], stage1["d_ab"], params, settings, rng)
    claims_to_b = _falsify(profile, stage1["tx_m_to_b"], stage1["rx_m_from_b"],
                           stage1["d_bm"], stage1["d_ab"], params, settings, rng)
    rec_m_to_a = PowerRecord(claims_to_a.tx_claimed_dbm, claims_to_a.rx_claimed_dbm)
    rec_m_to_b = PowerRecord(claims_to_b.tx_claimed_dbm, claims_to_b.rx_claimed_dbm)
    transcript = Transcript(times_s=stage1["times"], record_a=stage1["record_a"],
                            record_b=stage1["record_b"], claimed_to_a=rec_m_to_a,
                            claimed_to_b=rec_m_to_b, truth=stage1["truth"],
                            notes={"attacker": profile.kind})

    # two independent key agreements: A<->M and M<->B
    kp_a = crypto.generate_keypair(rng)
    kp_b = crypto.generate_keypair(rng)
    kp_m = crypto.generate_keypair(rng)
    key_am = crypto.derive_session_key(
        crypto.derive_shared_secret(kp_a.private_bytes, kp_m.public_bytes))
    key_mb = crypto.derive_session_key(
        crypto.derive_shared_secret(kp_m.private_bytes, kp_b.public_bytes))

    # endpoint order in each session: (victim, interceptor) and
    # (interceptor, victim); each victim receives the interceptor's claims
    rec_m_at_a, _ = _interlock_session(key_am, key_am, stage1["record_a"],
                                       rec_m_to_a, settings.n_probes, transcript,
                                       session="am",
                                       violate=profile.violate_interlock)
    _, rec_m_at_b = _interlock_session(key_mb, key_mb, rec_m_to_b,
                                       stage1["record_b"], settings.n_probes,
                                       transcript, session="mb")
    view_a.series = compute_pathloss(stage1["record_a"].tx_dbm, rec_m_at_a.rx_dbm,
                                     rec_m_at_a.tx_dbm, stage1["record_a"].rx_dbm,
                                     stage1["times"])
    view_b.series = compute_pathloss(stage1["record_b"].tx_dbm, rec_m_at_b.rx_dbm,
                                     rec_m_at_b.tx_dbm, stage1["record_b"].rx_dbm,
                                     stage1["times"])
    return _judge(view_a, view_b, settings, transcript)
