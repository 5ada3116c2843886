"""Man-in-the-middle falsification strategies for the probe stage.

The interceptor sits between the two victims, runs a separate pairing
with each, and substitutes the Tx/Rx power information it discloses so
the victims reconstruct a pathloss series resembling the legitimate
short link.  None of the strategies can alter the actual channel draws:
only claimed values change, so the fading of the attacker link always
remains in the victim-side residuals (unless the victims gave it away by
transmitting at a fixed, known power).

Strategy summary, with d_vm the attacker-victim and d_ab the
device-device distance:

- general: claims its true values; the victim sees the attacker link.
- advanced: corrects claimed powers by 10*alpha*log10(d~_vm / d~_ab)
  using lognormally-perturbed distance estimates.
- supreme: the advanced correction with exact distances and no attacker
  measurement noise.
- fixed-power-exploit: with the victims' Tx power fixed and known, the
  per-probe fading of the attacker link is algebraically recoverable and
  is cancelled from the claims as well; defined only when Tx
  randomization is off.
- averaging: estimates the victims' mean Tx power and synthesizes claims
  from it; the victim-side residual then carries the full Tx
  randomization spread back.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelParams, observed_deterministic
from .errors import ConfigError

ATTACKER_KINDS = ("general", "advanced", "supreme", "fixed-power-exploit", "averaging")

# Strategies that assume perfect attacker-side knowledge/instrumentation.
_EXACT_KINDS = ("supreme", "fixed-power-exploit", "averaging")


@dataclass(frozen=True)
class AttackerProfile:
    """Attacker kind, geometry, and error parameters.

    ``position_m`` overrides the default placement, which is
    ``(0, distance_m)``: broadside of the swipe at the configured
    distance from the stationary device.  ``sigma_d`` is the relative
    (lognormal) distance-estimation error of the advanced attacker.
    ``measurement_noise_db`` of None means "same as the victims'
    receivers"; the exact-knowledge kinds force it to zero.
    """

    kind: str = "supreme"
    distance_m: float = 2.0
    position_m: tuple[float, float] | None = None
    sigma_d: float = 0.0
    measurement_noise_db: float | None = None
    dither_db: float = 0.0
    violate_interlock: bool = False

    def __post_init__(self) -> None:
        if self.kind not in ATTACKER_KINDS:
            raise ConfigError(f"unknown attacker kind {self.kind!r}")
        if self.sigma_d < 0:
            raise ConfigError("sigma_d must be nonnegative")
        if self.kind in _EXACT_KINDS:
            if self.sigma_d != 0:
                raise ConfigError(f"{self.kind} attacker has no estimation error")
            if self.measurement_noise_db not in (None, 0, 0.0):
                raise ConfigError(f"{self.kind} attacker has no measurement error")
            object.__setattr__(self, "measurement_noise_db", 0.0)
        if self.distance_m <= 0:
            raise ConfigError("attacker distance must be positive")

    @property
    def position(self) -> tuple[float, float]:
        return self.position_m if self.position_m is not None else (0.0, self.distance_m)

    def resolved_measurement_noise(self, victim_sigma_meas_db: float) -> float:
        if self.measurement_noise_db is None:
            return victim_sigma_meas_db
        return float(self.measurement_noise_db)


@dataclass(frozen=True)
class FalsifiedReport:
    """Claimed Tx/Rx power series the attacker discloses to one victim."""

    tx_claimed_dbm: np.ndarray
    rx_claimed_dbm: np.ndarray

    def __post_init__(self) -> None:
        tx = np.asarray(self.tx_claimed_dbm, dtype=float)
        rx = np.asarray(self.rx_claimed_dbm, dtype=float)
        if len(tx) != len(rx):
            raise ConfigError("claimed series must share one length")
        object.__setattr__(self, "tx_claimed_dbm", tx)
        object.__setattr__(self, "rx_claimed_dbm", rx)


def general_report(true_tx, true_rx) -> FalsifiedReport:
    """Identity: the general attacker discloses its actual values."""
    return FalsifiedReport(np.array(true_tx, dtype=float, copy=True),
                           np.array(true_rx, dtype=float, copy=True))


def estimate_distances(true_d, sigma_d: float, rng: np.random.Generator) -> np.ndarray:
    """Per-probe distance estimates d * exp(r), r ~ N(0, sigma_d^2)."""
    if sigma_d < 0:
        raise ConfigError("sigma_d must be nonnegative")
    d = np.asarray(true_d, dtype=float)
    r = rng.normal(0.0, 1.0, size=d.shape) * sigma_d
    return d * np.exp(r)


def _distance_correction(d_vm_est, d_ab_est, alpha: float) -> np.ndarray:
    return 10.0 * alpha * np.log10(np.asarray(d_vm_est, dtype=float)
                                   / np.asarray(d_ab_est, dtype=float))


def advanced_report(true_tx, true_rx, d_vm_est, d_ab_est, alpha: float) -> FalsifiedReport:
    """Distance-ratio correction of the disclosed powers.

    Claimed Rx is raised and claimed Tx lowered by
    10*alpha*log10(d~_vm/d~_ab), so the victim-side deterministic term
    becomes that of the legitimate short link.
    """
    if np.any(np.asarray(d_vm_est) <= 0) or np.any(np.asarray(d_ab_est) <= 0):
        raise ValueError("distance estimates must be positive")
    corr = _distance_correction(d_vm_est, d_ab_est, alpha)
    return FalsifiedReport(np.asarray(true_tx, dtype=float) - corr,
                           np.asarray(true_rx, dtype=float) + corr)


def supreme_report(true_tx, true_rx, d_vm_true, d_ab_true, alpha: float) -> FalsifiedReport:
    """Advanced correction with exact distances (zero estimation error)."""
    return advanced_report(true_tx, true_rx, d_vm_true, d_ab_true, alpha)


def recover_fading(known_fixed_tx: float, observed_rx, d_vm_true,
                   params: ChannelParams) -> np.ndarray:
    """Invert the link equation for the per-probe fading draws.

    Exact when the attacker has no measurement error and knows the
    victim's (fixed) Tx power and the full deterministic model.
    """
    return (known_fixed_tx - np.asarray(observed_rx, dtype=float)
            - observed_deterministic(np.asarray(d_vm_true, dtype=float), params))


def fixed_power_exploit(known_fixed_tx: float, true_tx, observed_rx,
                        d_vm_true, d_ab_true, params: ChannelParams,
                        tx_randomization_enabled: bool = False) -> FalsifiedReport:
    """Fading-cancelling falsification against a fixed, known Tx power.

    On top of the distance correction, the recovered fading is added to
    the claimed Rx and (by channel reciprocity) subtracted from the
    attacker's own transmit powers ``true_tx`` on the claimed-Tx side,
    leaving the victim's forward residual identically zero.  Only
    defined when the victims do not randomize their Tx power.
    """
    if tx_randomization_enabled:
        raise ConfigError(
            "fixed-power exploit requires Tx randomization to be disabled")
    chi = recover_fading(known_fixed_tx, observed_rx, d_vm_true, params)
    corr = _distance_correction(d_vm_true, d_ab_true, params.alpha)
    tx_claimed = np.asarray(true_tx, dtype=float) - corr - chi
    rx_claimed = np.asarray(observed_rx, dtype=float) + corr + chi
    return FalsifiedReport(tx_claimed, rx_claimed)


def averaging_attack(true_tx, observed_rx, d_vm_true, d_ab_true,
                     params: ChannelParams,
                     dither_db: float = 0.0,
                     rng: np.random.Generator | None = None) -> FalsifiedReport:
    """Mean-Tx-power estimation attack against randomized Tx.

    The attacker estimates the victims' average Tx power from its own
    observations plus the deterministic link model, then claims Rx
    values consistent with that average over the legitimate link.  The
    victim's forward residual becomes Tx[i] minus the Tx mean, i.e. the
    randomization spread itself.  Claimed Tx applies the exact-distance
    correction to the attacker's actual transmissions so the reverse
    series stays baseline-consistent.  A small optional dither
    decorrelates the otherwise deterministic Rx claims.
    """
    rx = np.asarray(observed_rx, dtype=float)
    det_vm = observed_deterministic(np.asarray(d_vm_true, dtype=float), params)
    det_ab = observed_deterministic(np.asarray(d_ab_true, dtype=float), params)
    mean_tx_est = float(np.mean(rx + det_vm))
    rx_claimed = np.broadcast_to(mean_tx_est - det_ab, rx.shape).astype(float)
    tx_claimed = (np.asarray(true_tx, dtype=float)
                  - _distance_correction(d_vm_true, d_ab_true, params.alpha))
    if dither_db > 0:
        if rng is None:
            raise ConfigError("dither requires a random source")
        rx_claimed = rx_claimed + rng.normal(0.0, dither_db, size=rx.shape)
        tx_claimed = tx_claimed + rng.normal(0.0, dither_db, size=rx.shape)
    return FalsifiedReport(tx_claimed, rx_claimed)
