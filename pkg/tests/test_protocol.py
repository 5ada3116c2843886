import json
import math

import numpy as np
import pytest

from swipepair.adversary import AttackerProfile
from swipepair.channel import ChannelParams, deterministic_pathloss
from swipepair.detect import GeometryGates, ValleyDetectionParams
from swipepair.errors import ConfigError, FramingError
from swipepair.presets import environment_preset, trajectory_preset
from swipepair.protocol import (
    PairingSettings,
    PathlossSeries,
    authenticate,
    compute_pathloss,
    pair,
    probe_times,
    run_probe_stage,
)
from swipepair.records import PowerRecord

OFFICE = environment_preset("office")
NOMINAL = trajectory_preset("symmetric-swipe")


def default_settings(**kw) -> PairingSettings:
    return PairingSettings(**kw)


class TestProbeTimes:
    def test_500_probes_span_one_second_half_open(self):
        t = probe_times(500, 500.0)
        assert t[0] == 0.0
        assert t[-1] == pytest.approx(0.998)
        assert np.all(t < 1.0)
        assert np.allclose(np.diff(t), 1 / 500.0)

    def test_bad_rate_rejected(self):
        with pytest.raises(ConfigError):
            probe_times(10, 0.0)


class TestRunProbeStage:
    def test_zero_noise_gives_reciprocal_closed_form(self):
        params = ChannelParams(alpha=2.0)
        stage = run_probe_stage(NOMINAL, params, (0.0, 30.0), 500, 500.0,
                                np.random.default_rng(1))
        pl_ab = stage.record_a.tx_dbm - stage.record_b.rx_dbm
        pl_ba = stage.record_b.tx_dbm - stage.record_a.rx_dbm
        expected = deterministic_pathloss(stage.truth.distance_m, params)
        assert np.allclose(pl_ab, expected, atol=1e-9)
        assert np.allclose(pl_ba, expected, atol=1e-9)

    def test_seeded_runs_identical(self):
        params = OFFICE.channel
        a = run_probe_stage(NOMINAL, params, (0.0, 30.0), 200, 500.0,
                            np.random.default_rng(9),
                            fading_sigma=OFFICE.fading_sigma)
        b = run_probe_stage(NOMINAL, params, (0.0, 30.0), 200, 500.0,
                            np.random.default_rng(9),
                            fading_sigma=OFFICE.fading_sigma)
        assert a.record_a == b.record_a
        assert a.record_b == b.record_b
        assert np.array_equal(a.truth.fading_db, b.truth.fading_db)

    def test_tx_powers_inside_range(self):
        stage = run_probe_stage(NOMINAL, OFFICE.channel, (0.0, 30.0), 300, 500.0,
                                np.random.default_rng(2))
        for rec in (stage.record_a, stage.record_b):
            assert np.all(rec.tx_dbm >= 0.0)
            assert np.all(rec.tx_dbm <= 30.0)

    def test_fixed_tx_power(self):
        stage = run_probe_stage(NOMINAL, OFFICE.channel, (0.0, 30.0), 200, 500.0,
                                np.random.default_rng(3), tx_fixed_dbm=20.0)
        assert np.all(stage.record_a.tx_dbm == 20.0)

    def test_window_longer_than_trajectory_rejected(self):
        with pytest.raises(ConfigError):
            run_probe_stage(NOMINAL, OFFICE.channel, (0.0, 30.0), 2000, 500.0,
                            np.random.default_rng(4))

    def test_quantization_rounds_rx(self):
        stage = run_probe_stage(NOMINAL, OFFICE.channel, (0.0, 30.0), 200, 500.0,
                                np.random.default_rng(5), quantize_db=1.0)
        assert np.allclose(stage.record_a.rx_dbm, np.round(stage.record_a.rx_dbm))

    def test_reciprocity_shares_one_fading_draw(self):
        # with measurement noise silenced the two directions differ by
        # nothing at all; with it on, they differ by the error draws only
        params = ChannelParams(alpha=2.0, sigma_meas_db=0.0)
        stage = run_probe_stage(NOMINAL, params, (0.0, 30.0), 100, 500.0,
                                np.random.default_rng(6), fading_sigma=1.5)
        pl_ab = stage.record_a.tx_dbm - stage.record_b.rx_dbm
        pl_ba = stage.record_b.tx_dbm - stage.record_a.rx_dbm
        assert np.allclose(pl_ab, pl_ba, atol=1e-9)
        assert np.std(stage.truth.fading_db) > 0.5


class TestComputePathloss:
    def test_reference_subtraction(self):
        s = compute_pathloss([30.0], [9.954], [30.0], [9.954], [0.0])
        assert s.pl_fwd_db[0] == pytest.approx(20.046)
        assert s.pl_rev_db[0] == pytest.approx(20.046)

    def test_claimed_equals_tx_gives_zero(self):
        tx = np.array([1.0, 2.0, 3.0])
        s = compute_pathloss(tx, tx, tx, tx, np.arange(3) / 500.0)
        assert np.all(s.pl_fwd_db == 0.0)
        assert np.all(s.pl_rev_db == 0.0)

    def test_length_mismatch_rejected(self):
        with pytest.raises(FramingError):
            compute_pathloss([1.0, 2.0], [1.0], [1.0, 2.0], [1.0, 2.0], [0.0, 0.1])


class TestRecordWireFormat:
    def test_golden_bytes(self):
        rec = PowerRecord(np.array([0.0, 30.0]), np.array([-12.34, 5.0]))
        data = rec.to_bytes()
        assert data == bytes.fromhex("0002" "0000" "0bb8" "fb2e" "01f4")
        assert PowerRecord.from_bytes(data, expected_n=2) == rec

    def test_declared_count_must_match_length(self):
        rec = PowerRecord(np.zeros(3), np.zeros(3))
        data = rec.to_bytes()
        from swipepair.errors import RecordFormatError

        with pytest.raises(RecordFormatError):
            PowerRecord.from_bytes(data[:-2])
        with pytest.raises(RecordFormatError):
            PowerRecord.from_bytes(data, expected_n=4)

    def test_out_of_range_power_rejected(self):
        from swipepair.errors import RecordFormatError

        with pytest.raises(RecordFormatError):
            PowerRecord(np.array([500.0]), np.array([0.0])).to_bytes()


class TestAuthenticate:
    def _series(self, fwd, rev=None):
        fwd = np.asarray(fwd, dtype=float)
        rev = fwd if rev is None else np.asarray(rev, dtype=float)
        return PathlossSeries(pl_fwd_db=fwd, pl_rev_db=rev,
                              times_s=np.arange(len(fwd)) / 500.0)

    def test_flat_series_rejected(self):
        res = authenticate(self._series(np.full(500, 55.0)),
                           ValleyDetectionParams(), GeometryGates(), 1.27)
        assert not res.accepted
        assert res.failed_check == "valley-shape"

    def test_legit_shape_with_big_residuals_fails_variation(self):
        from oracles import inverted_gaussian

        rng = np.random.default_rng(12)
        idx = np.arange(500)
        clean = inverted_gaussian(idx, 55.0, 15.0, 250.0, 20.0)
        noisy = clean + rng.normal(0, 2.0, 500)
        res = authenticate(self._series(noisy), ValleyDetectionParams(),
                           GeometryGates(), 1.27)
        assert not res.accepted
        assert res.failed_check == "fading-variation"
        assert res.variation_fwd.residual_std_db > 1.27

    def test_short_series_rejected(self):
        with pytest.raises(ConfigError):
            authenticate(self._series(np.zeros(50)), ValleyDetectionParams(),
                         GeometryGates(), 1.27)


class TestPairHonest:
    def test_office_defaults_accept(self):
        out = pair(NOMINAL, OFFICE.channel, default_settings(),
                   np.random.default_rng(42), fading_sigma=OFFICE.fading_sigma)
        assert out.accepted
        assert out.failed_check is None
        assert out.device_a.auth.accepted and out.device_b.auth.accepted

    def test_transcript_is_deterministic_and_versioned(self):
        outs = [pair(NOMINAL, OFFICE.channel, default_settings(),
                     np.random.default_rng(7), fading_sigma=OFFICE.fading_sigma)
                for _ in range(2)]
        j0 = outs[0].transcript.to_json()
        j1 = outs[1].transcript.to_json()
        assert j0 == j1
        assert json.loads(j0)["schema_version"] == 1

    def test_sealed_record_survives_interlock_identically(self):
        out = pair(NOMINAL, OFFICE.channel, default_settings(),
                   np.random.default_rng(21), fading_sigma=OFFICE.fading_sigma)
        # B authenticated using A's claims; in an honest run those equal
        # A's record up to the wire's fixed-point quantization
        rec_a = out.transcript.record_a
        rev_at_b = out.device_b.series.pl_rev_db
        expected = rec_a.quantized().tx_dbm - out.transcript.record_b.rx_dbm
        assert np.allclose(rev_at_b, expected, atol=1e-12)

    def test_stage_one_data_not_mutated(self):
        out = pair(NOMINAL, OFFICE.channel, default_settings(),
                   np.random.default_rng(22), fading_sigma=OFFICE.fading_sigma)
        assert out.transcript.record_a.n == 500
        assert np.all(out.transcript.record_a.tx_dbm <= 30.0)
        assert np.all(out.transcript.record_a.tx_dbm >= 0.0)

    def test_interlock_frames_logged_for_audit(self):
        out = pair(NOMINAL, OFFICE.channel, default_settings(),
                   np.random.default_rng(23), fading_sigma=OFFICE.fading_sigma)
        sessions = out.transcript.interlock_frames
        assert len(sessions) == 1
        frames = sessions[0]["frames"]
        assert len(frames) == 4 * sessions[0]["blocks"]
        # phase discipline is visible in the log: all first halves precede
        # every second half
        first_second = [f["half"] for f in frames]
        assert first_second.index(1) == 2 * sessions[0]["blocks"]

    def test_fault_bad_public_key(self):
        out = pair(NOMINAL, OFFICE.channel, default_settings(),
                   np.random.default_rng(1), fading_sigma=OFFICE.fading_sigma,
                   inject_fault="bad-public-key")
        assert not out.accepted
        assert out.failed_check == "key-agreement"

    def test_fault_truncated_record(self):
        out = pair(NOMINAL, OFFICE.channel, default_settings(),
                   np.random.default_rng(1), fading_sigma=OFFICE.fading_sigma,
                   inject_fault="truncate-record")
        assert not out.accepted
        assert out.failed_check == "framing"


class TestPairIntercepted:
    def test_general_attacker_rejected(self):
        profile = AttackerProfile(kind="general", distance_m=2.0)
        out = pair(NOMINAL, OFFICE.channel, default_settings(),
                   np.random.default_rng(5), attacker=profile,
                   fading_sigma=OFFICE.fading_sigma)
        assert not out.accepted
        assert out.failed_check == "valley-shape"

    def test_supreme_attacker_fails_variation_not_valley(self):
        profile = AttackerProfile(kind="supreme", distance_m=2.0)
        out = pair(NOMINAL, OFFICE.channel, default_settings(),
                   np.random.default_rng(6), attacker=profile,
                   fading_sigma=OFFICE.fading_sigma)
        assert not out.accepted
        assert out.device_a.auth.valley.found
        assert out.failed_check == "fading-variation"

    def test_interlock_violation_aborts(self):
        profile = AttackerProfile(kind="general", distance_m=2.0,
                                  violate_interlock=True)
        out = pair(NOMINAL, OFFICE.channel, default_settings(),
                   np.random.default_rng(7), attacker=profile,
                   fading_sigma=OFFICE.fading_sigma)
        assert not out.accepted
        assert out.failed_check == "interlock-ordering"

    def test_claimed_records_logged(self):
        profile = AttackerProfile(kind="supreme", distance_m=2.0)
        out = pair(NOMINAL, OFFICE.channel, default_settings(),
                   np.random.default_rng(8), attacker=profile,
                   fading_sigma=OFFICE.fading_sigma)
        assert out.transcript.claimed_to_a is not None
        assert out.transcript.claimed_to_b is not None
        assert out.transcript.notes["attacker"] == "supreme"
