import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from swipepair.channel import (
    ENVIRONMENTS,
    WAVELENGTH_M,
    ChannelParams,
    Trajectory,
    deterministic_pathloss,
    fading_sigma_for,
    observed_deterministic,
    sample_link,
)
from swipepair.errors import ConfigError

from oracles import reference_pathloss_db


class TestDeterministicPathloss:
    def test_unit_log_argument_gives_zero(self):
        d = WAVELENGTH_M / (4 * math.pi)
        assert deterministic_pathloss(d, ChannelParams(alpha=2.0)) == pytest.approx(0.0, abs=1e-12)

    def test_reference_value_at_10cm(self):
        val = deterministic_pathloss(0.1, ChannelParams(alpha=2.0))
        assert val == pytest.approx(reference_pathloss_db(0.1, 2.0, WAVELENGTH_M), abs=1e-12)
        assert val == pytest.approx(20.046, abs=5e-4)

    def test_reference_value_at_1m_is_20db_above(self):
        p = ChannelParams(alpha=2.0)
        v01 = deterministic_pathloss(0.1, p)
        v1 = deterministic_pathloss(1.0, p)
        assert v1 == pytest.approx(40.046, abs=5e-4)
        assert v1 - v01 == pytest.approx(20.0, abs=1e-9)

    def test_vectorized_matches_scalar(self):
        p = ChannelParams(alpha=2.8)
        d = np.array([0.1, 1.0, 2.0, 3.0])
        vec = deterministic_pathloss(d, p)
        for di, vi in zip(d, vec):
            assert vi == pytest.approx(deterministic_pathloss(float(di), p), abs=0)

    def test_nonpositive_distance_rejected(self):
        p = ChannelParams()
        with pytest.raises(ValueError):
            deterministic_pathloss(0.0, p)
        with pytest.raises(ValueError):
            deterministic_pathloss(-1.0, p)

    @given(st.floats(min_value=0.02, max_value=50.0),
           st.floats(min_value=0.02, max_value=50.0))
    def test_strictly_increasing_in_distance(self, d1, d2):
        p = ChannelParams(alpha=2.0)
        lo, hi = sorted((d1, d2))
        if lo == hi:
            return
        assert deterministic_pathloss(lo, p) < deterministic_pathloss(hi, p)

    def test_increasing_in_alpha_beyond_unit_argument(self):
        d = 1.0  # > lambda/(4 pi)
        assert (deterministic_pathloss(d, ChannelParams(alpha=2.0))
                < deterministic_pathloss(d, ChannelParams(alpha=2.8)))

    def test_system_loss_added_to_observed(self):
        p = ChannelParams(alpha=2.0, system_loss_db=20.0)
        assert observed_deterministic(0.1, p) == pytest.approx(
            deterministic_pathloss(0.1, p) + 20.0)


class TestSampleLink:
    def test_noiseless_equals_deterministic(self):
        p = ChannelParams(alpha=2.0)
        rng = np.random.default_rng(1)
        s = sample_link(0.5, p, rng)
        assert s.pathloss_db == pytest.approx(deterministic_pathloss(0.5, p), abs=0)
        assert s.fading_db == 0.0

    def test_same_seed_same_sample(self):
        p = ChannelParams(alpha=2.0, sigma_fading_db=0.8, sigma_meas_db=0.4)
        a = sample_link(0.5, p, np.random.default_rng(7))
        b = sample_link(0.5, p, np.random.default_rng(7))
        assert a == b

    def test_monte_carlo_std_matches_variance_sum(self):
        # analytic: sqrt(0.8^2 + 0.4^2) = 0.8944
        p = ChannelParams(alpha=2.0, sigma_fading_db=0.8, sigma_meas_db=0.4)
        rng = np.random.default_rng(42)
        vals = np.array([sample_link(0.5, p, rng).pathloss_db for _ in range(100_000)])
        expected = math.sqrt(0.8**2 + 0.4**2)
        assert np.std(vals) == pytest.approx(expected, rel=0.03)

    def test_invalid_params_rejected(self):
        with pytest.raises(ConfigError):
            ChannelParams(alpha=0.0)
        with pytest.raises(ConfigError):
            ChannelParams(sigma_fading_db=-1.0)


class TestTrajectory:
    def test_center_crossing_distance_is_perp_offset(self):
        t = Trajectory(kind="symmetric-swipe", perp_offset_m=0.1,
                       half_span_m=0.55, speed_mps=1.1)
        t_center = t.half_span_m / t.speed_mps
        assert t.distance_at(t_center) == pytest.approx(0.1, abs=1e-12)

    def test_start_distance(self):
        t = Trajectory(kind="symmetric-swipe", perp_offset_m=0.1,
                       half_span_m=0.55, speed_mps=1.1)
        assert t.distance_at(0.0) == pytest.approx(math.sqrt(0.1**2 + 0.55**2), abs=1e-12)
        assert t.distance_at(0.0) == pytest.approx(0.559, abs=1e-3)

    def test_stationary_constant(self):
        t = Trajectory(kind="stationary", perp_offset_m=2.0, half_span_m=0.0,
                       speed_mps=1.0)
        for ts in (0.0, 0.3, 123.0):
            assert t.distance_at(ts) == pytest.approx(2.0)

    def test_time_outside_duration_rejected(self):
        t = Trajectory(kind="symmetric-swipe", perp_offset_m=0.1,
                       half_span_m=0.55, speed_mps=1.1)
        with pytest.raises(ValueError):
            t.distance_at(t.duration_s + 0.01)
        with pytest.raises(ValueError):
            t.distance_at(-0.1)

    def test_leads_clamp_to_endpoints(self):
        t = Trajectory(kind="symmetric-swipe", perp_offset_m=0.1, half_span_m=0.5,
                       speed_mps=2.0, lead_in_s=0.2, lead_out_s=0.2)
        assert t.distance_at(0.0) == pytest.approx(t.distance_at(0.19), abs=1e-12)
        end = t.duration_s
        assert t.distance_at(end) == pytest.approx(t.distance_at(end - 0.19), abs=1e-12)

    def test_minimum_at_center_for_symmetric(self):
        t = Trajectory(kind="symmetric-swipe", perp_offset_m=0.08, half_span_m=0.4,
                       speed_mps=2.0)
        ts = np.linspace(0, t.duration_s, 401)
        d = t.distance_at(ts)
        assert d.min() == pytest.approx(0.08, abs=1e-9)
        assert np.all(d >= 0.08 - 1e-12)

    def test_pathloss_argmin_at_probe_nearest_center(self):
        # deterministic pathloss over a symmetric swipe bottoms out at the
        # probe closest to the center crossing
        t = Trajectory(kind="symmetric-swipe", perp_offset_m=0.1, half_span_m=0.5,
                       speed_mps=1.7)
        ts = np.arange(433) * (t.duration_s / 433)
        pl = deterministic_pathloss(t.distance_at(ts), ChannelParams(alpha=2.0))
        center = t.half_span_m / t.speed_mps
        assert np.argmin(pl) == np.argmin(np.abs(ts - center))

    def test_distance_to_attacker_point(self):
        t = Trajectory(kind="symmetric-swipe", perp_offset_m=0.1, half_span_m=0.5,
                       speed_mps=2.0)
        d = t.distance_to_point(t.half_span_m / t.speed_mps, (0.0, 2.0))
        assert d == pytest.approx(1.9, abs=1e-12)

    def test_invalid_geometry_rejected(self):
        with pytest.raises(ConfigError):
            Trajectory(kind="hop")
        with pytest.raises(ConfigError):
            Trajectory(perp_offset_m=0.0)
        with pytest.raises(ConfigError):
            Trajectory(speed_mps=0.0)


class TestFadingTables:
    @pytest.mark.parametrize("env", ENVIRONMENTS)
    def test_monotone_in_distance(self, env):
        d = np.linspace(0.05, 8.0, 200)
        sigma = fading_sigma_for(env, d)
        assert np.all(np.diff(sigma) >= -1e-12)
        assert fading_sigma_for(env, 2.0) >= fading_sigma_for(env, 0.1)

    def test_office_anchor_points(self):
        assert fading_sigma_for("office", 0.1) == pytest.approx(0.8)
        assert fading_sigma_for("office", 2.0) == pytest.approx(1.8)

    def test_lobby_rises_past_protective_distance(self):
        assert fading_sigma_for("lobby", 3.0) > fading_sigma_for("lobby", 2.0)

    def test_dining_steeper_than_office_beyond_3m(self):
        d0, d1 = 3.0, 5.0
        slope_office = (fading_sigma_for("office", d1) - fading_sigma_for("office", d0))
        slope_dining = (fading_sigma_for("dining", d1) - fading_sigma_for("dining", d0))
        assert slope_dining > slope_office

    def test_unknown_environment_rejected(self):
        with pytest.raises(ConfigError):
            fading_sigma_for("cafeteria", 1.0)
