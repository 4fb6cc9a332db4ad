"""Tests for the OFDMA system-level simulation."""

import math

import numpy as np
import pytest

from multicell_tools.cellular import (
    PreparedDrop,
    UserDrop,
    allocate_sector_backhaul,
    bits_to_mbps,
    cdf_frame,
    draw_channels,
    draw_tone_gains,
    drop_users,
    evaluate_drop,
    generate_topology,
    improvement_table,
    pathloss_db,
    per_tone_network,
    percentile_rate,
    prepare_drop,
    prepare_drops,
    round_robin_schedule,
    run_campaign,
    sector_budget_bits,
    sector_gain_db,
    sweep_backhaul,
    tap_profile,
)
from multicell_tools.config import SimConfig


@pytest.fixture
def small_cfg() -> SimConfig:
    """One three-sector site, two users per sector and eight tones."""
    return SimConfig(cells=1, users_per_sector=2, tones=8, drops=2, seed=3)


@pytest.fixture
def small_drops(small_cfg: SimConfig) -> list[PreparedDrop]:
    """Prepared drops of the small campaign."""
    return prepare_drops(small_cfg)


class TestTopology:
    """Tests for the hexagonal layout."""

    def test_seven_cells(self) -> None:
        """Test the first ring around the center site."""
        topo = generate_topology(SimConfig(cells=7))
        assert topo.cells == 7
        assert topo.sectors == 21
        assert topo.sites[0] == pytest.approx([0.0, 0.0])
        assert np.hypot(topo.sites[1:, 0], topo.sites[1:, 1]) == pytest.approx([600.0] * 6)

    def test_wrap_offsets(self) -> None:
        """Test the six wrap-around images of a 19-cell cluster."""
        topo = generate_topology(SimConfig())
        assert topo.wrap_offsets.shape == (7, 2)
        norms = np.hypot(topo.wrap_offsets[1:, 0], topo.wrap_offsets[1:, 1])
        assert norms == pytest.approx([math.sqrt(19.0) * 600.0] * 6)

    def test_no_wrap(self) -> None:
        """Test that wrap-around can be switched off."""
        topo = generate_topology(SimConfig(cells=7, wrap_around=False))
        assert topo.wrap_offsets.shape == (1, 2)

    def test_every_site_looks_alike(self) -> None:
        """Test that wrap-around makes every site see the same neighbourhood."""
        topo = generate_topology(SimConfig())
        rows = np.sort(topo.distances(topo.sites), axis=1)
        assert np.allclose(rows, rows[0], rtol=1e-9)
        assert rows[0, 0] == pytest.approx(0.0)
        assert rows[0, 1] == pytest.approx(600.0)

    def test_sector_layout(self) -> None:
        """Test sector-to-site mapping and boresights."""
        topo = generate_topology(SimConfig(cells=7))
        assert list(topo.sector_sites[:6]) == [0, 0, 0, 1, 1, 1]
        assert list(topo.sector_boresights[:3]) == [0.0, 120.0, 240.0]


class TestUserDrop:
    """Tests for drop_users function."""

    def test_users_inside_their_sector(self) -> None:
        """Test distance and azimuth limits of dropped users."""
        cfg = SimConfig(cells=7, users_per_sector=5)
        topo = generate_topology(cfg)
        drop = drop_users(cfg, topo, np.random.default_rng(0))
        assert drop.positions.shape == (cfg.users, 2)

        sites = topo.sites[topo.sector_sites[drop.sectors]]
        offset = drop.positions - sites
        distance = np.hypot(offset[:, 0], offset[:, 1])
        assert np.all(distance >= cfg.min_distance_m)
        assert np.all(distance <= cfg.bs_distance_m / math.sqrt(3.0) + 1e-9)

        azimuth = np.degrees(np.arctan2(offset[:, 1], offset[:, 0]))
        relative = np.mod(azimuth - topo.sector_boresights[drop.sectors] + 180.0, 360.0) - 180.0
        assert np.all(np.abs(relative) <= 60.0 + 1e-9)

    def test_reproducible(self) -> None:
        """Test that the generator fixes the drop."""
        cfg = SimConfig(cells=1, users_per_sector=3)
        topo = generate_topology(cfg)
        first = drop_users(cfg, topo, np.random.default_rng(4))
        second = drop_users(cfg, topo, np.random.default_rng(4))
        assert np.array_equal(first.positions, second.positions)


class TestChannels:
    """Tests for pathloss, antenna pattern and fading."""

    def test_pathloss(self) -> None:
        """Test the log-distance pathloss."""
        cfg = SimConfig()
        assert pathloss_db(cfg, np.array([1000.0, 100.0])) == pytest.approx([128.1, 90.5])

    def test_sector_gain(self) -> None:
        """Test the parabolic sector pattern."""
        cfg = SimConfig()
        gains = sector_gain_db(cfg, np.array([0.0, 35.0, -35.0, 395.0, 180.0]))
        assert gains == pytest.approx([15.0, 12.0, 12.0, 12.0, -5.0])

    def test_pedestrian_a_taps(self) -> None:
        """Test sample-spaced pedestrian A taps at 10 MHz."""
        taps, powers = tap_profile(SimConfig())
        assert list(taps) == [0, 1, 2, 4]
        assert float(np.sum(powers)) == pytest.approx(1.0)
        assert powers[0] == max(powers)

    def test_flat_profile(self) -> None:
        """Test the single-tap profile."""
        taps, powers = tap_profile(SimConfig(multipath="flat"))
        assert list(taps) == [0]
        assert list(powers) == [1.0]

    def test_too_few_tones(self) -> None:
        """Test that the delay spread must fit in the symbol."""
        with pytest.raises(ValueError, match="Delay spread"):
            tap_profile(SimConfig(tones=4))

    def test_tone_gain_power(self) -> None:
        """Test that tone gains keep the large-scale power on average."""
        taps, powers = tap_profile(SimConfig())
        gains = draw_tone_gains(np.ones(2000), taps, powers, 8, np.random.default_rng(1))
        assert gains.shape == (2000, 8)
        assert float(np.mean(np.abs(gains) ** 2)) == pytest.approx(1.0, rel=0.1)

    def test_mean_power_matches_large_scale(self) -> None:
        """Test that |g|^2 averages to pathloss times sector pattern for a fixed user."""
        cfg = SimConfig(cells=1)
        topo = generate_topology(cfg)
        draws = 40000
        point = np.array([150.0, 80.0])
        drop = UserDrop(positions=np.tile(point, (draws, 1)), sectors=np.zeros(draws, dtype=int))
        realization = draw_channels(cfg, topo, drop, np.random.default_rng(17))

        azimuth = math.degrees(math.atan2(point[1], point[0]))
        gain_db = sector_gain_db(cfg, azimuth - topo.sector_boresights) - pathloss_db(
            cfg, np.full(3, math.hypot(point[0], point[1]))
        )
        expected = np.power(10.0, gain_db / 10.0)
        np.testing.assert_allclose(realization.large_scale[0], expected, rtol=1e-12)

        mean_power = realization.power_gains.mean(axis=-1).mean(axis=0)
        np.testing.assert_allclose(mean_power, realization.large_scale[0], rtol=0.02)

    def test_flat_fading_is_constant_over_tones(self) -> None:
        """Test that one tap gives the same gain on every tone."""
        gains = draw_tone_gains(
            np.ones(3), np.array([0]), np.array([1.0]), 8, np.random.default_rng(2)
        )
        assert np.allclose(gains, gains[:, :1])

    def test_realization_shape(self, small_cfg: SimConfig) -> None:
        """Test the user-by-sector-by-tone layout."""
        topo = generate_topology(small_cfg)
        rng = np.random.default_rng(0)
        realization = draw_channels(small_cfg, topo, drop_users(small_cfg, topo, rng), rng)
        assert realization.tone_gains.shape == (6, 3, 8)
        assert np.all(realization.large_scale > 0)
        assert np.all(realization.power_gains >= 0)


class TestToneNetworks:
    """Tests for scheduling and per-tone instances."""

    def test_schedule(self, small_cfg: SimConfig) -> None:
        """Test that every sector serves one of its own users per tone."""
        schedule = round_robin_schedule(small_cfg)
        assert schedule.shape == (8, 3)
        assert np.all(schedule // small_cfg.users_per_sector == np.arange(3))
        assert list(schedule[:3, 0]) == [0, 1, 0]

    def test_budget_conversion(self) -> None:
        """Test the backhaul budget and rate conversions."""
        cfg = SimConfig()
        assert sector_budget_bits(cfg, 180.0) == pytest.approx(192.0)
        assert bits_to_mbps(cfg, np.array([1.0])) == pytest.approx([0.3125])

    def test_per_tone_network_matches_prepared_drop(self, small_cfg: SimConfig) -> None:
        """Test that prepared gains are the scheduled rows of the realization."""
        topo = generate_topology(small_cfg)
        seed = np.random.SeedSequence(5)
        prepared = prepare_drop(small_cfg, topo, seed)

        rng = np.random.default_rng(np.random.SeedSequence(5))
        realization = draw_channels(small_cfg, topo, drop_users(small_cfg, topo, rng), rng)
        schedule = round_robin_schedule(small_cfg)
        for tone in (0, 5):
            net = per_tone_network(small_cfg, realization, tone, schedule)
            assert net.L == 3
            assert np.allclose(net.gains, prepared.gains[tone])
            assert net.backhaul == pytest.approx([3.0] * 3)

    def test_rejects_foreign_schedule(self, small_cfg: SimConfig) -> None:
        """Test that a sector cannot schedule another sector's user."""
        topo = generate_topology(small_cfg)
        rng = np.random.default_rng(0)
        realization = draw_channels(small_cfg, topo, drop_users(small_cfg, topo, rng), rng)
        schedule = round_robin_schedule(small_cfg)[:, ::-1]
        with pytest.raises(ValueError, match="own user"):
            per_tone_network(small_cfg, realization, 0, schedule)

    def test_sector_allocation(self, small_cfg: SimConfig) -> None:
        """Test that both modes spend each sector's budget."""
        sinr = np.random.default_rng(0).uniform(1.0, 100.0, size=(8, 3))
        budget = sector_budget_bits(small_cfg, 180.0)
        for mode in ("uniform", "optimized"):
            split = allocate_sector_backhaul(small_cfg, sinr, 180.0, mode)
            assert split.shape == (8, 3)
            assert np.sum(split, axis=0) == pytest.approx([budget] * 3)
        unlimited = allocate_sector_backhaul(small_cfg, sinr, math.inf, "optimized")
        assert np.all(np.isinf(unlimited))
        with pytest.raises(ValueError, match="allocation mode"):
            allocate_sector_backhaul(small_cfg, sinr, 180.0, "greedy")


class TestCampaign:
    """Tests for drops, campaigns and sweeps."""

    def test_drops_reproducible(self, small_cfg: SimConfig) -> None:
        """Test that drops depend only on the seed, not on the worker count."""
        first = prepare_drops(small_cfg)
        second = prepare_drops(small_cfg.replace(workers=2))
        assert len(first) == 2
        for a, b in zip(first, second):
            assert np.array_equal(a.gains, b.gains)

    @pytest.mark.parametrize("allocation", ["uniform", "optimized"])
    def test_campaign_independent_of_workers(self, small_cfg: SimConfig, allocation: str) -> None:
        """Test that evaluating drops on a pool keeps results in drop order."""
        cfg = small_cfg.replace(drops=3, allocation=allocation)
        drops = prepare_drops(cfg)
        serial = run_campaign(cfg, drops)
        pooled = run_campaign(cfg.replace(workers=3), drops)
        assert np.array_equal(serial.user_rates_mbps, pooled.user_rates_mbps)
        assert np.array_equal(serial.percell_sum_mbps, pooled.percell_sum_mbps)
        assert np.array_equal(serial.tone_sum_bits, pooled.tone_sum_bits)

    def test_result_shapes(self, small_cfg: SimConfig, small_drops: list) -> None:
        """Test result arrays and rate conservation."""
        result = run_campaign(small_cfg, small_drops)
        assert result.user_rates_mbps.shape == (2, 6)
        assert result.percell_sum_mbps.shape == (2, 1)
        assert result.tone_sum_bits.shape == (2, 8)
        totals = np.sum(result.user_rates_mbps, axis=1)
        assert totals == pytest.approx(np.sum(result.percell_sum_mbps, axis=1))
        tone_totals = bits_to_mbps(small_cfg, np.sum(result.tone_sum_bits, axis=1))
        assert totals == pytest.approx(tone_totals)

    def test_wz_dominates_nowz(self, small_cfg: SimConfig, small_drops: list) -> None:
        """Test that Wyner-Ziv coding helps on every tone and for every user."""
        wz = run_campaign(small_cfg.replace(scheme="wz"), small_drops)
        nowz = run_campaign(small_cfg.replace(scheme="nowz"), small_drops)
        assert np.all(wz.tone_sum_bits >= nowz.tone_sum_bits - 1e-9)
        assert np.all(wz.user_rates_mbps >= nowz.user_rates_mbps - 1e-9)
        assert np.all(wz.sorted_rates() >= nowz.sorted_rates() - 1e-9)

    def test_unlimited_backhaul(self, small_cfg: SimConfig, small_drops: list) -> None:
        """Test that both per-BS schemes reach the SIC limit without a backhaul cap."""
        cfg = small_cfg.replace(backhaul_per_bs_mbps=math.inf)
        wz = run_campaign(cfg.replace(scheme="wz"), small_drops)
        nowz = run_campaign(cfg.replace(scheme="nowz"), small_drops)
        assert wz.user_rates_mbps == pytest.approx(nowz.user_rates_mbps)
        assert np.all(np.isfinite(wz.user_rates_mbps))

    def test_baseline_ignores_allocation(self, small_cfg: SimConfig, small_drops: list) -> None:
        """Test that the baseline always splits backhaul evenly."""
        uniform = evaluate_drop(small_cfg, small_drops[0], "baseline", 180.0, "uniform")
        optimized = evaluate_drop(small_cfg, small_drops[0], "baseline", 180.0, "optimized")
        assert np.array_equal(uniform, optimized)

    def test_rejects_other_schemes(self, small_cfg: SimConfig, small_drops: list) -> None:
        """Test that campaigns cover the baseline and the two per-BS schemes."""
        with pytest.raises(ValueError, match="Campaigns support"):
            evaluate_drop(small_cfg, small_drops[0], "improved", 180.0, "uniform")

    def test_sweep(self, small_cfg: SimConfig, small_drops: list) -> None:
        """Test monotonicity in backhaul and the benefit of optimized splits."""
        levels = [30.0, 90.0, 180.0, math.inf]
        sweep = sweep_backhaul(small_cfg, levels, prepared=small_drops)
        assert list(sweep.columns) == ["backhaul_per_bs_mbps", "allocation", "mean_percell_mbps"]
        uniform = sweep[sweep["allocation"] == "uniform"]["mean_percell_mbps"].to_numpy()
        optimized = sweep[sweep["allocation"] == "optimized"]["mean_percell_mbps"].to_numpy()
        assert np.all(np.diff(uniform) >= -1e-9)
        assert np.all(optimized >= uniform - 1e-9)
        assert optimized[-1] == pytest.approx(uniform[-1])


class TestReporting:
    """Tests for CDFs and summary tables."""

    def test_cdf_and_improvement(self, small_cfg: SimConfig, small_drops: list) -> None:
        """Test the CDF table and the improvement over the baseline."""
        baseline = run_campaign(small_cfg.replace(scheme="baseline"), small_drops)
        wz = run_campaign(small_cfg.replace(scheme="wz"), small_drops)

        cdf = cdf_frame([baseline, wz])
        assert list(cdf.columns) == ["rate_mbps", "cdf", "scheme", "backhaul"]
        assert len(cdf) == 2 * 12
        for _, group in cdf.groupby("scheme"):
            assert np.all(np.diff(group["rate_mbps"].to_numpy()) >= 0)
            assert group["cdf"].iloc[-1] == 1.0
            assert np.all(group["cdf"] > 0)

        table = improvement_table([baseline, wz], baseline)
        assert table["improvement_pct_vs_baseline"].iloc[0] == 0.0
        assert list(table["scheme"]) == ["baseline", "wz"]

    def test_percentile(self, small_cfg: SimConfig, small_drops: list) -> None:
        """Test user-rate percentiles."""
        result = run_campaign(small_cfg, small_drops)
        assert percentile_rate(result, 100.0) == pytest.approx(result.sorted_rates()[-1])
        assert percentile_rate(result, 0.0) == pytest.approx(result.sorted_rates()[0])
