"""
System-level Monte-Carlo simulation of a sectorized OFDMA uplink with joint processing.

A hexagonal cluster of three-sector sites is laid out with wrap-around, users are
dropped uniformly inside each sector, and every link gets a Rayleigh-faded tapped
delay line. On each tone a round-robin scheduler picks one user per sector, so each
tone is an L-user network (L = number of sectors) processed by the SIC schemes of
:mod:`multicell_tools.rates`.

Rates on tones are complex-baseband: a tone carries twice the real-dimension rate,
and backhaul in bits per complex symbol is halved before entering the real-valued
rate formulas.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np
import pandas as pd

from multicell_tools.allocation import waterfill
from multicell_tools.config import ALLOCATION_MODES, CAMPAIGN_SCHEMES, SimConfig
from multicell_tools.network import NetworkInstance
from multicell_tools.rates import (
    Scheme,
    effective_sinrs_wz,
    heuristic_order,
    parse_scheme,
    rates_baseline,
    scheme_rates,
)
from multicell_tools.utils import dbm_to_watts

logger = logging.getLogger(__name__)

SQRT3 = math.sqrt(3.0)
SECTOR_BORESIGHTS_DEG = (0.0, 120.0, 240.0)

# ITU pedestrian A: relative delays (ns) and powers (dB)
PEDA_DELAYS_NS = (0.0, 110.0, 190.0, 410.0)
PEDA_POWERS_DB = (0.0, -9.7, -19.2, -22.8)


@dataclass(frozen=True, eq=False)
class Topology:
    """Site positions, wrap-around image offsets and sector boresights."""

    sites: np.ndarray
    wrap_offsets: np.ndarray
    boresights_deg: np.ndarray
    bs_distance_m: float

    @property
    def cells(self) -> int:
        """Number of sites."""
        return int(self.sites.shape[0])

    @property
    def sectors(self) -> int:
        """Number of sectors over all sites."""
        return self.cells * int(self.boresights_deg.shape[0])

    @property
    def sector_sites(self) -> np.ndarray:
        """Site index of every sector; sector s belongs to site s // 3."""
        return np.repeat(np.arange(self.cells), self.boresights_deg.shape[0])

    @property
    def sector_boresights(self) -> np.ndarray:
        """Boresight (degrees) of every sector."""
        return np.tile(self.boresights_deg, self.cells)

    def displacements(self, points: np.ndarray) -> np.ndarray:
        """
        Shortest displacement from every site to every point over the wrap-around images.

        Returns:
            Array of shape (points, cells, 2)
        """
        images = self.sites[:, None, :] + self.wrap_offsets[None, :, :]
        deltas = points[:, None, None, :] - images[None, :, :, :]
        nearest = np.argmin(np.sum(deltas**2, axis=-1), axis=2)
        return np.take_along_axis(deltas, nearest[:, :, None, None], axis=2)[:, :, 0, :]

    def distances(self, points: np.ndarray) -> np.ndarray:
        """Minimum-image distance from every point to every site, shape (points, cells)."""
        return np.asarray(np.hypot(*np.moveaxis(self.displacements(points), -1, 0)))


@dataclass(frozen=True, eq=False)
class UserDrop:
    """User positions; user ``s * users_per_sector + k`` is slot k of sector s."""

    positions: np.ndarray
    sectors: np.ndarray


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    """Complex tone gains g[user, sector, tone] and the large-scale power gains."""

    tone_gains: np.ndarray
    large_scale: np.ndarray

    @property
    def power_gains(self) -> np.ndarray:
        """|g|^2 per user, sector and tone."""
        return np.abs(self.tone_gains) ** 2


@dataclass(frozen=True, eq=False)
class PreparedDrop:
    """Amplitude gains of the scheduled users, shape (tones, sectors, sectors)."""

    gains: np.ndarray
    schedule: np.ndarray


@dataclass(frozen=True, eq=False)
class SimResult:
    """User rates and per-cell sum rates of one campaign."""

    scheme: str
    backhaul_per_bs_mbps: float
    allocation: str
    user_rates_mbps: np.ndarray
    percell_sum_mbps: np.ndarray
    tone_sum_bits: np.ndarray

    @property
    def mean_percell_mbps(self) -> float:
        """Per-cell sum rate averaged over cells and drops."""
        return float(np.mean(self.percell_sum_mbps))

    def sorted_rates(self) -> np.ndarray:
        """All user rates pooled over drops, ascending."""
        return np.sort(self.user_rates_mbps.reshape(-1))

    def percentile(self, p: float) -> float:
        """User-rate percentile in Mbps."""
        return float(np.percentile(self.user_rates_mbps, p))


# ---------------------------------------------------------------------------
# Geometry
# ---------------------------------------------------------------------------


def _unit(angle_deg: float) -> np.ndarray:
    theta = math.radians(angle_deg)
    return np.array([math.cos(theta), math.sin(theta)])


def generate_topology(cfg: SimConfig) -> Topology:
    """
    Lay out ``cfg.cells`` sites on a hexagonal lattice with inter-site distance D.

    Sites are ordered by ring, then by angle, with the center site first. The
    wrap-around images are shifted by (n + 1) e1 + n e2 rotated in 60 degree steps,
    where n is the number of rings.
    """
    d = cfg.bs_distance_m
    e1 = d * np.array([SQRT3 / 2.0, 0.5])
    e2 = d * np.array([0.0, 1.0])
    rings = cfg.rings

    coords = [
        (a, b)
        for a in range(-rings, rings + 1)
        for b in range(-rings, rings + 1)
        if abs(a + b) <= rings
    ]
    positions = np.array([a * e1 + b * e2 for a, b in coords])
    ring = np.array([max(abs(a), abs(b), abs(a + b)) for a, b in coords])
    angle = np.round(np.mod(np.arctan2(positions[:, 1], positions[:, 0]), 2 * math.pi), 9)
    positions = positions[np.lexsort((angle, ring))]

    offsets = [np.zeros(2)]
    if cfg.wrap_around:
        shift = (rings + 1) * e1 + rings * e2
        for k in range(6):
            c, s = math.cos(k * math.pi / 3), math.sin(k * math.pi / 3)
            offsets.append(np.array([[c, -s], [s, c]]) @ shift)

    logger.debug("Topology: %d sites, %d images", positions.shape[0], len(offsets))
    return Topology(
        sites=positions,
        wrap_offsets=np.array(offsets),
        boresights_deg=np.array(SECTOR_BORESIGHTS_DEG),
        bs_distance_m=d,
    )


def drop_users(cfg: SimConfig, topo: Topology, rng: np.random.Generator) -> UserDrop:
    """
    Place ``users_per_sector`` users uniformly in every sector.

    A sector is the rhombus of its hexagonal cell spanned by the corners at
    boresight -60 and +60 degrees; points closer than ``min_distance_m`` to the site
    are redrawn.
    """
    radius = cfg.bs_distance_m / SQRT3
    count = cfg.users_per_sector
    positions = np.empty((topo.sectors * count, 2))

    for sector, (site, boresight) in enumerate(zip(topo.sector_sites, topo.sector_boresights)):
        edge_a = radius * _unit(boresight - 60.0)
        edge_b = radius * _unit(boresight + 60.0)
        placed: list[np.ndarray] = []
        while len(placed) < count:
            u, v = rng.uniform(size=(2, 2 * count))
            candidates = u[:, None] * edge_a + v[:, None] * edge_b
            far = np.hypot(candidates[:, 0], candidates[:, 1]) >= cfg.min_distance_m
            placed.extend(candidates[far])
        positions[sector * count : (sector + 1) * count] = topo.sites[site] + np.array(
            placed[:count]
        )

    return UserDrop(positions=positions, sectors=np.repeat(np.arange(topo.sectors), count))


# ---------------------------------------------------------------------------
# Channels
# ---------------------------------------------------------------------------


def pathloss_db(cfg: SimConfig, distance_m: np.ndarray) -> np.ndarray:
    """Distance-dependent pathloss, intercept + slope * log10(d / 1 km)."""
    d_km = np.asarray(distance_m, dtype=float) / 1000.0
    return np.asarray(cfg.pathloss_intercept_db + cfg.pathloss_slope_db * np.log10(d_km))


def sector_gain_db(cfg: SimConfig, offset_deg: np.ndarray) -> np.ndarray:
    """Peak gain plus the parabolic azimuth pattern -min(12 (phi / beamwidth)^2, front-to-back)."""
    phi = np.mod(np.asarray(offset_deg, dtype=float) + 180.0, 360.0) - 180.0
    pattern = -np.minimum(12.0 * (phi / cfg.beamwidth_deg) ** 2, cfg.front_to_back_db)
    return np.asarray(cfg.antenna_gain_dbi + pattern)


def tap_profile(cfg: SimConfig) -> tuple[np.ndarray, np.ndarray]:
    """
    Sample-spaced taps of the multipath profile.

    Delays are rounded to the nearest sample at ``bandwidth_hz`` sampling, taps that
    land on the same sample are merged, and powers are normalized to sum to one.

    Returns:
        (tap indices, tap powers)

    Raises:
        ValueError: If the delay spread does not fit in ``tones`` samples
    """
    if cfg.multipath == "flat":
        return np.array([0]), np.array([1.0])

    indices = np.rint(np.array(PEDA_DELAYS_NS) * 1e-9 * cfg.bandwidth_hz).astype(int)
    powers = np.power(10.0, np.array(PEDA_POWERS_DB) / 10.0)
    merged = np.bincount(indices, weights=powers)
    taps = np.flatnonzero(merged)
    if taps[-1] >= cfg.tones:
        raise ValueError(f"Delay spread of {taps[-1] + 1} samples exceeds {cfg.tones} tones")
    return taps, merged[taps] / np.sum(merged)


def draw_tone_gains(
    large_scale: np.ndarray,
    taps: np.ndarray,
    tap_powers: np.ndarray,
    tones: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """
    Rayleigh-faded tapped delay lines converted to tone responses with a DFT.

    Returns:
        Complex array of shape large_scale.shape + (tones,)
    """
    shape = large_scale.shape + (taps.shape[0],)
    fading = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)
    impulse = np.zeros(large_scale.shape + (tones,), dtype=complex)
    impulse[..., taps] = fading * np.sqrt(large_scale[..., None] * tap_powers)
    return np.fft.fft(impulse, n=tones, axis=-1)


def draw_channels(
    cfg: SimConfig, topo: Topology, drop: UserDrop, rng: np.random.Generator
) -> ChannelRealization:
    """
    Draw tone gains for every user-sector link.

    The large-scale gain combines pathloss over the minimum-image distance with the
    sector pattern evaluated at the azimuth of that image.
    """
    displacement = topo.displacements(drop.positions)
    distance = np.maximum(np.hypot(displacement[..., 0], displacement[..., 1]), cfg.min_distance_m)
    azimuth = np.degrees(np.arctan2(displacement[..., 1], displacement[..., 0]))

    site_of = topo.sector_sites
    offset = azimuth[:, site_of] - topo.sector_boresights[None, :]
    gain_db = sector_gain_db(cfg, offset) - pathloss_db(cfg, distance[:, site_of])
    large_scale = np.power(10.0, gain_db / 10.0)

    taps, tap_powers = tap_profile(cfg)
    tone_gains = draw_tone_gains(large_scale, taps, tap_powers, cfg.tones, rng)
    return ChannelRealization(tone_gains=tone_gains, large_scale=large_scale)


# ---------------------------------------------------------------------------
# Per-tone networks
# ---------------------------------------------------------------------------


def round_robin_schedule(cfg: SimConfig) -> np.ndarray:
    """``schedule[t, s]`` is the user of sector s on tone t: slot t mod users_per_sector."""
    slots = np.arange(cfg.tones) % cfg.users_per_sector
    return np.arange(cfg.sectors)[None, :] * cfg.users_per_sector + slots[:, None]


def tone_tx_power_w(cfg: SimConfig) -> float:
    """Transmit power on one tone."""
    return float(dbm_to_watts(cfg.tx_psd_dbm_hz)) * cfg.tone_spacing_hz


def tone_noise_power_w(cfg: SimConfig) -> float:
    """Receiver noise power on one tone, noise figure included."""
    return float(dbm_to_watts(cfg.noise_psd_dbm_hz + cfg.noise_figure_db)) * cfg.tone_spacing_hz


def sector_budget_bits(cfg: SimConfig, per_bs_mbps: float) -> float:
    """A sector's backhaul summed over its tones, in real-dimension bits per symbol."""
    per_sector_bps = per_bs_mbps * 1e6 / cfg.sectors_per_cell
    return per_sector_bps / cfg.tone_spacing_hz / 2.0


def bits_to_mbps(cfg: SimConfig, bits: np.ndarray) -> np.ndarray:
    """Real-dimension bits per tone symbol to Mbps on that tone."""
    return np.asarray(2.0 * np.asarray(bits) * cfg.tone_spacing_hz / 1e6)


def _check_schedule(cfg: SimConfig, schedule: np.ndarray) -> None:
    if schedule.shape != (cfg.tones, cfg.sectors):
        raise ValueError(f"Schedule must have shape {(cfg.tones, cfg.sectors)}")
    owners = schedule // cfg.users_per_sector
    if np.any(owners != np.arange(cfg.sectors)[None, :]):
        raise ValueError("Schedule must assign exactly one own user to every sector and tone")


def _tone_network(cfg: SimConfig, gains: np.ndarray, backhaul: np.ndarray) -> NetworkInstance:
    return NetworkInstance(
        gains=gains,
        powers=np.full(gains.shape[0], tone_tx_power_w(cfg)),
        noise=tone_noise_power_w(cfg),
        backhaul=backhaul,
    )


def _uniform_backhaul(cfg: SimConfig, per_bs_mbps: float) -> np.ndarray:
    return np.full(cfg.sectors, sector_budget_bits(cfg, per_bs_mbps) / cfg.tones)


def per_tone_network(
    cfg: SimConfig,
    realization: ChannelRealization,
    tone: int,
    schedule: np.ndarray,
    backhaul_bits: Optional[np.ndarray] = None,
) -> NetworkInstance:
    """
    The L-user network seen on one tone, L = number of sectors.

    Row i of the gain matrix is the user scheduled in sector i; column j is sector j's
    receiver. Backhaul defaults to the uniform per-tone share of each sector's link.

    Raises:
        ValueError: If the schedule does not give each sector one of its own users
    """
    _check_schedule(cfg, schedule)
    gains = np.abs(realization.tone_gains[schedule[tone], :, tone])
    if backhaul_bits is None:
        backhaul_bits = _uniform_backhaul(cfg, cfg.backhaul_per_bs_mbps)
    return _tone_network(cfg, gains, backhaul_bits)


def allocate_sector_backhaul(
    cfg: SimConfig, sinr_bar: np.ndarray, per_bs_mbps: float, mode: str
) -> np.ndarray:
    """
    Split every sector's backhaul across its tones.

    Args:
        cfg: Simulation config
        sinr_bar: Effective SINRs, shape (tones, sectors)
        per_bs_mbps: Backhaul per site
        mode: "uniform" or "optimized" (water-filling over the sector's tones)

    Returns:
        Per-tone backhaul in real-dimension bits, shape (tones, sectors)
    """
    if mode not in ALLOCATION_MODES:
        raise ValueError(f"Unknown allocation mode {mode!r}")
    budget = sector_budget_bits(cfg, per_bs_mbps)
    if mode == "uniform" or math.isinf(budget):
        return np.full(sinr_bar.shape, budget / sinr_bar.shape[0])
    return np.column_stack(
        [waterfill(sinr_bar[:, sector], budget).c for sector in range(sinr_bar.shape[1])]
    )


# ---------------------------------------------------------------------------
# Campaigns
# ---------------------------------------------------------------------------


def prepare_drop(cfg: SimConfig, topo: Topology, seed: np.random.SeedSequence) -> PreparedDrop:
    """Drop users, draw channels and keep only the scheduled links."""
    rng = np.random.default_rng(seed)
    drop = drop_users(cfg, topo, rng)
    realization = draw_channels(cfg, topo, drop, rng)
    schedule = round_robin_schedule(cfg)
    tones = np.arange(cfg.tones)
    gains = np.abs(realization.tone_gains[schedule, :, tones[:, None]])
    return PreparedDrop(gains=gains, schedule=schedule)


def prepare_drops(cfg: SimConfig, topo: Optional[Topology] = None) -> list[PreparedDrop]:
    """
    Prepare all drops of a campaign.

    Drop i uses the i-th child of ``SeedSequence(cfg.seed)``, so results do not depend
    on ``cfg.workers``.
    """
    topo = topo or generate_topology(cfg)
    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.drops)
    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            return list(pool.map(lambda s: prepare_drop(cfg, topo, s), seeds))
    return [prepare_drop(cfg, topo, seed) for seed in seeds]


def evaluate_drop(
    cfg: SimConfig, prepared: PreparedDrop, scheme: str, per_bs_mbps: float, allocation: str
) -> np.ndarray:
    """
    Per-tone, per-sector rates (real-dimension bits) of one prepared drop.

    The decoding order on each tone is by decreasing pre-SIC SINR. The baseline
    always uses the uniform backhaul split.
    """
    resolved = parse_scheme(scheme)
    uniform = _uniform_backhaul(cfg, per_bs_mbps)
    networks = [_tone_network(cfg, prepared.gains[t], uniform) for t in range(cfg.tones)]

    if resolved.value not in CAMPAIGN_SCHEMES:
        raise ValueError(f"Campaigns support {CAMPAIGN_SCHEMES}, not {resolved.value}")
    if resolved is Scheme.BASELINE:
        return np.array([rates_baseline(net).rates for net in networks])

    orders = [heuristic_order(net) for net in networks]
    if allocation == "uniform":
        backhaul = np.tile(uniform, (cfg.tones, 1))
    else:
        sinr_bar = np.array([effective_sinrs_wz(n, o) for n, o in zip(networks, orders)])
        backhaul = allocate_sector_backhaul(cfg, sinr_bar, per_bs_mbps, allocation)

    return np.array(
        [
            scheme_rates(net.with_backhaul(backhaul[t]), order, resolved).rates
            for t, (net, order) in enumerate(zip(networks, orders))
        ]
    )


def _evaluate_drops(cfg: SimConfig, drops: Sequence[PreparedDrop]) -> list[np.ndarray]:
    """Rates of every drop, in drop order, on a thread pool when ``cfg.workers > 1``."""

    def evaluate(drop: PreparedDrop) -> np.ndarray:
        return evaluate_drop(cfg, drop, cfg.scheme, cfg.backhaul_per_bs_mbps, cfg.allocation)

    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            return list(pool.map(evaluate, drops))
    return [evaluate(drop) for drop in drops]


def run_campaign(cfg: SimConfig, prepared: Optional[Sequence[PreparedDrop]] = None) -> SimResult:
    """
    Run ``cfg.drops`` drops for ``cfg.scheme`` at ``cfg.backhaul_per_bs_mbps``.

    Args:
        cfg: Simulation config
        prepared: Drops from :func:`prepare_drops`; reusing them gives common random
            numbers across schemes and backhaul levels

    Returns:
        SimResult
    """
    drops = list(prepared) if prepared is not None else prepare_drops(cfg)
    user_rates = np.zeros((len(drops), cfg.users))
    percell = np.zeros((len(drops), cfg.cells))
    tone_sums = np.zeros((len(drops), cfg.tones))

    for index, (drop, bits) in enumerate(zip(drops, _evaluate_drops(cfg, drops))):
        mbps = bits_to_mbps(cfg, bits)
        np.add.at(user_rates[index], drop.schedule.reshape(-1), mbps.reshape(-1))
        percell[index] = np.sum(mbps, axis=0).reshape(cfg.cells, cfg.sectors_per_cell).sum(axis=1)
        tone_sums[index] = np.sum(bits, axis=1)
        logger.debug("Drop %d/%d: %.2f Mbps per cell", index + 1, len(drops), percell[index].mean())

    result = SimResult(
        scheme=cfg.scheme,
        backhaul_per_bs_mbps=cfg.backhaul_per_bs_mbps,
        allocation=cfg.allocation,
        user_rates_mbps=user_rates,
        percell_sum_mbps=percell,
        tone_sum_bits=tone_sums,
    )
    logger.info(
        "Campaign %s at %s Mbps (%s): %.2f Mbps per cell",
        cfg.scheme,
        cfg.backhaul_per_bs_mbps,
        cfg.allocation,
        result.mean_percell_mbps,
    )
    return result


def sweep_backhaul(
    cfg: SimConfig,
    backhaul_list: Iterable[float],
    allocations: Sequence[str] = ALLOCATION_MODES,
    prepared: Optional[Sequence[PreparedDrop]] = None,
) -> pd.DataFrame:
    """
    Mean per-cell sum rate against backhaul per site, for each allocation mode.

    All points share the same drops. An infinite backhaul gives the SIC limit.

    Returns:
        Table with columns ``backhaul_per_bs_mbps,allocation,mean_percell_mbps``
    """
    drops = list(prepared) if prepared is not None else prepare_drops(cfg)
    rows = []
    for mode in allocations:
        for backhaul in backhaul_list:
            point = cfg.replace(backhaul_per_bs_mbps=backhaul, allocation=mode)
            rows.append((backhaul, mode, run_campaign(point, drops).mean_percell_mbps))
    return pd.DataFrame(rows, columns=["backhaul_per_bs_mbps", "allocation", "mean_percell_mbps"])


# ---------------------------------------------------------------------------
# Reporting
# ---------------------------------------------------------------------------


def cdf_frame(results: Iterable[SimResult]) -> pd.DataFrame:
    """Empirical user-rate CDFs: ``rate_mbps,cdf,scheme,backhaul``."""
    frames = []
    for result in results:
        rates = result.sorted_rates()
        frames.append(
            pd.DataFrame(
                {
                    "rate_mbps": rates,
                    "cdf": np.arange(1, rates.size + 1) / rates.size,
                    "scheme": result.scheme,
                    "backhaul": result.backhaul_per_bs_mbps,
                }
            )
        )
    return pd.concat(frames, ignore_index=True)


def improvement_table(results: Iterable[SimResult], baseline: SimResult) -> pd.DataFrame:
    """
    Mean per-cell sum rates and their improvement over a baseline run.

    Returns:
        Table with columns
        ``scheme,backhaul,allocation,mean_percell_mbps,improvement_pct_vs_baseline``
    """
    reference = baseline.mean_percell_mbps
    rows = []
    for result in results:
        mean = result.mean_percell_mbps
        improvement = 100.0 * (mean - reference) / reference if reference > 0 else math.nan
        rows.append(
            (result.scheme, result.backhaul_per_bs_mbps, result.allocation, mean, improvement)
        )
    return pd.DataFrame(
        rows,
        columns=[
            "scheme",
            "backhaul",
            "allocation",
            "mean_percell_mbps",
            "improvement_pct_vs_baseline",
        ],
    )


def percentile_rate(result: SimResult, p: float) -> float:
    """User rate (Mbps) at percentile p of the pooled samples."""
    return result.percentile(p)
