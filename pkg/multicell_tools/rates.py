"""Achievable rates of the SIC-based multicell schemes and the single-cell baseline.

All rates are in bits per real channel use and are reported indexed by user, with the
decoding order carried alongside.
"""

import itertools
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable, Optional, Sequence, Union

import numpy as np
import pandas as pd

from multicell_tools.gaussian import build_model
from multicell_tools.network import NetworkInstance, derive_ratios, make_symmetric_two_user
from multicell_tools.utils import db_to_linear, exp2_minus_one, half_log2

logger = logging.getLogger(__name__)


class UnknownSchemeError(ValueError):
    """Raised for scheme tags that are not recognized."""


class Scheme(Enum):
    """Decoding schemes at the central processor."""

    PER_BS_WZ = "wz"
    PER_BS_NOWZ = "nowz"
    IMPROVED = "improved"
    JOINT_BS = "joint"
    BASELINE = "baseline"

    @property
    def label(self) -> str:
        """Human-readable name."""
        return _SCHEME_LABELS[self]


_SCHEME_LABELS = {
    Scheme.PER_BS_WZ: "per-BS SIC with Wyner-Ziv",
    Scheme.PER_BS_NOWZ: "per-BS SIC without Wyner-Ziv",
    Scheme.IMPROVED: "improved per-BS SIC",
    Scheme.JOINT_BS: "joint-BS SIC",
    Scheme.BASELINE: "baseline",
}

_SCHEME_ALIASES = {
    "per-bs-wz": Scheme.PER_BS_WZ,
    "per-bs-sic-wz": Scheme.PER_BS_WZ,
    "per-bs-nowz": Scheme.PER_BS_NOWZ,
    "per-bs-sic-nowz": Scheme.PER_BS_NOWZ,
    "joint-bs": Scheme.JOINT_BS,
}


def parse_scheme(tag: Union[str, Scheme]) -> Scheme:
    """
    Resolve a scheme tag such as "wz", "per-BS-noWZ" or "joint".

    Raises:
        UnknownSchemeError: If the tag is not recognized
    """
    if isinstance(tag, Scheme):
        return tag
    cleaned = tag.strip().lower()
    if cleaned in _SCHEME_ALIASES:
        return _SCHEME_ALIASES[cleaned]
    try:
        return Scheme(cleaned)
    except ValueError:
        known = sorted({s.value for s in Scheme} | set(_SCHEME_ALIASES))
        raise UnknownSchemeError(f"Unknown scheme {tag!r}. Use one of {known}") from None


@dataclass(frozen=True)
class DecodingOrder:
    """
    A permutation of users; ``perm[t]`` is the (0-based) user decoded at stage t.
    """

    perm: tuple[int, ...]

    def __post_init__(self) -> None:
        perm = tuple(int(k) for k in self.perm)
        if sorted(perm) != list(range(len(perm))) or not perm:
            raise ValueError(f"Decoding order must be a permutation of 0..L-1, got {perm}")
        object.__setattr__(self, "perm", perm)

    @classmethod
    def identity(cls, size: int) -> "DecodingOrder":
        """Decode users in index order."""
        return cls(tuple(range(size)))

    @classmethod
    def from_one_based(cls, users: Iterable[int]) -> "DecodingOrder":
        """Build an order from 1-based user labels, e.g. (3, 2, 1)."""
        return cls(tuple(int(k) - 1 for k in users))

    @classmethod
    def parse(cls, text: str) -> "DecodingOrder":
        """Parse "3,2,1" (1-based) into an order."""
        try:
            return cls.from_one_based(int(part) for part in text.split(",") if part.strip())
        except ValueError as e:
            raise ValueError(f"Invalid decoding order {text!r}: {e}") from e

    @property
    def L(self) -> int:
        """Number of users."""
        return len(self.perm)

    @property
    def positions(self) -> np.ndarray:
        """``positions[k]`` is the stage at which user k is decoded."""
        pos = np.empty(self.L, dtype=int)
        pos[list(self.perm)] = np.arange(self.L)
        return pos

    def decoded_before(self, user: int) -> list[int]:
        """Users decoded at stages earlier than ``user``."""
        return list(self.perm[: self.positions[user]])

    def decoded_after(self, user: int) -> list[int]:
        """Users decoded at stages later than ``user``."""
        return list(self.perm[self.positions[user] + 1 :])

    def later_mask(self) -> np.ndarray:
        """Boolean matrix, True at (j, k) when user j is decoded after user k."""
        pos = self.positions
        return pos[:, None] > pos[None, :]

    def one_based(self) -> tuple[int, ...]:
        """The permutation with 1-based user labels."""
        return tuple(k + 1 for k in self.perm)

    def __str__(self) -> str:
        return "-".join(str(k) for k in self.one_based())


@dataclass(frozen=True, eq=False)
class QuantizationProfile:
    """Per-base-station Gaussian quantization noise variances; inf means no description."""

    q: np.ndarray

    def __post_init__(self) -> None:
        q = np.array(self.q, dtype=float).reshape(-1)
        if np.any(np.isnan(q)) or np.any(q < 0):
            raise ValueError("Quantization noise levels must be non-negative")
        q.setflags(write=False)
        object.__setattr__(self, "q", q)


@dataclass(frozen=True, eq=False)
class RateVector:
    """Per-user rates in bits per real channel use, with the order and scheme used."""

    rates: np.ndarray
    order: DecodingOrder
    scheme: Scheme

    def __post_init__(self) -> None:
        rates = np.array(self.rates, dtype=float).reshape(-1)
        rates.setflags(write=False)
        object.__setattr__(self, "rates", rates)

    @property
    def sum_rate(self) -> float:
        """Sum of the per-user rates."""
        return float(np.sum(self.rates))

    def to_frame(self) -> pd.DataFrame:
        """Table with columns ``user,rate_bits`` (1-based users)."""
        return pd.DataFrame(
            {"user": np.arange(1, self.rates.shape[0] + 1), "rate_bits": self.rates}
        )


@dataclass(frozen=True)
class TwoUserRegion:
    """
    Two-user achievable region: the corner point of each decoding order and the
    polygon obtained by time-sharing with the axes (listed counter-clockwise from the
    origin, consecutive duplicates removed).
    """

    scheme: Scheme
    corners: tuple[tuple[float, float], ...]
    hull: tuple[tuple[float, float], ...] = field(default=())

    @property
    def sum_rate(self) -> float:
        """Largest R1 + R2 in the region, attained at a corner point."""
        return max(r1 + r2 for r1, r2 in self.corners)

    def contains(self, point: tuple[float, float], tol: float = 1e-12) -> bool:
        """Check whether a rate pair lies inside the convex hull."""
        x, y = point
        if x < -tol or y < -tol:
            return False
        vertices = list(self.hull)
        for (x0, y0), (x1, y1) in zip(vertices, vertices[1:] + vertices[:1]):
            if (x1 - x0) * (y - y0) - (y1 - y0) * (x - x0) < -tol:
                return False
        return True

    def to_frame(self) -> pd.DataFrame:
        """Table with columns ``R1,R2,label`` for the corner points and hull vertices."""
        rows = [(r1, r2, f"{self.scheme.value}:corner") for r1, r2 in self.corners]
        rows.extend((r1, r2, f"{self.scheme.value}:hull") for r1, r2 in self.hull)
        return pd.DataFrame(rows, columns=["R1", "R2", "label"])


# ---------------------------------------------------------------------------
# Per-base-station SIC with Wyner-Ziv compression
# ---------------------------------------------------------------------------


def effective_sinrs_wz(net: NetworkInstance, order: DecodingOrder) -> np.ndarray:
    """
    SINR_bar_k = SNR_k / (1 + sum of INR_{j,k} over users j decoded after k), per user.
    """
    _check_order(net, order)
    ratios = derive_ratios(net)
    residual = np.sum(ratios.inr * order.later_mask(), axis=0)
    return np.asarray(ratios.snr / (1.0 + residual))


def effective_sinr_wz(net: NetworkInstance, order: DecodingOrder, user: int) -> float:
    """
    Effective SINR of one user under SIC: interferers already decoded are removed.

    Args:
        net: Network instance
        order: Decoding order; the stage of ``user`` is read from it
        user: 0-based user index

    Returns:
        Linear SINR_bar for ``user``
    """
    return float(effective_sinrs_wz(net, order)[user])


def wz_quantization(net: NetworkInstance, order: DecodingOrder) -> QuantizationProfile:
    """
    Quantization noise that exactly fills each backhaul link given the decoded users.

    q_k = (N0 + sum_{j not decoded before k} h_jk^2 P_j) / (2^{2 C_k} - 1), with
    q_k = inf for C_k = 0 and q_k = 0 for an unlimited link.
    """
    _check_order(net, order)
    received = np.square(net.gains) * net.powers[:, None]
    undecoded = order.later_mask() | np.eye(net.L, dtype=bool)
    conditional_var = net.noise + np.sum(received * undecoded, axis=0)
    with np.errstate(divide="ignore"):
        q = conditional_var / np.asarray(exp2_minus_one(2.0 * net.backhaul))
    return QuantizationProfile(q=q)


def _compressed_rate(sinr: np.ndarray, backhaul: np.ndarray) -> np.ndarray:
    # 1/2 log2((1 + s) / (1 + 2^{-2C} s)); exp2(-inf) = 0 covers unlimited backhaul
    return np.asarray(half_log2((1.0 + sinr) / (1.0 + np.exp2(-2.0 * backhaul) * sinr)))


def rates_per_bs_sic_wz(net: NetworkInstance, order: DecodingOrder) -> RateVector:
    """
    Per-base-station SIC with Wyner-Ziv compress-and-forward.

    R_k = 1/2 log2((1 + SINR_bar_k) / (1 + 2^{-2 C_k} SINR_bar_k)).
    """
    sinr = effective_sinrs_wz(net, order)
    return RateVector(_compressed_rate(sinr, net.backhaul), order, Scheme.PER_BS_WZ)


def sic_limit(net: NetworkInstance, order: DecodingOrder) -> RateVector:
    """Rates with unlimited backhaul: R_bar_k = 1/2 log2(1 + SINR_bar_k)."""
    sinr = effective_sinrs_wz(net, order)
    return RateVector(np.asarray(half_log2(1.0 + sinr)), order, Scheme.PER_BS_WZ)


def half_bit_point(sinr_bar: float) -> tuple[float, float]:
    """
    Backhaul at the nominal operating point and the rate loss there.

    At C = 1/2 log2(1 + SINR_bar) the rate is 1/2 log2(1 + SINR_bar / (1 + SINR_bar))
    below the SIC limit, which never exceeds half a bit.

    Returns:
        (c, gap) in bits

    Raises:
        ValueError: If sinr_bar is negative
    """
    if sinr_bar < 0 or math.isnan(sinr_bar):
        raise ValueError(f"sinr_bar must be non-negative, got {sinr_bar}")
    if math.isinf(sinr_bar):
        return math.inf, 0.5
    c = 0.5 * math.log2(1.0 + sinr_bar)
    gap = 0.5 * math.log2(1.0 + sinr_bar / (1.0 + sinr_bar))
    return c, gap


@dataclass(frozen=True, eq=False)
class RateCurve:
    """R(C) for a single user with fixed SINR_bar, plus the annotated points."""

    capacities: np.ndarray
    rates: np.ndarray
    limit: float
    half_bit_c: float
    half_bit_gap: float

    @property
    def corner_point(self) -> tuple[float, float]:
        """(1/2 log2(1+s), 1/2 log2((1+s)^2 / (1+2s))): the rate at the nominal backhaul."""
        return self.half_bit_c, self.limit - self.half_bit_gap


def rate_curve(sinr_bar: float, capacities: Union[Sequence[float], np.ndarray]) -> RateCurve:
    """
    Evaluate the single-user rate against backhaul capacity.

    Args:
        sinr_bar: Effective SINR (linear)
        capacities: Backhaul values in bits

    Returns:
        RateCurve
    """
    c_values = np.asarray(capacities, dtype=float)
    c_half, gap = half_bit_point(sinr_bar)
    rates = _compressed_rate(np.full(c_values.shape, float(sinr_bar)), c_values)
    return RateCurve(
        capacities=c_values,
        rates=rates,
        limit=0.5 * math.log2(1.0 + sinr_bar),
        half_bit_c=c_half,
        half_bit_gap=gap,
    )


# ---------------------------------------------------------------------------
# Per-base-station SIC without Wyner-Ziv compression
# ---------------------------------------------------------------------------


def effective_sinrs_nowz(net: NetworkInstance, order: DecodingOrder) -> np.ndarray:
    """
    SINR_bar'_k: decoded interferers still leak through the quantization noise.

    SINR_bar'_k = SNR_k / (1 + sum_{j after k} INR_{j,k} + 2^{-2C_k} sum_{j before k} INR_{j,k}).
    """
    _check_order(net, order)
    ratios = derive_ratios(net)
    later = order.later_mask()
    earlier = later.T
    residual = np.sum(ratios.inr * later, axis=0)
    leaked = np.exp2(-2.0 * net.backhaul) * np.sum(ratios.inr * earlier, axis=0)
    return np.asarray(ratios.snr / (1.0 + residual + leaked))


def rates_per_bs_sic_nowz(net: NetworkInstance, order: DecodingOrder) -> RateVector:
    """Per-base-station SIC with plain vector quantization (no side information)."""
    sinr = effective_sinrs_nowz(net, order)
    return RateVector(_compressed_rate(sinr, net.backhaul), order, Scheme.PER_BS_NOWZ)


def nowz_quantization(net: NetworkInstance) -> QuantizationProfile:
    """Quantization noise filling each link without side information: Var(Y_k) / (2^{2C_k} - 1)."""
    received = np.square(net.gains) * net.powers[:, None]
    with np.errstate(divide="ignore"):
        q = (net.noise + np.sum(received, axis=0)) / np.asarray(exp2_minus_one(2.0 * net.backhaul))
    return QuantizationProfile(q=q)


# ---------------------------------------------------------------------------
# Joint processing of the quantized observations
# ---------------------------------------------------------------------------


def improved_quantization(net: NetworkInstance, order: DecodingOrder) -> QuantizationProfile:
    """
    Quantization levels of the improved per-BS scheme, solved stage by stage.

    At stage t (user k), q_k makes I(Y_k; Y_hat_k | decoded X, earlier Y_hat) = C_k,
    i.e. q_k = Var(Y_k | decoded X, earlier Y_hat) / (2^{2 C_k} - 1).
    """
    _check_order(net, order)
    q = np.full(net.L, math.inf)
    for stage, user in enumerate(order.perm):
        earlier = list(order.perm[:stage])
        model = build_model(net, q)
        variance = model.conditional_variance(
            model.y([user])[0], model.x(earlier) + model.yhat(earlier)
        )
        denominator = float(exp2_minus_one(2.0 * net.backhaul[user]))
        if denominator == 0.0:
            q[user] = math.inf
        elif math.isinf(denominator):
            q[user] = 0.0
        else:
            q[user] = max(variance, 0.0) / denominator
        logger.debug("Improved SIC stage %d: user %d, q=%g", stage + 1, user + 1, q[user])
    return QuantizationProfile(q=q)


def rates_improved_per_bs_sic(net: NetworkInstance, order: DecodingOrder) -> RateVector:
    """
    Per-BS SIC that also uses the descriptions decoded at earlier stages.

    R_k = I(X_k; Y_hat of user k and all earlier stages | earlier X).
    """
    profile = improved_quantization(net, order)
    model = build_model(net, profile.q)
    rates = np.zeros(net.L)
    for stage, user in enumerate(order.perm):
        seen = list(order.perm[: stage + 1])
        rates[user] = model.mi(model.x([user]), model.yhat(seen), model.x(order.perm[:stage]))
    return RateVector(rates, order, Scheme.IMPROVED)


def joint_backhaul_usage(
    net: NetworkInstance, order: DecodingOrder, q: QuantizationProfile
) -> np.ndarray:
    """I(Y_k; Y_hat_k | Y_hat decoded at earlier stages), per user, in bits."""
    _check_joint_profile(net, q)
    model = build_model(net, q.q)
    usage = np.zeros(net.L)
    for stage, user in enumerate(order.perm):
        usage[user] = model.mi(model.y([user]), model.yhat([user]), model.yhat(order.perm[:stage]))
    return usage


def rates_joint_bs_sic(
    net: NetworkInstance, order: DecodingOrder, q: QuantizationProfile
) -> tuple[RateVector, np.ndarray]:
    """
    Joint-base-station SIC: decode every description first, then users in order.

    R_k = I(X_k; Y_hat_1..Y_hat_L | X decoded before k). Each backhaul constraint
    I(Y_k; Y_hat_k | earlier Y_hat) <= C_k is reported, not enforced.

    Returns:
        (rates, feasible) where ``feasible[k]`` tells whether user k's link suffices

    Raises:
        ValueError: If q is not finite and non-negative (0 forwards Y unquantized)
    """
    _check_order(net, order)
    _check_joint_profile(net, q)
    model = build_model(net, q.q)
    everything = model.yhat(range(net.L))
    rates = np.zeros(net.L)
    for stage, user in enumerate(order.perm):
        rates[user] = model.mi(model.x([user]), everything, model.x(order.perm[:stage]))
    usage = joint_backhaul_usage(net, order, q)
    feasible = usage <= net.backhaul + 1e-9
    return RateVector(rates, order, Scheme.JOINT_BS), feasible


def two_user_symmetric_joint_q(snr: float, inr: float, c: float) -> float:
    """
    Symmetric quantization level making the two descriptions use 2c bits in total.

    q = (a + sqrt(4b + 2^{4c} (a^2 - 4b))) / (2^{4c} - 1), a = 1 + snr + inr, b = snr * inr.

    Raises:
        ValueError: If c is not positive
    """
    if c <= 0 or math.isnan(c):
        raise ValueError(f"Backhaul c must be positive, got {c}")
    if math.isinf(c):
        return 0.0
    a = 1.0 + snr + inr
    b = snr * inr
    scale = 2.0 ** (4.0 * c)
    return (a + math.sqrt(4.0 * b + scale * (a * a - 4.0 * b))) / (scale - 1.0)


# ---------------------------------------------------------------------------
# Baseline and dispatch
# ---------------------------------------------------------------------------


def rates_baseline(net: NetworkInstance) -> RateVector:
    """
    Single-cell decoding treating every other user as noise, capped by the backhaul.

    R_i = min(1/2 log2(1 + SNR_i / (1 + sum_{j != i} INR_{j,i})), C_i).
    """
    ratios = derive_ratios(net)
    sinr = ratios.snr / (1.0 + np.sum(ratios.inr, axis=0))
    rates = np.minimum(np.asarray(half_log2(1.0 + sinr)), net.backhaul)
    return RateVector(rates, DecodingOrder.identity(net.L), Scheme.BASELINE)


def scheme_rates(
    net: NetworkInstance,
    order: DecodingOrder,
    scheme: Union[str, Scheme],
    q: Optional[QuantizationProfile] = None,
) -> RateVector:
    """
    Evaluate any scheme for a given order.

    The joint-BS scheme needs a quantization profile; the baseline ignores the order.
    """
    resolved = parse_scheme(scheme)
    if resolved is Scheme.JOINT_BS:
        if q is None:
            raise ValueError("The joint-BS scheme needs a quantization profile")
        return rates_joint_bs_sic(net, order, q)[0]
    if resolved is Scheme.BASELINE:
        return rates_baseline(net)
    return _ORDERED_SCHEMES[resolved](net, order)


_ORDERED_SCHEMES: dict[Scheme, Callable[[NetworkInstance, DecodingOrder], RateVector]] = {
    Scheme.PER_BS_WZ: rates_per_bs_sic_wz,
    Scheme.PER_BS_NOWZ: rates_per_bs_sic_nowz,
    Scheme.IMPROVED: rates_improved_per_bs_sic,
}


def decoding_stage_table(
    net: NetworkInstance, order: DecodingOrder, scheme: Union[str, Scheme] = Scheme.PER_BS_WZ
) -> pd.DataFrame:
    """
    Stage-by-stage view of a per-BS scheme: stage, user, effective SINR, q and rate.

    The effective SINR column is empty for the improved scheme, whose rate is not a
    single-SINR expression.
    """
    resolved = parse_scheme(scheme)
    if resolved is Scheme.PER_BS_WZ:
        sinr, q = effective_sinrs_wz(net, order), wz_quantization(net, order).q
    elif resolved is Scheme.PER_BS_NOWZ:
        sinr, q = effective_sinrs_nowz(net, order), nowz_quantization(net).q
    elif resolved is Scheme.IMPROVED:
        sinr, q = np.full(net.L, np.nan), improved_quantization(net, order).q
    else:
        raise UnknownSchemeError(f"Stage tables cover per-BS schemes, not {resolved.value}")

    rates = scheme_rates(net, order, resolved).rates
    perm = list(order.perm)
    return pd.DataFrame(
        {
            "stage": np.arange(1, net.L + 1),
            "user": [k + 1 for k in perm],
            "sinr_bar": sinr[perm],
            "q": q[perm],
            "rate_bits": rates[perm],
        }
    )


# ---------------------------------------------------------------------------
# Regions and order search
# ---------------------------------------------------------------------------


def _pentagon(corners: Sequence[tuple[float, float]]) -> tuple[tuple[float, float], ...]:
    right = max(corners, key=lambda p: (p[0], p[1]))
    top = max(corners, key=lambda p: (p[1], p[0]))
    if right[1] >= top[1]:
        top = right  # one corner dominates: rectangle
    vertices = [(0.0, 0.0), (right[0], 0.0), right, top, (0.0, top[1])]
    hull: list[tuple[float, float]] = []
    for vertex in vertices:
        point = (float(vertex[0]), float(vertex[1]))
        if not hull or hull[-1] != point:
            hull.append(point)
    if len(hull) > 1 and hull[-1] == hull[0]:
        hull.pop()
    return tuple(hull)


def two_user_region(scheme: Union[str, Scheme], snr: float, inr: float, c: float) -> TwoUserRegion:
    """
    Two-user symmetric region for a scheme: both decoding orders plus time-sharing.

    The joint-BS scheme uses the symmetric quantization level of
    :func:`two_user_symmetric_joint_q`; the baseline region is the square under its
    single corner.

    Raises:
        UnknownSchemeError: For tags outside per-BS-WZ, per-BS-noWZ, joint-BS, baseline
    """
    resolved = parse_scheme(scheme)
    net = make_symmetric_two_user(snr, inr, c)

    if resolved is Scheme.BASELINE:
        rates = rates_baseline(net).rates
        corners: list[tuple[float, float]] = [(float(rates[0]), float(rates[1]))]
    elif resolved is Scheme.IMPROVED:
        raise UnknownSchemeError("Two-user regions cover wz, nowz, joint and baseline")
    else:
        q: Optional[QuantizationProfile] = None
        if resolved is Scheme.JOINT_BS:
            q_level = two_user_symmetric_joint_q(snr, inr, c) if c > 0 else math.inf
            q = QuantizationProfile(q=np.full(2, q_level))
        corners = []
        for perm in ((0, 1), (1, 0)):
            order = DecodingOrder(perm)
            if q is not None and not np.all(np.isfinite(q.q)):
                rates = np.zeros(2)
            else:
                rates = scheme_rates(net, order, resolved, q).rates
            corners.append((float(rates[0]), float(rates[1])))

    return TwoUserRegion(scheme=resolved, corners=tuple(corners), hull=_pentagon(corners))


@dataclass
class RegionOptions:
    """Configuration for a two-user region comparison."""

    snr_db: float = 30.0
    inr_db: float = 20.0
    backhaul_bits: float = 5.0
    schemes: tuple[str, ...] = ("wz", "nowz", "joint", "baseline")


def region_table(options: Optional[RegionOptions] = None) -> pd.DataFrame:
    """Corner points and hull vertices of every requested scheme, stacked."""
    opts = options or RegionOptions()
    snr, inr = float(db_to_linear(opts.snr_db)), float(db_to_linear(opts.inr_db))
    frames = [
        two_user_region(scheme, snr, inr, opts.backhaul_bits).to_frame() for scheme in opts.schemes
    ]
    return pd.concat(frames, ignore_index=True)


def heuristic_order(net: NetworkInstance) -> DecodingOrder:
    """Decreasing pre-SIC SINR (every interferer present), ties broken by user index."""
    ratios = derive_ratios(net)
    sinr = ratios.snr / (1.0 + np.sum(ratios.inr, axis=0))
    return DecodingOrder(tuple(sorted(range(net.L), key=lambda k: (-sinr[k], k))))


def best_decoding_order(
    net: NetworkInstance,
    scheme: Union[str, Scheme] = Scheme.PER_BS_WZ,
    exhaustive_limit: int = 40320,
) -> tuple[DecodingOrder, RateVector]:
    """
    Pick a decoding order for a scheme.

    When L! <= exhaustive_limit every permutation is tried in lexicographic order and
    the first one with the largest sum rate wins. Otherwise the decreasing-SINR
    heuristic order is used.

    Raises:
        ValueError: If exhaustive_limit < 1 or the scheme needs a quantization profile
    """
    if exhaustive_limit < 1:
        raise ValueError(f"exhaustive_limit must be at least 1, got {exhaustive_limit}")
    resolved = parse_scheme(scheme)
    if resolved is Scheme.JOINT_BS:
        raise ValueError("Order search needs a per-BS scheme or the baseline")

    if not _factorial_exceeds(net.L, exhaustive_limit):
        best: Optional[RateVector] = None
        for perm in itertools.permutations(range(net.L)):
            candidate = scheme_rates(net, DecodingOrder(perm), resolved)
            if best is None or candidate.sum_rate > best.sum_rate + 1e-12:
                best = candidate
        assert best is not None
        logger.debug("Exhaustive order search over %d! orders: %s", net.L, best.order)
        return best.order, best

    order = heuristic_order(net)
    logger.debug("L=%d exceeds exhaustive limit, using SINR heuristic order", net.L)
    return order, scheme_rates(net, order, resolved)


def _factorial_exceeds(n: int, limit: int) -> bool:
    value = 1
    for k in range(2, n + 1):
        value *= k
        if value > limit:
            return True
    return False


def _check_order(net: NetworkInstance, order: DecodingOrder) -> None:
    if order.L != net.L:
        raise ValueError(f"Decoding order has {order.L} users, instance has {net.L}")


def _check_joint_profile(net: NetworkInstance, q: QuantizationProfile) -> None:
    if q.q.shape[0] != net.L:
        raise ValueError(f"Expected {net.L} quantization levels, got {q.q.shape[0]}")
    if not np.all(np.isfinite(q.q)) or np.any(q.q < 0):
        raise ValueError("Joint-BS SIC needs finite, non-negative quantization levels")
