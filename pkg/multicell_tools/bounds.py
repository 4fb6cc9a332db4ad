"""Joint-decoding rate region, Wyner-model cut-set bound and constant-gap certificates."""

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
import pandas as pd

from multicell_tools.gaussian import log2_det
from multicell_tools.network import NetworkInstance, WynerInstance, as_wyner, random_instance
from multicell_tools.rates import QuantizationProfile, Scheme, UnknownSchemeError, parse_scheme
from multicell_tools.utils import EnumerationLimitError, half_log2

logger = logging.getLogger(__name__)

NNC_MAX_USERS = 16
GAP_TOLERANCE = 1e-9


@dataclass(frozen=True)
class NncRegion:
    """
    Raw constraints R(S) <= bound[S] for every non-empty user subset S.

    Subsets are tuples of 0-based user indices in increasing order. No redundancy is
    removed.
    """

    constraints: dict[tuple[int, ...], float]
    q: QuantizationProfile

    @property
    def L(self) -> int:
        """Number of users."""
        return int(self.q.q.shape[0])

    def bound(self, users: tuple[int, ...]) -> float:
        """Bound on the sum rate of a subset of users."""
        return self.constraints[tuple(sorted(users))]

    def to_frame(self) -> pd.DataFrame:
        """Table with columns ``subset,bound_bits``; subsets are written as "1+3"."""
        rows = [
            ("+".join(str(k + 1) for k in subset), value)
            for subset, value in self.constraints.items()
        ]
        return pd.DataFrame(rows, columns=["subset", "bound_bits"])


def _subsets(size: int) -> list[tuple[int, ...]]:
    return [
        subset
        for count in range(1, size + 1)
        for subset in itertools.combinations(range(size), count)
    ]


def nnc_region(net: NetworkInstance, q: QuantizationProfile) -> NncRegion:
    """
    Evaluate the noisy-network-coding achievable region for quantization levels q.

    For each S, the bound is the minimum over all T of
    1/2 log2 det(I + D_{T^c} H_{S,T^c} diag(P_S) H_{S,T^c}^T)
    + sum_{i in T} (C_i - 1/2 log2(1 + N0 / q_i)), where D_{T^c} = diag(1 / (N0 + q_i)).
    The second sum is used as is, without clipping negative terms.

    Raises:
        EnumerationLimitError: If L exceeds 16
        ValueError: If any q_i is not positive
    """
    if net.L > NNC_MAX_USERS:
        raise EnumerationLimitError(
            f"Region enumeration supports at most {NNC_MAX_USERS} users, got {net.L}"
        )
    if q.q.shape[0] != net.L:
        raise ValueError(f"Expected {net.L} quantization levels, got {q.q.shape[0]}")
    if np.any(q.q <= 0):
        raise ValueError("Quantization levels must be positive")

    with np.errstate(divide="ignore"):
        description_cost = np.asarray(half_log2(1.0 + net.noise / q.q))
    link_slack = net.backhaul - description_cost
    inverse_noise = 1.0 / (net.noise + q.q)

    all_users = np.arange(net.L)
    helper_sets = [()] + _subsets(net.L)
    constraints: dict[tuple[int, ...], float] = {}
    for subset in _subsets(net.L):
        s_idx = list(subset)
        best = math.inf
        for helpers in helper_sets:
            observed = np.setdiff1d(all_users, helpers)
            transfer = net.gains[np.ix_(s_idx, observed)].T
            weighted = inverse_noise[observed][:, None] * transfer
            matrix = np.eye(observed.size) + weighted @ np.diag(net.powers[s_idx]) @ transfer.T
            value = 0.5 * log2_det(matrix) + float(np.sum(link_slack[list(helpers)]))
            best = min(best, value)
        constraints[subset] = best

    logger.debug("Evaluated %d region constraints for L=%d", len(constraints), net.L)
    return NncRegion(constraints=constraints, q=q)


def nnc_sum_rate(region: NncRegion) -> float:
    """The bound on R_1 + ... + R_L (the full-set constraint)."""
    return region.bound(tuple(range(region.L)))


# ---------------------------------------------------------------------------
# Wyner soft-handoff model
# ---------------------------------------------------------------------------


def cutset_upper_bound_wyner(wyner: WynerInstance) -> float:
    """
    Separable cut-set bound: sum_i min(C_i, 1/2 log2(1 + SNR_i + INR_{i+1,i})).

    The INR term is absent for the last base-station.
    """
    snr = wyner.snr
    received = snr + np.append(wyner.inr, 0.0)
    return float(np.sum(np.minimum(wyner.backhaul, np.asarray(half_log2(1.0 + received)))))


def wyner_rates(wyner: WynerInstance, scheme: Union[str, Scheme] = Scheme.PER_BS_WZ) -> np.ndarray:
    """
    Per-user rates when decoding from user L down to user 1.

    User L sees no interference and decodes at its base-station, forwarding the
    message (rate min(1/2 log2(1 + SNR_L), C_L)). Every other user is compressed and
    forwarded, with or without Wyner-Ziv coding.

    Raises:
        UnknownSchemeError: For schemes other than wz and nowz
    """
    resolved = parse_scheme(scheme)
    if resolved not in (Scheme.PER_BS_WZ, Scheme.PER_BS_NOWZ):
        raise UnknownSchemeError(f"Wyner rates cover wz and nowz, not {resolved.value}")

    snr, backhaul = wyner.snr, wyner.backhaul
    head_snr, head_c = snr[:-1], backhaul[:-1]
    fraction = np.exp2(-2.0 * head_c)
    if resolved is Scheme.PER_BS_WZ:
        head = half_log2((1.0 + head_snr) / (1.0 + fraction * head_snr))
    else:
        leak = fraction * wyner.inr
        head = half_log2((1.0 + leak + head_snr) / (1.0 + leak + fraction * head_snr))
    last = min(0.5 * math.log2(1.0 + snr[-1]), float(backhaul[-1]))
    return np.append(np.asarray(head, dtype=float), last)


def wyner_sum_rate_wz(wyner: WynerInstance) -> float:
    """Sum rate of per-BS SIC with Wyner-Ziv coding on the Wyner model."""
    return float(np.sum(wyner_rates(wyner, Scheme.PER_BS_WZ)))


def wyner_sum_rate_nowz(wyner: WynerInstance) -> float:
    """Sum rate of per-BS SIC without Wyner-Ziv coding on the Wyner model."""
    return float(np.sum(wyner_rates(wyner, Scheme.PER_BS_NOWZ)))


def gap_limit(L: int, scheme: Union[str, Scheme]) -> float:
    """Constant gap under weak interference: L - 1/2 (wz) or 1/2 (1 + log2 3) L - 1/2 (nowz)."""
    resolved = parse_scheme(scheme)
    if resolved is Scheme.PER_BS_WZ:
        return L - 0.5
    if resolved is Scheme.PER_BS_NOWZ:
        return 0.5 * (1.0 + math.log2(3.0)) * L - 0.5
    raise UnknownSchemeError(f"Gap limits cover wz and nowz, not {resolved.value}")


def loose_nowz_limit(L: int) -> float:
    """Looser no-Wyner-Ziv gap: L - 1/2 plus half a bit for each of the first L - 1 users."""
    return 1.5 * L - 1.0


@dataclass(frozen=True)
class GapCertificate:
    """Achievable sum rate against the cut-set bound for one Wyner instance."""

    scheme: Scheme
    L: int
    achievable_sum: float
    upper_bound: float
    bound_limit: float
    weak_interference: bool

    @property
    def gap(self) -> float:
        """upper_bound - achievable_sum."""
        return self.upper_bound - self.achievable_sum

    @property
    def ok(self) -> bool:
        """
        Whether the certificate holds. Without weak interference no claim is made
        and the certificate is trivially ok.
        """
        if not self.weak_interference:
            return True
        return -GAP_TOLERANCE <= self.gap <= self.bound_limit + GAP_TOLERANCE

    def to_text(self) -> str:
        """Flat ``key=value`` rendering."""
        return (
            f"scheme={self.scheme.value}, L={self.L}, achievable={self.achievable_sum:.10g}, "
            f"upper={self.upper_bound:.10g}, gap={self.gap:.10g}, limit={self.bound_limit:.10g}, "
            f"ok={str(self.ok).lower()}, weak={str(self.weak_interference).lower()}"
        )


def gap_certificate(
    wyner: WynerInstance, scheme: Union[str, Scheme] = Scheme.PER_BS_WZ
) -> GapCertificate:
    """Compare a Wyner-model achievable sum rate with the cut-set bound."""
    resolved = parse_scheme(scheme)
    achievable = float(np.sum(wyner_rates(wyner, resolved)))
    return GapCertificate(
        scheme=resolved,
        L=wyner.L,
        achievable_sum=achievable,
        upper_bound=cutset_upper_bound_wyner(wyner),
        bound_limit=gap_limit(wyner.L, resolved),
        weak_interference=wyner.weak_interference,
    )


def nowz_to_wz_gap(wyner: WynerInstance) -> np.ndarray:
    """Per-user loss from dropping Wyner-Ziv coding; at most 1/2 bit under weak interference."""
    return wyner_rates(wyner, Scheme.PER_BS_WZ) - wyner_rates(wyner, Scheme.PER_BS_NOWZ)


# ---------------------------------------------------------------------------
# Randomized certificate ensembles
# ---------------------------------------------------------------------------


@dataclass
class EnsembleOptions:
    """Configuration for a randomized gap-certificate run."""

    trials: int = 10000
    L: Optional[int] = None  # None draws L uniformly from 1..max_users per trial
    max_users: int = 8
    scheme: str = "wz"
    seed: int = 0
    snr_range_db: tuple[float, float] = (0.0, 60.0)
    backhaul_range: tuple[float, float] = (0.0, 12.0)


@dataclass
class EnsembleSummary:
    """Outcome of a certificate ensemble."""

    scheme: Scheme
    trials: int = 0
    violations: int = 0
    max_gap: float = 0.0
    worst: Optional[GapCertificate] = None
    certificates: list[GapCertificate] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        """True when no certificate failed."""
        return self.violations == 0

    def to_frame(self) -> pd.DataFrame:
        """One row per trial: ``trial,L,achievable,upper,gap,limit,ok``."""
        return pd.DataFrame(
            [
                (i + 1, c.L, c.achievable_sum, c.upper_bound, c.gap, c.bound_limit, c.ok)
                for i, c in enumerate(self.certificates)
            ],
            columns=["trial", "L", "achievable", "upper", "gap", "limit", "ok"],
        )

    def to_text(self) -> str:
        """Summary lines for terminal output."""
        lines = [
            f"scheme={self.scheme.value}",
            f"trials={self.trials}",
            f"violations={self.violations}",
            f"max_gap={self.max_gap:.10g}",
        ]
        if self.worst is not None:
            lines.append(f"worst: {self.worst.to_text()}")
        return "\n".join(lines)


class GapEnsemble:
    """Draws random weak-interference Wyner instances and certifies each one."""

    def __init__(self, options: Optional[EnsembleOptions] = None):
        """
        Initialize the ensemble.

        Args:
            options: Ensemble configuration
        """
        self.options = options or EnsembleOptions()
        if self.options.trials < 0:
            raise ValueError(f"trials must be non-negative, got {self.options.trials}")
        if self.options.L is not None and self.options.L < 1:
            raise ValueError(f"L must be at least 1, got {self.options.L}")
        self.scheme = parse_scheme(self.options.scheme)
        gap_limit(1, self.scheme)  # rejects schemes without a certificate

    def instances(self) -> list[WynerInstance]:
        """Draw the ensemble's instances; each trial gets its own spawned seed."""
        opts = self.options
        seeds = np.random.SeedSequence(opts.seed).spawn(opts.trials)
        sizes = np.random.default_rng(opts.seed).integers(1, opts.max_users + 1, size=opts.trials)
        drawn = []
        for trial_seed, size in zip(seeds, sizes):
            L = opts.L if opts.L is not None else int(size)
            net = random_instance(
                trial_seed,
                L,
                snr_range_db=opts.snr_range_db,
                backhaul_range=opts.backhaul_range,
                wyner=True,
            )
            drawn.append(as_wyner(net))
        return drawn

    def run(self) -> EnsembleSummary:
        """Certify every instance and collect the worst gap."""
        summary = EnsembleSummary(scheme=self.scheme)
        for wyner in self.instances():
            certificate = gap_certificate(wyner, self.scheme)
            summary.certificates.append(certificate)
            summary.trials += 1
            if not certificate.ok:
                summary.violations += 1
                logger.warning("Gap certificate violated: %s", certificate.to_text())
            if summary.worst is None or certificate.gap > summary.max_gap:
                summary.max_gap = certificate.gap
                summary.worst = certificate

        logger.info(
            "Certified %d instances (%s): max gap %.4f, %d violations",
            summary.trials,
            self.scheme.value,
            summary.max_gap,
            summary.violations,
        )
        return summary
