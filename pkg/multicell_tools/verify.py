"""Property suites that check the rate, bound, allocation and simulation modules."""

import itertools
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from multicell_tools.allocation import (
    allocation_oracle_grid,
    kkt_residual,
    optimal_allocation,
    sum_rate,
)
from multicell_tools.bounds import (
    EnsembleOptions,
    GapEnsemble,
    cutset_upper_bound_wyner,
    nnc_region,
    nnc_sum_rate,
    wyner_sum_rate_nowz,
    wyner_sum_rate_wz,
)
from multicell_tools.cellular import (
    cdf_frame,
    evaluate_drop,
    improvement_table,
    prepare_drops,
    run_campaign,
    sweep_backhaul,
)
from multicell_tools.config import SimConfig
from multicell_tools.gaussian import build_model
from multicell_tools.network import make_symmetric_two_user, random_instance
from multicell_tools.rates import (
    DecodingOrder,
    QuantizationProfile,
    best_decoding_order,
    effective_sinrs_wz,
    half_bit_point,
    nowz_quantization,
    rate_curve,
    rates_improved_per_bs_sic,
    rates_per_bs_sic_nowz,
    rates_per_bs_sic_wz,
    two_user_region,
    wz_quantization,
)
from multicell_tools.utils import db_to_linear

logger = logging.getLogger(__name__)

# Closed-form spread of the four sum rates at SNR=30 dB, INR=5 dB, C=5 is about 1.07 bits,
# so the nominal 1-bit spread is checked with a 1.1-bit tolerance
NOMINAL_REGIONS_SPREAD = 1.0
CLOSE_REGIONS_TOLERANCE = 1.1


@dataclass
class VerifyOptions:
    """Configuration for a verification run."""

    seed: int = 2011
    quick: bool = False  # one tenth of the randomized trials
    campaign: bool = False
    config: Optional[SimConfig] = None


@dataclass
class SuiteResult:
    """Outcome of one property suite."""

    name: str
    checks: int = 0
    failures: list[str] = field(default_factory=list)
    elapsed: float = 0.0

    @property
    def passed(self) -> bool:
        """True when every check held."""
        return not self.failures

    def check(self, condition: bool, message: str) -> None:
        """Record one check; keep the message when it fails."""
        self.checks += 1
        if not condition:
            self.failures.append(message)


@dataclass
class VerificationReport:
    """All suite results of a run."""

    suites: list[SuiteResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        """True when every suite passed."""
        return all(suite.passed for suite in self.suites)

    def to_text(self, max_failures: int = 5) -> str:
        """One status line per suite, followed by the first failures of failed suites."""
        lines = []
        for suite in self.suites:
            status = "PASS" if suite.passed else "FAIL"
            lines.append(f"{status} {suite.name}: {suite.checks} checks in {suite.elapsed:.2f}s")
            lines.extend(f"    {message}" for message in suite.failures[:max_failures])
            if len(suite.failures) > max_failures:
                lines.append(f"    ... {len(suite.failures) - max_failures} more")
        verdict = "all suites passed" if self.passed else "verification FAILED"
        lines.append(verdict)
        return "\n".join(lines)


def _count(options: VerifyOptions, full: int) -> int:
    return max(full // 10, 1) if options.quick else full


def suite_half_bit(options: VerifyOptions) -> SuiteResult:
    """Rate loss at C = 1/2 log2(1 + SINR) is in (0, 1/2] for random SINRs."""
    result = SuiteResult("half-bit gap")
    rng = np.random.default_rng(options.seed)
    for sinr in db_to_linear(rng.uniform(-10.0, 50.0, size=_count(options, 10000))):
        c, gap = half_bit_point(float(sinr))
        curve = rate_curve(float(sinr), [c])
        direct = curve.limit - float(curve.rates[0])
        result.check(0.0 < gap <= 0.5 + 1e-9, f"gap {gap} out of (0, 1/2] at SINR {sinr}")
        result.check(abs(direct - gap) <= 1e-9, f"closed form {gap} != {direct} at SINR {sinr}")
    return result


def suite_two_user_regions(options: VerifyOptions) -> SuiteResult:
    """Sum-rate comparisons of the symmetric two-user regions."""
    result = SuiteResult("two-user regions")
    snr = float(db_to_linear(30.0))

    def sums(inr_db: float, c: float) -> dict[str, float]:
        inr = float(db_to_linear(inr_db))
        schemes = ("wz", "nowz", "joint", "baseline")
        return {s: two_user_region(s, snr, inr, c).sum_rate for s in schemes}

    strong = sums(20.0, 5.0)
    gain = strong["wz"] - strong["baseline"]
    result.check(abs(gain - 2.8) <= 0.3, f"per-BS gain over baseline {gain:.4f}, expected 2.8")
    joint_gain = strong["joint"] - strong["wz"]
    result.check(
        abs(joint_gain - 2.5) <= 0.5, f"joint gain over per-BS {joint_gain:.4f}, expected 2.5"
    )
    result.check(strong["wz"] >= strong["nowz"], "noWZ region exceeds WZ region")

    low_backhaul = sums(20.0, 2.0)
    result.check(
        low_backhaul["baseline"] > low_backhaul["wz"],
        f"baseline {low_backhaul['baseline']:.4f} <= per-BS {low_backhaul['wz']:.4f} at C=2",
    )

    weak = sums(5.0, 5.0)
    spread = max(weak.values()) - min(weak.values())
    result.check(
        spread <= CLOSE_REGIONS_TOLERANCE,
        f"regions at INR=5 dB spread {spread:.4f} bits, above the "
        f"{CLOSE_REGIONS_TOLERANCE:g}-bit tolerance (nominal {NOMINAL_REGIONS_SPREAD:g} bit)",
    )

    region = two_user_region("wz", snr, float(db_to_linear(20.0)), 5.0)
    (a1, a2), (b1, b2) = region.corners
    result.check(abs(a1 - b2) <= 1e-12 and abs(a2 - b1) <= 1e-12, "region is not symmetric")
    return result


def suite_wyner_certificates(options: VerifyOptions) -> SuiteResult:
    """Gap certificates for both schemes plus the nowz <= wz <= cut-set sandwich."""
    result = SuiteResult("Wyner gap certificates")
    trials = _count(options, 10000)
    for scheme in ("wz", "nowz"):
        ensemble = GapEnsemble(EnsembleOptions(trials=trials, scheme=scheme, seed=options.seed))
        summary = ensemble.run()
        result.check(summary.passed, f"{scheme}: {summary.violations} violations")
        if scheme == "wz":
            for wyner in ensemble.instances():
                nowz, wz = wyner_sum_rate_nowz(wyner), wyner_sum_rate_wz(wyner)
                upper = cutset_upper_bound_wyner(wyner)
                result.check(
                    nowz <= wz + 1e-9 and wz <= upper + 1e-9,
                    f"sandwich broken: {nowz:.6f}, {wz:.6f}, {upper:.6f}",
                )
    return result


def suite_allocation(options: VerifyOptions) -> SuiteResult:
    """Water-filling against the grid oracle, KKT residual and budget exactness."""
    result = SuiteResult("backhaul allocation")
    rng = np.random.default_rng(options.seed)
    seeds = np.random.SeedSequence(options.seed).spawn(_count(options, 100))
    for seed in seeds:
        net = random_instance(seed, 3)
        order = DecodingOrder.identity(3)
        c_total = float(rng.uniform(0.0, 6.0))
        sinr = effective_sinrs_wz(net, order)

        alloc = optimal_allocation(net, order, c_total)
        grid = allocation_oracle_grid(net, order, c_total, step=0.01)
        best, oracle = sum_rate(sinr, alloc.c), sum_rate(sinr, grid.c)
        result.check(abs(best - oracle) <= 1e-3, f"waterfill {best:.6f} vs grid {oracle:.6f}")
        result.check(oracle <= best + 1e-9, f"grid {oracle:.9f} beats waterfill {best:.9f}")
        residual = kkt_residual(net, order, alloc)
        result.check(residual <= 1e-8, f"KKT residual {residual:.3g}")
        result.check(
            abs(alloc.total - c_total) <= 1e-9 * max(1.0, c_total),
            f"budget {alloc.total} != {c_total}",
        )
    return result


def suite_kernel(options: VerifyOptions) -> SuiteResult:
    """Closed-form per-BS rates equal the covariance-based mutual information."""
    result = SuiteResult("rate kernel equivalence")
    rng = np.random.default_rng(options.seed)
    seeds = np.random.SeedSequence(options.seed + 1).spawn(_count(options, 1000))
    for seed in seeds:
        L = int(rng.integers(1, 6))
        net = random_instance(seed, L)
        order = DecodingOrder(tuple(int(k) for k in rng.permutation(L)))

        for closed, profile in (
            (rates_per_bs_sic_wz(net, order).rates, wz_quantization(net, order)),
            (rates_per_bs_sic_nowz(net, order).rates, nowz_quantization(net)),
        ):
            model = build_model(net, profile.q)
            for stage, user in enumerate(order.perm):
                oracle = model.mi(model.x([user]), model.yhat([user]), model.x(order.perm[:stage]))
                result.check(
                    abs(oracle - closed[user]) <= 1e-9,
                    f"L={L} user {user + 1}: closed form {closed[user]:.12f}, MI {oracle:.12f}",
                )

        wz = rates_per_bs_sic_wz(net, order).rates
        improved = rates_improved_per_bs_sic(net, order).rates
        result.check(bool(np.all(improved >= wz - 1e-9)), f"improved SIC below WZ at L={L}")
    return result


def suite_joint_decoding(options: VerifyOptions) -> SuiteResult:
    """Joint-decoding sum bound against the best per-BS SIC sum rate."""
    result = SuiteResult("joint-decoding dominance")
    seeds = np.random.SeedSequence(options.seed + 2).spawn(_count(options, 200))
    for seed in seeds:
        net = random_instance(seed, 2)
        order, rates = best_decoding_order(net, "wz")
        bound = nnc_sum_rate(nnc_region(net, wz_quantization(net, order)))
        result.check(
            bound >= rates.sum_rate - 1e-9,
            f"joint bound {bound:.6f} below per-BS {rates.sum_rate:.6f}",
        )

    net = make_symmetric_two_user(1000.0, 100.0, 5.0)
    bound = nnc_sum_rate(nnc_region(net, QuantizationProfile(q=np.full(2, net.noise))))
    per_bs = best_decoding_order(net, "wz")[1].sum_rate
    result.check(bound >= per_bs, f"q=N0 joint bound {bound:.6f} below per-BS {per_bs:.6f}")
    return result


def suite_campaign(options: VerifyOptions) -> SuiteResult:
    """Statistical checks of the OFDMA campaign (slow)."""
    result = SuiteResult("OFDMA campaign")
    cfg = options.config or SimConfig(seed=options.seed)
    drops = prepare_drops(cfg)

    runs = {}
    for backhaul, scheme in itertools.product((180.0, 360.0), ("baseline", "nowz", "wz")):
        point = cfg.replace(scheme=scheme, backhaul_per_bs_mbps=backhaul, allocation="uniform")
        runs[(scheme, backhaul)] = run_campaign(point, drops)

    baseline = runs[("baseline", 180.0)].mean_percell_mbps
    result.check(abs(baseline - 55.5) <= 0.2 * 55.5, f"baseline per-cell {baseline:.2f} Mbps")
    table = improvement_table(
        [runs[("nowz", 180.0)], runs[("wz", 180.0)]], runs[("baseline", 180.0)]
    )
    nowz_pct, wz_pct = table["improvement_pct_vs_baseline"]
    result.check(45.0 <= wz_pct <= 90.0, f"WZ improvement {wz_pct:.1f}%")
    result.check(20.0 <= nowz_pct <= 55.0, f"noWZ improvement {nowz_pct:.1f}%")

    for backhaul in (180.0, 360.0):
        wz, nowz = runs[("wz", backhaul)], runs[("nowz", backhaul)]
        result.check(
            bool(np.all(wz.tone_sum_bits >= nowz.tone_sum_bits - 1e-9)),
            f"noWZ beats WZ on some tone at {backhaul} Mbps",
        )
        result.check(
            bool(np.all(wz.sorted_rates() >= nowz.sorted_rates() - 1e-9)),
            f"WZ CDF does not dominate noWZ at {backhaul} Mbps",
        )
    wide_gap = runs[("wz", 360.0)].mean_percell_mbps - runs[("nowz", 360.0)].mean_percell_mbps
    result.check(
        wide_gap <= 0.1 * runs[("wz", 360.0)].mean_percell_mbps,
        f"WZ - noWZ gap {wide_gap:.2f} Mbps at 360 Mbps",
    )

    cdf = cdf_frame(runs.values())["cdf"].to_numpy()
    result.check(bool(np.all((cdf > 0) & (cdf <= 1))), "CDF outside (0, 1]")

    first = evaluate_drop(cfg, drops[0], "wz", cfg.backhaul_per_bs_mbps, "optimized")
    result.check(bool(np.all(np.isfinite(first))), "non-finite optimized rates")

    levels = [60.0, 120.0, 180.0, 360.0, math.inf]
    sweep = sweep_backhaul(cfg.replace(scheme="wz"), levels, prepared=drops)
    uniform = sweep[sweep["allocation"] == "uniform"]["mean_percell_mbps"].to_numpy()
    optimized = sweep[sweep["allocation"] == "optimized"]["mean_percell_mbps"].to_numpy()
    result.check(bool(np.all(optimized >= uniform - 1e-6)), "optimized below uniform")
    result.check(bool(np.all(np.diff(uniform) >= -1e-6)), "uniform curve decreases")
    result.check(bool(np.all(np.diff(optimized) >= -1e-6)), "optimized curve decreases")
    result.check(90.0 <= uniform[-1] <= 130.0, f"plateau {uniform[-1]:.2f} Mbps per cell")
    return result


SUITES: list[Callable[[VerifyOptions], SuiteResult]] = [
    suite_half_bit,
    suite_two_user_regions,
    suite_wyner_certificates,
    suite_allocation,
    suite_kernel,
    suite_joint_decoding,
]


def run_verification(options: Optional[VerifyOptions] = None) -> VerificationReport:
    """Run every suite (the campaign suite only when requested)."""
    options = options or VerifyOptions()
    suites = SUITES + ([suite_campaign] if options.campaign else [])
    report = VerificationReport()
    for suite in suites:
        start = time.perf_counter()
        outcome = suite(options)
        outcome.elapsed = time.perf_counter() - start
        logger.info(
            "%s: %d checks, %d failures", outcome.name, outcome.checks, len(outcome.failures)
        )
        report.suites.append(outcome)
    return report
