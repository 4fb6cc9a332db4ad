"""Tests for the joint-decoding region, cut-set bound and gap certificates."""

import math

import numpy as np
import pytest

from multicell_tools.bounds import (
    EnsembleOptions,
    GapCertificate,
    GapEnsemble,
    cutset_upper_bound_wyner,
    gap_certificate,
    gap_limit,
    loose_nowz_limit,
    nnc_region,
    nnc_sum_rate,
    nowz_to_wz_gap,
    wyner_rates,
    wyner_sum_rate_nowz,
    wyner_sum_rate_wz,
)
from multicell_tools.network import make_symmetric_two_user, make_wyner, random_instance
from multicell_tools.rates import (
    QuantizationProfile,
    Scheme,
    UnknownSchemeError,
    best_decoding_order,
    wz_quantization,
)
from multicell_tools.utils import EnumerationLimitError


def _unit_q(size: int) -> QuantizationProfile:
    return QuantizationProfile(q=np.ones(size))


class TestNncRegion:
    """Tests for the noisy-network-coding region."""

    def test_symmetric_bounds(self) -> None:
        """Test single-user and sum bounds of the symmetric example with q = N0."""
        net = make_symmetric_two_user(1000.0, 100.0, 5.0)
        region = nnc_region(net, _unit_q(2))
        assert region.L == 2
        assert region.bound((0,)) == pytest.approx(0.5 * math.log2(551.0))
        assert nnc_sum_rate(region) == pytest.approx(0.5 * math.log2(551.0**2 - 1e5))

    def test_beats_per_bs_on_symmetric_example(self) -> None:
        """Test that joint decoding with q = N0 beats per-BS SIC here."""
        net = make_symmetric_two_user(1000.0, 100.0, 5.0)
        _, per_bs = best_decoding_order(net, "wz")
        assert nnc_sum_rate(nnc_region(net, _unit_q(2))) >= per_bs.sum_rate

    def test_dominates_per_bs_at_wz_quantization(self) -> None:
        """Test joint decoding against the best per-BS order at the same q."""
        for seed in range(20):
            net = random_instance(seed, 2)
            order, per_bs = best_decoding_order(net, "wz")
            bound = nnc_sum_rate(nnc_region(net, wz_quantization(net, order)))
            assert bound >= per_bs.sum_rate - 1e-9

    @pytest.mark.parametrize("seed", range(8))
    def test_bounds_grow_with_each_backhaul(self, seed: int) -> None:
        """Test that raising any single C_i never lowers a constraint."""
        rng = np.random.default_rng(seed)
        net = random_instance(seed, 3)
        q = QuantizationProfile(q=10.0 ** rng.uniform(-1.0, 1.0, size=3))
        before = nnc_region(net, q).constraints
        for user in range(3):
            backhaul = net.backhaul.copy()
            backhaul[user] += float(rng.uniform(0.1, 2.0))
            after = nnc_region(net.with_backhaul(backhaul), q).constraints
            for subset, bound in before.items():
                assert after[subset] >= bound - 1e-12

    @pytest.mark.parametrize("seed", range(8))
    def test_sum_rate_grows_with_backhaul(self, seed: int) -> None:
        """Test that raising every C_i never lowers the sum-rate bound."""
        net = random_instance(seed, 3)
        q = _unit_q(3)
        previous = nnc_sum_rate(nnc_region(net, q))
        for step in (0.5, 1.0, 2.0, 4.0):
            current = nnc_sum_rate(nnc_region(net.with_backhaul(net.backhaul + step), q))
            assert current >= previous - 1e-12
            previous = current

    def test_subset_order_ignored(self) -> None:
        """Test that bounds are looked up by sorted subset."""
        region = nnc_region(random_instance(3, 3), _unit_q(3))
        assert region.bound((2, 0)) == region.bound((0, 2))
        assert len(region.constraints) == 7

    def test_frame(self) -> None:
        """Test the region table layout."""
        frame = nnc_region(random_instance(3, 2), _unit_q(2)).to_frame()
        assert list(frame.columns) == ["subset", "bound_bits"]
        assert list(frame["subset"]) == ["1", "2", "1+2"]

    def test_infinite_q(self) -> None:
        """Test that users without a description get nothing through them."""
        net = make_symmetric_two_user(1000.0, 0.0, 5.0)
        region = nnc_region(net, QuantizationProfile(q=[math.inf, 1.0]))
        assert region.bound((0,)) == pytest.approx(0.0)

    def test_rejects_non_positive_q(self) -> None:
        """Test that q must be positive."""
        net = make_symmetric_two_user(10.0, 1.0, 1.0)
        with pytest.raises(ValueError, match="positive"):
            nnc_region(net, QuantizationProfile(q=[0.0, 1.0]))

    def test_enumeration_limit(self) -> None:
        """Test the subset-count guard."""
        with pytest.raises(EnumerationLimitError):
            nnc_region(random_instance(0, 17), _unit_q(17))


class TestWynerBounds:
    """Tests for the Wyner-model sum rates and the cut-set bound."""

    def test_single_user(self) -> None:
        """Test that one user decodes at its base-station."""
        wyner = make_wyner([100.0], [], [1.0])
        assert cutset_upper_bound_wyner(wyner) == pytest.approx(1.0)
        assert wyner_sum_rate_wz(wyner) == pytest.approx(1.0)

    def test_two_users(self) -> None:
        """Test hand-computed rates of a two-user chain."""
        wyner = make_wyner([100.0, 100.0], [10.0], [2.0, 2.0])
        assert cutset_upper_bound_wyner(wyner) == pytest.approx(4.0)
        rates = wyner_rates(wyner, "wz")
        assert rates[0] == pytest.approx(0.5 * math.log2(101.0 / 7.25))
        assert rates[1] == pytest.approx(2.0)
        nowz = wyner_rates(wyner, "nowz")
        assert nowz[0] == pytest.approx(0.5 * math.log2(101.625 / 7.875))

    def test_sandwich(self) -> None:
        """Test nowz <= wz <= cut-set on random weak-interference chains."""
        for seed in range(50):
            wyner = make_wyner(*_random_chain(seed, 5))
            nowz, wz = wyner_sum_rate_nowz(wyner), wyner_sum_rate_wz(wyner)
            assert nowz <= wz + 1e-12
            assert wz <= cutset_upper_bound_wyner(wyner) + 1e-12

    def test_nowz_loss_at_most_half_bit(self) -> None:
        """Test the per-user loss of dropping Wyner-Ziv coding."""
        for seed in range(50):
            loss = nowz_to_wz_gap(make_wyner(*_random_chain(seed, 4)))
            assert np.all(loss <= 0.5 + 1e-12)
            assert np.all(loss >= -1e-12)

    def test_rejects_other_schemes(self) -> None:
        """Test that only wz and nowz have Wyner rates."""
        wyner = make_wyner([10.0, 10.0], [1.0], [1.0, 1.0])
        with pytest.raises(UnknownSchemeError):
            wyner_rates(wyner, "improved")


def _random_chain(seed: int, size: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    rng = np.random.default_rng(seed)
    snr = 10.0 ** (rng.uniform(0.0, 6.0, size=size))
    inr = rng.uniform(0.0, 1.0, size=size - 1) * snr[:-1]
    return snr, inr, rng.uniform(0.0, 12.0, size=size)


class TestGapLimits:
    """Tests for the constant-gap limits."""

    def test_values(self) -> None:
        """Test the limits for both schemes."""
        assert gap_limit(3, "wz") == 2.5
        assert gap_limit(3, "nowz") == pytest.approx(0.5 * (1.0 + math.log2(3.0)) * 3 - 0.5)
        assert loose_nowz_limit(3) == 3.5
        assert gap_limit(4, "nowz") < loose_nowz_limit(4)

    def test_rejects_joint(self) -> None:
        """Test that the joint scheme has no certificate."""
        with pytest.raises(UnknownSchemeError):
            gap_limit(2, "joint")


class TestGapCertificate:
    """Tests for GapCertificate class."""

    def test_certificate(self) -> None:
        """Test a hand-computed certificate."""
        cert = gap_certificate(make_wyner([100.0, 100.0], [10.0], [2.0, 2.0]))
        assert cert.scheme is Scheme.PER_BS_WZ
        assert cert.L == 2
        assert cert.gap == pytest.approx(2.0 - 0.5 * math.log2(101.0 / 7.25))
        assert cert.ok
        assert "ok=true" in cert.to_text()
        assert "scheme=wz" in cert.to_text()

    def test_no_claim_without_weak_interference(self) -> None:
        """Test that strong interference makes the certificate trivially ok."""
        cert = GapCertificate(
            scheme=Scheme.PER_BS_WZ,
            L=2,
            achievable_sum=0.0,
            upper_bound=10.0,
            bound_limit=1.5,
            weak_interference=False,
        )
        assert cert.ok
        assert "weak=false" in cert.to_text()

    def test_violation(self) -> None:
        """Test that a gap above the limit fails."""
        cert = GapCertificate(
            scheme=Scheme.PER_BS_WZ,
            L=2,
            achievable_sum=0.0,
            upper_bound=10.0,
            bound_limit=1.5,
            weak_interference=True,
        )
        assert not cert.ok


class TestGapEnsemble:
    """Tests for GapEnsemble class."""

    def test_default_options(self) -> None:
        """Test default options."""
        options = EnsembleOptions()
        assert options.trials == 10000
        assert options.L is None
        assert options.scheme == "wz"

    @pytest.mark.parametrize("scheme", ["wz", "nowz"])
    def test_run(self, scheme: str) -> None:
        """Test that a small ensemble passes."""
        summary = GapEnsemble(EnsembleOptions(trials=300, scheme=scheme, seed=1)).run()
        assert summary.passed
        assert summary.trials == 300
        assert summary.worst is not None
        assert summary.max_gap == pytest.approx(summary.worst.gap)
        assert summary.max_gap <= gap_limit(8, scheme)
        assert "violations=0" in summary.to_text()

    def test_reproducible(self) -> None:
        """Test that the seed fixes every instance."""
        first = GapEnsemble(EnsembleOptions(trials=20, seed=5)).instances()
        second = GapEnsemble(EnsembleOptions(trials=20, seed=5)).instances()
        assert all(a.network == b.network for a, b in zip(first, second))

    def test_fixed_size(self) -> None:
        """Test that L can be pinned."""
        instances = GapEnsemble(EnsembleOptions(trials=10, L=3)).instances()
        assert {w.L for w in instances} == {3}
        assert all(w.weak_interference for w in instances)

    def test_frame(self) -> None:
        """Test the per-trial table."""
        frame = GapEnsemble(EnsembleOptions(trials=5)).run().to_frame()
        assert list(frame.columns) == ["trial", "L", "achievable", "upper", "gap", "limit", "ok"]
        assert list(frame["trial"]) == [1, 2, 3, 4, 5]

    def test_invalid(self) -> None:
        """Test option validation."""
        with pytest.raises(ValueError, match="trials"):
            GapEnsemble(EnsembleOptions(trials=-1))
        with pytest.raises(ValueError, match="at least 1"):
            GapEnsemble(EnsembleOptions(L=0))
        with pytest.raises(UnknownSchemeError):
            GapEnsemble(EnsembleOptions(scheme="joint"))

    @pytest.mark.slow
    def test_full_ensemble(self) -> None:
        """Test the full-size ensemble of both schemes."""
        for scheme in ("wz", "nowz"):
            assert GapEnsemble(EnsembleOptions(scheme=scheme)).run().passed
