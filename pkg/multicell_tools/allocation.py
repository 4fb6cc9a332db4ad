"""Sum-backhaul allocation across users by water-filling on the effective SINRs."""

import logging
import math
from dataclasses import dataclass
from typing import Union

import numpy as np
import pandas as pd
from scipy.optimize import bisect

from multicell_tools.network import NetworkInstance
from multicell_tools.rates import DecodingOrder, effective_sinrs_wz
from multicell_tools.utils import EnumerationLimitError

logger = logging.getLogger(__name__)

BISECT_XTOL = 1e-12
BISECT_MAXITER = 200
GRID_MAX_USERS = 4


@dataclass(frozen=True, eq=False)
class Allocation:
    """Backhaul capacities per user (bits) and the water level alpha that produced them."""

    c: np.ndarray
    alpha: float

    @property
    def total(self) -> float:
        """Sum of the allocated capacities."""
        return float(np.sum(self.c))

    @property
    def beta(self) -> float:
        """2^(2 alpha), the water level on the SINR scale."""
        return float(np.exp2(2.0 * self.alpha))

    def to_frame(self) -> pd.DataFrame:
        """Rows ``user,C_bits`` for every user followed by an ``alpha`` row."""
        users: list[Union[int, str]] = list(range(1, self.c.shape[0] + 1))
        users.append("alpha")
        return pd.DataFrame({"user": users, "C_bits": np.append(self.c, self.alpha)})


def sum_rate(sinr: np.ndarray, c: np.ndarray) -> float:
    """Objective: sum_k 1/2 log2((1 + s_k) / (1 + 2^{-2 c_k} s_k))."""
    s = np.asarray(sinr, dtype=float)
    return float(np.sum(0.5 * np.log2((1.0 + s) / (1.0 + np.exp2(-2.0 * np.asarray(c)) * s))))


def _levels(sinr: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.asarray(0.5 * np.log2(sinr))


def waterfill(sinr: Union[np.ndarray, list[float]], c_total: float) -> Allocation:
    """
    Water-fill a backhaul budget over users with effective SINRs ``sinr``.

    c_k = max(1/2 log2 SINR_k - alpha, 0) with alpha chosen so the c_k sum to c_total.
    Alpha is located by bisection and then solved exactly on the active set.

    Args:
        sinr: Effective SINRs (linear, non-negative)
        c_total: Total budget in bits (may be inf)

    Returns:
        Allocation

    Raises:
        ValueError: If c_total is negative or an SINR is negative
    """
    s = np.asarray(sinr, dtype=float).reshape(-1)
    if c_total < 0 or math.isnan(c_total):
        raise ValueError(f"Backhaul budget must be non-negative, got {c_total}")
    if np.any(s < 0) or np.any(np.isnan(s)):
        raise ValueError("SINR values must be non-negative")

    levels = _levels(s)
    finite = np.isfinite(levels)
    if math.isinf(c_total):
        return Allocation(c=np.full(s.shape, math.inf), alpha=-math.inf)
    if not np.any(finite):
        # every user is silent; the budget is split evenly and carries no rate
        return Allocation(c=np.full(s.shape, c_total / s.shape[0]), alpha=-math.inf)
    top = float(np.max(levels[finite]))
    if c_total == 0:
        return Allocation(c=np.zeros(s.shape), alpha=top)

    def excess(alpha: float) -> float:
        return float(np.sum(np.maximum(levels[finite] - alpha, 0.0))) - c_total

    low = float(np.min(levels[finite])) - c_total - 1.0
    alpha = float(bisect(excess, low, top, xtol=BISECT_XTOL, maxiter=BISECT_MAXITER))

    # exact level on the active set
    for _ in range(s.shape[0]):
        active = finite & (levels > alpha)
        refined = (float(np.sum(levels[active])) - c_total) / int(np.sum(active))
        if refined == alpha:
            break
        alpha = refined

    c = np.where(finite, np.maximum(levels - alpha, 0.0), 0.0)
    logger.debug("Water level %.6f, %d of %d users active", alpha, int(np.sum(c > 0)), s.size)
    return Allocation(c=c, alpha=alpha)


def optimal_allocation(net: NetworkInstance, order: DecodingOrder, c_total: float) -> Allocation:
    """
    Optimal split of a total backhaul budget for per-BS SIC with Wyner-Ziv coding.

    The effective SINRs are those induced by ``order``; the order itself is not
    optimized here.
    """
    return waterfill(effective_sinrs_wz(net, order), c_total)


def _compositions(units: int, parts: int) -> np.ndarray:
    if parts == 1:
        return np.array([[units]], dtype=int)
    if parts == 2:
        first = np.arange(units + 1)
        return np.column_stack([first, units - first])
    blocks = []
    for first in range(units + 1):
        rest = _compositions(units - first, parts - 1)
        blocks.append(np.column_stack([np.full(rest.shape[0], first), rest]))
    return np.vstack(blocks)


def allocation_oracle_grid(
    net: NetworkInstance, order: DecodingOrder, c_total: float, step: float = 0.01
) -> Allocation:
    """
    Brute-force the best allocation on the grid {c : sum c_k = c_total, c_k in step * Z}.

    The grid spacing is adjusted to c_total / round(c_total / step) so that every grid
    point spends the full budget. The reported alpha is NaN.

    Raises:
        EnumerationLimitError: If L exceeds 4
        ValueError: If step is not positive or c_total is negative or infinite
    """
    if net.L > GRID_MAX_USERS:
        raise EnumerationLimitError(f"Grid search supports at most {GRID_MAX_USERS} users")
    if step <= 0:
        raise ValueError(f"Grid step must be positive, got {step}")
    if c_total < 0 or not math.isfinite(c_total):
        raise ValueError(f"Backhaul budget must be finite and non-negative, got {c_total}")
    if c_total == 0:
        return Allocation(c=np.zeros(net.L), alpha=math.nan)

    units = max(int(round(c_total / step)), 1)
    grid = _compositions(units, net.L) * (c_total / units)
    sinr = effective_sinrs_wz(net, order)
    objective = np.sum(0.5 * np.log2((1.0 + sinr) / (1.0 + np.exp2(-2.0 * grid) * sinr)), axis=1)
    best = int(np.argmax(objective))
    logger.debug("Grid search over %d points, best %.6f bits", grid.shape[0], objective[best])
    return Allocation(c=grid[best].astype(float), alpha=math.nan)


def kkt_residual(net: NetworkInstance, order: DecodingOrder, alloc: Allocation) -> float:
    """
    Largest violation of the stationarity and slackness conditions of an allocation.

    With g_k = 2^{-2c_k} s_k / (1 + 2^{-2c_k} s_k), interior users (c_k > 0) must share
    one multiplier lambda and users at zero must have g_k <= lambda. Lambda is the mean
    g_k over interior users; without interior users the residual is zero.
    """
    sinr = effective_sinrs_wz(net, order)
    if alloc.c.shape[0] != net.L:
        raise ValueError(f"Allocation has {alloc.c.shape[0]} entries, instance has {net.L}")

    leak = np.exp2(-2.0 * alloc.c) * sinr
    marginal = leak / (1.0 + leak)
    interior = alloc.c > 0
    if not np.any(interior):
        return 0.0

    multiplier = float(np.mean(marginal[interior]))
    stationarity = np.abs(marginal[interior] - multiplier)
    slackness = np.maximum(marginal[~interior] - multiplier, 0.0)
    return float(np.max(np.concatenate([stationarity, slackness])))
