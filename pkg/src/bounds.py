"""
Closed-form bounds for RWI
All logarithms are natural. Every function is pure and consumes no randomness.
"""

import math
from typing import Dict, List, Optional

from config.config import Config

M_DEFAULT = Config.BOUND_CONSTANT_M


def epsilon_threshold(d: int, M: float = M_DEFAULT) -> float:
    """Smallest slack covered by the constant-time guarantee: sqrt(M(ln(4d)+1)/d)"""
    if d < 1:
        raise ValueError(f"d must be at least 1, got {d}")
    return math.sqrt(M * (math.log(4 * d) + 1) / d)


def theorem_regime(epsilon: float, d: int, M: float = M_DEFAULT) -> bool:
    return epsilon >= epsilon_threshold(d, M)


def theorem_bound(epsilon: float, M: float = M_DEFAULT) -> float:
    """Ceiling 4M/ε² on the expected number of loop-A steps per insertion"""
    if not 0 < epsilon <= 1:
        raise ValueError(f"epsilon must be in (0, 1], got {epsilon}")
    return 4 * M / epsilon ** 2


def _decay(epsilon: float, d: int, M: float) -> float:
    return epsilon ** 2 * d / M


def component_count_bound(n: int, k: int, epsilon: float, d: int, M: float = M_DEFAULT) -> float:
    """Expected number of G_S components of size k is at most (n/k²)·exp(-ε²dk/M)"""
    if k < 1:
        raise ValueError(f"k must be at least 1, got {k}")
    return n / k ** 2 * math.exp(-_decay(epsilon, d, M) * k)


def k0_bound(n: int, epsilon: float, d: int, M: float = M_DEFAULT) -> float:
    """W.h.p. ceiling on component size: (M/(ε²d))·ln n"""
    if n < 2:
        raise ValueError(f"n must be at least 2, got {n}")
    return M / (epsilon ** 2 * d) * math.log(n)


def max_component_allowance(n: int, epsilon: float, d: int, M: float = M_DEFAULT) -> int:
    """Largest component size accepted in theorem-regime runs: max(1, ceil(k0) + 2)"""
    return max(1, math.ceil(k0_bound(n, epsilon, d, M)) + 2)


def walk_exit_bound(k: int, cycle_length: int, d: int) -> float:
    """
    Expected steps a replacement walk spends in a size-k component: k for a
    tree, k + c/(d^c - 1) when the component has one cycle of length c.
    """
    if cycle_length <= 0:
        return float(k)
    if d == 1:
        return math.inf
    return k + cycle_length / (d ** cycle_length - 1)


def large_component_tail(n: int, k0: float, epsilon: float, d: int, M: float = M_DEFAULT) -> float:
    """Union bound on a component larger than k0: n·Σ_{k0<k<n} k⁻²·exp(-ε²dk/M)"""
    rate = _decay(epsilon, d, M)
    total = 0.0
    for k in range(int(math.floor(k0)) + 1, n):
        term = math.exp(-rate * k) / k ** 2
        total += term
        if term < 1e-300:
            break
    return n * total


def multi_cycle_bound(n: int, d: int, k0: float) -> float:
    """Union bound on a set of at most k0 vertices spanning two cycles: (2d/n)·Σ k²(2de)^k"""
    base = 2 * d * math.e
    total = 0.0
    for k in range(1, int(math.floor(k0)) + 1):
        try:
            total += k ** 2 * base ** k
        except OverflowError:
            return math.inf
    return 2 * d / n * total


def insertion_time_accounting(epsilon: float, d: int, M: float = M_DEFAULT) -> float:
    """2·Σ_{k≥1} exp(-ε²dk/M) = 2/(exp(ε²d/M) - 1)"""
    rate = _decay(epsilon, d, M)
    if rate == 0:
        return math.inf
    return 2 / math.expm1(rate)


def bounds_table(d: int, M: float = M_DEFAULT, n: Optional[int] = None,
                 epsilon: Optional[float] = None, k_max: int = 10) -> Dict:
    """Everything the `bounds` subcommand prints, as plain data"""
    threshold = epsilon_threshold(d, M)
    grid = sorted({round(x / 20, 2) for x in range(1, 21)} | ({epsilon} if epsilon else set()))
    rows: List[Dict] = [
        {"epsilon": eps, "theorem_bound": theorem_bound(eps, M),
         "in_regime": eps >= threshold}
        for eps in grid
    ]
    table = {"d": d, "M": M, "epsilon_threshold": threshold, "theorem_bounds": rows,
             "walk_exit_bounds": [
                 {"k": k, "tree": walk_exit_bound(k, 0, d), "unicyclic": walk_exit_bound(k, 2, d)}
                 for k in range(1, k_max + 1)
             ]}
    if n is not None and epsilon is not None:
        table["k0_bound"] = k0_bound(n, epsilon, d, M)
        table["max_component_allowance"] = max_component_allowance(n, epsilon, d, M)
        table["large_component_tail"] = large_component_tail(n, table["k0_bound"], epsilon, d, M)
        table["multi_cycle_bound"] = multi_cycle_bound(n, d, table["k0_bound"])
        table["component_count_bounds"] = [
            {"k": k, "bound": component_count_bound(n, k, epsilon, d, M)} for k in range(1, k_max + 1)
        ]
        table["insertion_time_accounting"] = insertion_time_accounting(epsilon, d, M)
    return table
