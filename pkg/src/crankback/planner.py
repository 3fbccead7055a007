"""Threshold optimization and expected waste-distance modeling.

The success probability H(p_tr) is monotone nondecreasing in p_tr (larger
p_tr shrinks every return region), so the optimizer brackets the target by
bisection.  Waste accounting treats attempts as independent: the number of
attempts until success is geometric, a return at node k wastes a 2*d*k
round trip, and the successful traversal adds d*n.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

from .analysis import ReturnProfile, Scenario, ScenarioError, return_profile_grid

__all__ = [
    "AttemptModel",
    "WasteReport",
    "OptimizeResult",
    "OptimizeError",
    "optimize_ptr",
    "attempt_distribution",
    "waste_per_attempt",
    "expected_total_distance",
    "waste_per_success",
    "waste_report",
]

P_TR_LO = 1e-6
P_TR_HI = 1.0 - 1e-6
DEFAULT_OPT_TOL = 1e-3
MAX_BISECT_ITER = 200
# keep halving until the p_tr bracket is this narrow, so a flat H cannot
# leave the answer far from the true preimage
_BRACKET_WIDTH = 1e-4


class OptimizeError(RuntimeError):
    """Bisection failed to converge; carries the final bracket."""

    def __init__(self, message: str, bracket: tuple[float, float]):
        super().__init__(message)
        self.bracket = bracket


@dataclass(frozen=True)
class OptimizeResult:
    """Outcome of the threshold search.

    ``clipped`` marks an unattainable target: the returned p_tr is the
    nearest search endpoint and ``achieved`` its success probability.
    ``history`` records (lo, hi, h_lo, h_hi) after every bisection step.
    """

    p_tr: float
    achieved: float
    target: float
    clipped: bool
    iterations: int
    bracket: tuple[float, float]
    history: tuple[tuple[float, float, float, float], ...] = ()


@dataclass(frozen=True)
class AttemptModel:
    """Geometric law for the number of attempts until the first success."""

    p_success: float

    def pmf(self, k: int) -> float:
        if k < 1:
            return 0.0
        return (1.0 - self.p_success) ** (k - 1) * self.p_success

    def cdf(self, k: int) -> float:
        if k < 1:
            return 0.0
        return 1.0 - (1.0 - self.p_success) ** k

    @property
    def mean_attempts(self) -> float:
        return 1.0 / self.p_success


@dataclass(frozen=True)
class WasteReport:
    """Expected travel accounting per attempt and per success, in units of
    the per-hop cost used to build it."""

    waste_per_attempt: float
    waste_per_success: float
    expected_total_distance: float
    attempts_per_success: float
    p_success: float
    hop_cost: float
    n: int
    source: str = "analytic"
    attempts: int | None = None
    successes: int | None = None
    seed: int | None = None


def attempt_distribution(p_success: float) -> AttemptModel:
    """Geometric attempt model; p_success = 0 admits no success at all."""
    if not 0.0 < p_success <= 1.0:
        raise ScenarioError(
            f"p_success must lie in (0, 1], got {p_success!r}"
        )
    return AttemptModel(float(p_success))


def _entries(profile: ReturnProfile) -> list[float]:
    if any(v is None for v in profile.p_return):
        raise ScenarioError("waste accounting needs a fully computed profile")
    return [float(v) for v in profile.p_return]


def waste_per_attempt(profile: ReturnProfile, d: float) -> float:
    """Expected wasted round-trip distance of a single attempt:
    sum_k P_k * 2 * d * k."""
    return math.fsum(p * 2.0 * d * k for k, p in enumerate(_entries(profile), start=1))


def waste_per_success(profile: ReturnProfile, cost: float) -> float:
    """Expected waste accumulated per successful delivery, in units of the
    per-hop ``cost``: waste_per_attempt / p_success."""
    if profile.p_success is None or profile.p_success <= 0.0:
        raise ScenarioError("waste_per_success requires p_success > 0")
    return waste_per_attempt(profile, cost) / profile.p_success


def expected_total_distance(profile: ReturnProfile, d: float, n: int) -> float:
    """Expected total travel until delivery: the geometric retry sum
    collapses to waste_per_attempt / p_success, plus the final traversal d*n."""
    if profile.p_success is None or profile.p_success <= 0.0:
        raise ScenarioError("expected_total_distance requires p_success > 0")
    return waste_per_attempt(profile, d) / profile.p_success + d * n


def waste_report(
    profile: ReturnProfile, d: float, n: int, source: str = "analytic"
) -> WasteReport:
    """Assemble the full waste accounting for a profile."""
    wpa = waste_per_attempt(profile, d)
    wps = waste_per_success(profile, d)
    return WasteReport(
        waste_per_attempt=wpa,
        waste_per_success=wps,
        expected_total_distance=wps + d * n,
        attempts_per_success=1.0 / profile.p_success,
        p_success=profile.p_success,
        hop_cost=d,
        n=n,
        source=source,
    )


def optimize_ptr(
    s: Scenario,
    target: float,
    tol: float = DEFAULT_OPT_TOL,
    *,
    h_fn: Callable[[float], float] | None = None,
    max_iter: int = MAX_BISECT_ITER,
    grid_points: int | None = None,
) -> OptimizeResult:
    """Find p_tr with |H(p_tr) - target| <= tol by bracketing bisection.

    H is evaluated with the grid engine over the full profile (all nodes).
    Targets outside [H(lo), H(hi)] return the nearest endpoint with the
    ``clipped`` flag set.  ``h_fn`` substitutes the success function, for
    tests or precomputed sweeps.
    """
    if not 0.0 < target < 1.0:
        raise ScenarioError(f"target must lie strictly inside (0,1), got {target!r}")
    if not tol > 0.0:
        raise ScenarioError(f"tol must be > 0, got {tol!r}")
    if h_fn is None:
        kwargs = {"richardson": False}
        if grid_points is not None:
            kwargs["grid_points"] = grid_points

        def h_fn(p: float) -> float:
            return return_profile_grid(replace(s, p_tr=p), **kwargs).p_success

    lo, hi = P_TR_LO, P_TR_HI
    h_lo, h_hi = h_fn(lo), h_fn(hi)
    if target < h_lo:
        return OptimizeResult(lo, h_lo, target, True, 0, (lo, hi))
    if target > h_hi:
        return OptimizeResult(hi, h_hi, target, True, 0, (lo, hi))
    history: list[tuple[float, float, float, float]] = []
    for iteration in range(1, max_iter + 1):
        mid = 0.5 * (lo + hi)
        h_mid = h_fn(mid)
        if h_mid < target:
            lo, h_lo = mid, h_mid
        else:
            hi, h_hi = mid, h_mid
        history.append((lo, hi, h_lo, h_hi))
        if abs(h_mid - target) <= tol and (hi - lo) <= _BRACKET_WIDTH:
            return OptimizeResult(
                mid, h_mid, target, False, iteration, (lo, hi), tuple(history)
            )
    raise OptimizeError(
        f"no convergence after {max_iter} iterations; "
        f"bracket [{lo:.9f}, {hi:.9f}] with H in [{h_lo:.9f}, {h_hi:.9f}]",
        (lo, hi),
    )
