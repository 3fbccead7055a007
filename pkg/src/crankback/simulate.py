"""Monte Carlo simulation of the turn-back protocol.

Trials draw unclipped Normal(M, V) hop delays, apply the configured return
policy at nodes 1..n-1, and record the first return node or a success.
Reproducibility contract: reports are a pure function of (scenario, config).
Trials are processed in fixed-size blocks whose generators derive from
(seed, block index), so the result is bit-identical for any worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import special

from .analysis import ReturnProfile, Scenario, ScenarioError, thresholds
from .planner import WasteReport

__all__ = [
    "SimConfig",
    "SimReport",
    "NoSuccessError",
    "simulate_profile",
    "simulate_baseline",
    "simulate_attempts",
]

BLOCK_TRIALS = 1 << 16
_MASK64 = (1 << 64) - 1
_Z99 = float(special.ndtri(0.995))  # two-sided 99% normal quantile

POLICIES = ("quantile", "rest_time")


class NoSuccessError(RuntimeError):
    """No attempt succeeded within the attempt cap."""


@dataclass(frozen=True)
class SimConfig:
    """Trial count, seed, and return policy.

    ``quantile`` uses the scenario's p_tr thresholds; ``rest_time`` returns
    whenever the residual budget drops below the constant ``t_tr``
    (legacy baseline, independent of the remaining hop count).  File
    loading enforces 0 < t_tr < deadline; direct construction permits
    degenerate values for experiments.
    """

    trials: int
    seed: int = 0
    policy: str = "quantile"
    t_tr: float | None = None
    attempt_cap: int = 10_000_000

    def __post_init__(self) -> None:
        if isinstance(self.trials, bool) or not isinstance(self.trials, int) or self.trials < 1:
            raise ScenarioError(f"trials must be an integer >= 1, got {self.trials!r}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int):
            raise ScenarioError(f"seed must be an integer, got {self.seed!r}")
        if self.policy not in POLICIES:
            raise ScenarioError(f"policy must be one of {POLICIES}, got {self.policy!r}")
        if self.policy == "rest_time":
            if self.t_tr is None or not math.isfinite(self.t_tr):
                raise ScenarioError("rest_time policy requires a finite t_tr")
        elif self.t_tr is not None:
            raise ScenarioError("t_tr is only meaningful for the rest_time policy")
        if self.attempt_cap < 1:
            raise ScenarioError("attempt_cap must be >= 1")


@dataclass(frozen=True)
class SimReport:
    """Trial tallies and the estimated return profile.

    ``counts`` holds returns at nodes 1..n-1 followed by the success count
    and always sums to ``trials``.  ``ci_halfwidth`` gives the 99%
    normal-approximation binomial half-width per entry (same order).
    ``on_time_fraction`` is the share of successes whose total delay met
    the deadline, None when there were no successes.
    """

    counts: tuple[int, ...]
    profile: ReturnProfile
    ci_halfwidth: tuple[float, ...]
    on_time_fraction: float | None
    seed: int
    trials: int
    policy: str
    t_tr: float | None = None


def _block_rng(seed: int, block: int) -> np.random.Generator:
    ss = np.random.SeedSequence(seed & _MASK64, spawn_key=(block,))
    return np.random.Generator(np.random.Philox(ss))


def _cuts_for(s: Scenario, cfg: SimConfig) -> np.ndarray:
    if cfg.policy == "quantile":
        return np.array([s.deadline - q for q in thresholds(s).q_star])
    return np.full(s.n - 1, s.deadline - float(cfg.t_tr))


def _block_outcomes(
    s: Scenario, cuts: np.ndarray, seed: int, block: int, take: int
) -> tuple[np.ndarray, np.ndarray]:
    """First-return node per trial (0 = success) and total path delay.

    A full block is always drawn and then sliced, so partial blocks see the
    same stream as full ones.
    """
    rng = _block_rng(seed, block)
    x = rng.normal(s.hop_mean, math.sqrt(s.hop_var), size=(BLOCK_TRIALS, s.n))
    if take < BLOCK_TRIALS:
        x = x[:take]
    t = np.cumsum(x, axis=1)
    exceeded = t[:, : s.n - 1] > cuts[None, :]
    returned = exceeded.any(axis=1)
    node = np.where(returned, exceeded.argmax(axis=1) + 1, 0)
    return node, t[:, -1]


def simulate_profile(s: Scenario, cfg: SimConfig, workers: int = 1) -> SimReport:
    """Estimate the first-return profile from ``cfg.trials`` independent trials."""
    cuts = _cuts_for(s, cfg)
    n_blocks = -(-cfg.trials // BLOCK_TRIALS)

    def job(block: int) -> tuple[np.ndarray, int]:
        take = min(BLOCK_TRIALS, cfg.trials - block * BLOCK_TRIALS)
        node, total = _block_outcomes(s, cuts, cfg.seed, block, take)
        counts = np.bincount(node, minlength=s.n)
        on_time = int((total[node == 0] <= s.deadline).sum())
        return counts, on_time

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(job, range(n_blocks)))
    else:
        results = [job(b) for b in range(n_blocks)]

    counts = np.zeros(s.n, dtype=np.int64)
    on_time = 0
    for c, ot in results:
        counts += c
        on_time += ot
    successes = int(counts[0])
    ordered = tuple(int(v) for v in counts[1:]) + (successes,)
    probs = tuple(v / cfg.trials for v in ordered)
    profile = ReturnProfile(probs[:-1], probs[-1], "montecarlo")
    ci = tuple(_Z99 * math.sqrt(p * (1.0 - p) / cfg.trials) for p in probs)
    return SimReport(
        counts=ordered,
        profile=profile,
        ci_halfwidth=ci,
        on_time_fraction=(on_time / successes) if successes else None,
        seed=cfg.seed,
        trials=cfg.trials,
        policy=cfg.policy,
        t_tr=cfg.t_tr,
    )


def simulate_baseline(s: Scenario, cfg: SimConfig, workers: int = 1) -> SimReport:
    """Profile under the legacy fixed-rest-time policy (requires rest_time config)."""
    if cfg.policy != "rest_time":
        raise ScenarioError("simulate_baseline requires a rest_time SimConfig")
    return simulate_profile(s, cfg, workers)


def simulate_attempts(s: Scenario, cfg: SimConfig) -> WasteReport:
    """Repeat independent attempts until ``cfg.trials`` successes and account
    the wasted round-trip distance 2*d*k of every return at node k.

    The attempt stream is truncated at the last completed success so every
    accounted failure belongs to a finished retry cycle.  Raises
    :class:`NoSuccessError` if the attempt cap passes without any success.
    """
    if cfg.policy != "quantile":
        raise ScenarioError("simulate_attempts requires the quantile policy")
    cuts = _cuts_for(s, cfg)
    d = s.hop_distance
    chunks: list[np.ndarray] = []
    attempts = 0
    successes = 0
    block = 0
    while successes < cfg.trials and attempts < cfg.attempt_cap:
        take = min(BLOCK_TRIALS, cfg.attempt_cap - attempts)
        node, _ = _block_outcomes(s, cuts, cfg.seed, block, take)
        chunks.append(node)
        attempts += node.size
        successes += int((node == 0).sum())
        block += 1
    nodes = np.concatenate(chunks)
    success_idx = np.flatnonzero(nodes == 0)
    if success_idx.size == 0:
        raise NoSuccessError(
            f"no success within {attempts} attempts (cap {cfg.attempt_cap}); "
            "the configured success probability is effectively zero"
        )
    n_succ = int(min(cfg.trials, success_idx.size))
    used = nodes[: int(success_idx[n_succ - 1]) + 1]
    n_att = used.size
    waste_total = float((2.0 * d * used[used > 0]).sum())
    waste_per_attempt = waste_total / n_att
    waste_per_success = waste_total / n_succ
    return WasteReport(
        waste_per_attempt=waste_per_attempt,
        waste_per_success=waste_per_success,
        expected_total_distance=waste_per_success + d * s.n,
        attempts_per_success=n_att / n_succ,
        p_success=n_succ / n_att,
        hop_cost=d,
        n=s.n,
        source="simulated",
        attempts=n_att,
        successes=n_succ,
        seed=cfg.seed,
    )
