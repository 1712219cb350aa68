"""Experiment protocols: metastable spin-up, minimum-node binary search,
trial batches over random seeds, probe velocity sweeps, and probe-size
scaling studies.

All protocols are deterministic given their seeds; independent trials share
no mutable state and may run in any order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .assimilation import NudgeConfig, run_pair
from .observation import (
    SWEEPING_PROBE,
    UNIFORM_STATIC,
    ObservationSet,
    sweeping_probe,
    uniform_static,
)
from .solver import DivergenceError, Field, SolverConfig, discrete_linf, make_initial_data, step_reference

SPIN_UP_CAP = 10.0
VELOCITY_TIME_CAP = 200.0


@dataclass(frozen=True)
class TrialSpec:
    """One minimum-node search: a solver setup, nudging strength, and seed.

    spin_up_mode "first" starts assimilation at the first crossing of the
    metastable trigger amplitude (failing past spin_up_cap); "last_below"
    is the capped variant that starts from the last recorded state still
    below the trigger, which never fails and matches the capped t_s recipe.
    """

    config: SolverConfig
    mu: float
    obs_kind: str = UNIFORM_STATIC
    seed: int = 0
    threshold: float = 5e-14
    t_star: float = 50.0
    probe_speed: float = 30.0
    spin_up_cap: float = SPIN_UP_CAP
    spin_up_mode: str = "first"
    target_l2: float = 1e-2
    record_every: int = 10

    def __post_init__(self):
        if self.threshold <= 0:
            raise ValueError(f"threshold must be positive, got {self.threshold}")
        if self.t_star <= 0:
            raise ValueError(f"t_star must be positive, got {self.t_star}")
        if self.obs_kind not in (UNIFORM_STATIC, SWEEPING_PROBE):
            raise ValueError(f"minimum-node search supports uniform or probe kinds, got {self.obs_kind!r}")
        if self.spin_up_mode not in ("first", "last_below"):
            raise ValueError(f"spin_up_mode must be 'first' or 'last_below', got {self.spin_up_mode!r}")


@dataclass
class MinNodesResult:
    """Outcome of one binary search; m_h is None when nothing converged."""

    nu: float
    m_h: int | None
    obs_kind: str
    seed: int
    probes: tuple[tuple[int, bool], ...] = ()
    spin_up_time: float = float("nan")
    error: str | None = None


@dataclass
class VelocityResult:
    """Convergence outcome for one probe speed within a sweep."""

    c: float
    m: int
    converge_time: float | None
    locked: bool = False


def spin_up_reference(
    config: SolverConfig,
    seed: int,
    target_l2: float = 1e-2,
    amplitude_fraction: float = 0.8,
    t_cap: float = SPIN_UP_CAP,
    last_time_below: bool = False,
) -> Field:
    """Evolve random initial data until metastable structures have formed.

    The returned field is the first state whose sup-norm reaches
    amplitude_fraction / sqrt(alpha) (within 20% of the saturation
    amplitude for the default 0.8); its .time is the spin-up duration.
    With last_time_below the run instead continues to t_cap and returns
    the last recorded state still below the trigger amplitude.
    """
    trigger = amplitude_fraction / math.sqrt(config.alpha)
    u = make_initial_data(config, seed, target_l2)
    n_cap = int(round(t_cap / config.dt))
    last_below = u
    for _ in range(n_cap + 1):
        if discrete_linf(u) >= trigger:
            if not last_time_below:
                return u
            return last_below
        last_below = u
        u = step_reference(u, config)
    if last_time_below:
        return last_below
    raise DivergenceError(
        f"no metastable state by t = {t_cap:g} (seed {seed}, nu = {config.nu:g}): "
        f"sup-norm {discrete_linf(u):.3g} < {trigger:.3g}"
    )


def _observation_for(kind: str, m: int, speed: float, n_points: int) -> ObservationSet:
    if kind == SWEEPING_PROBE:
        return sweeping_probe(m, speed, n_points)
    return uniform_static(m, n_points)


def _converges(u_start: Field, obs: ObservationSet, spec: TrialSpec) -> bool:
    nudge = NudgeConfig(
        mu=spec.mu,
        obs=obs,
        t_end=spec.t_star,
        record_every=spec.record_every,
        dt=spec.config.dt,
    )
    record = run_pair(u_start, nudge, spec.config, spec.threshold, stop_at_threshold=True)
    return record.converged_at is not None


def binary_search_min_nodes(spec: TrialSpec, u_start: Field | None = None) -> MinNodesResult:
    """Bracket the minimum node count that reaches the convergence threshold.

    Bisects the node count over [1, N], testing the bracket midpoint and
    keeping the half that contains the convergent/divergent transition,
    until the bracket has length one; the upper endpoint is returned.
    Zero nodes trivially never converge, so the lower endpoint is seeded
    at 0 and a converged m = 1 is representable.  The upper endpoint N is
    verified first; if it fails, the full mesh (N+1 nodes) is tried before
    declaring no convergence.  All probed (m, converged) pairs are kept
    for audit.
    """
    config = spec.config
    n = config.n_points
    if u_start is None:
        u_start = spin_up_reference(
            config,
            spec.seed,
            spec.target_l2,
            t_cap=spec.spin_up_cap,
            last_time_below=spec.spin_up_mode == "last_below",
        )
    probes: list[tuple[int, bool]] = []

    def check(m: int) -> bool:
        obs = _observation_for(spec.obs_kind, m, spec.probe_speed, n)
        ok = _converges(u_start, obs, spec)
        probes.append((m, ok))
        return ok

    hi = n
    if not check(hi):
        if spec.obs_kind == UNIFORM_STATIC and check(n + 1):
            hi = n + 1
        else:
            return MinNodesResult(
                nu=config.nu,
                m_h=None,
                obs_kind=spec.obs_kind,
                seed=spec.seed,
                probes=tuple(probes),
                spin_up_time=u_start.time,
            )
    lo = 0
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if check(mid):
            hi = mid
        else:
            lo = mid
    return MinNodesResult(
        nu=config.nu,
        m_h=hi,
        obs_kind=spec.obs_kind,
        seed=spec.seed,
        probes=tuple(probes),
        spin_up_time=u_start.time,
    )


def run_trial_batch(specs: list[TrialSpec]) -> list[MinNodesResult]:
    """Run independent searches; failures become error-tagged results.

    Results come back sorted by (nu, seed) regardless of input order, so
    aggregation downstream is deterministic.
    """
    if not specs:
        raise ValueError("run_trial_batch needs at least one TrialSpec")
    results = []
    for spec in sorted(specs, key=lambda s: (s.config.nu, s.seed)):
        try:
            results.append(binary_search_min_nodes(spec))
        except (DivergenceError, ValueError) as exc:
            results.append(
                MinNodesResult(
                    nu=spec.config.nu,
                    m_h=None,
                    obs_kind=spec.obs_kind,
                    seed=spec.seed,
                    error=str(exc),
                )
            )
    return results


def velocity_sweep(
    config: SolverConfig,
    mu: float,
    m: int,
    speeds: list[float],
    seed: int,
    threshold: float = 1e-10,
    time_cap: float = VELOCITY_TIME_CAP,
    record_every: int = 10,
    u_start: Field | None = None,
) -> list[VelocityResult]:
    """Convergence time of an m-node probe at each speed, same initial data.

    A speed is frequency-locked when it never converges within the cap or
    takes more than 1.5x the mean convergence time of the batch.
    """
    if u_start is None:
        u_start = spin_up_reference(config, seed)
    results = []
    for c in speeds:
        obs = sweeping_probe(m, c, config.n_points)
        nudge = NudgeConfig(mu=mu, obs=obs, t_end=time_cap, record_every=record_every, dt=config.dt)
        record = run_pair(u_start, nudge, config, threshold, stop_at_threshold=True)
        results.append(VelocityResult(c=float(c), m=m, converge_time=record.converged_at))
    times = [r.converge_time for r in results if r.converge_time is not None]
    mean_time = float(np.mean(times)) if times else float("inf")
    for r in results:
        r.locked = r.converge_time is None or r.converge_time > 1.5 * mean_time
    return results


def conjectured_locked_speeds(n_points: int, m: int, lam: float, dx: float) -> list[int]:
    """Divisors K of N with |K - m| < lambda/dx: the candidate locked base speeds."""
    out = []
    for k in range(1, n_points + 1):
        if n_points % k == 0 and abs(k - m) < lam / dx:
            out.append(k)
    return out


def probe_size_study(
    config: SolverConfig,
    mu: float,
    sizes: list[int],
    speeds: list[float],
    seed: int,
    threshold: float = 1e-10,
    time_cap: float = VELOCITY_TIME_CAP,
) -> dict[int, float]:
    """Mean convergence time per probe size across non-locked speeds.

    Sizes where no speed converged are omitted; fit the returned table
    with analysis.fit_power_law to get the time-vs-size scaling.
    """
    u_start = spin_up_reference(config, seed)
    table: dict[int, float] = {}
    for m in sizes:
        results = velocity_sweep(
            config, mu, m, speeds, seed, threshold, time_cap, u_start=u_start
        )
        times = [r.converge_time for r in results if not r.locked and r.converge_time is not None]
        if times:
            table[m] = float(np.mean(times))
    return table
