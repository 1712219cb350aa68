"""Nudged twin run: the assimilated system v tracks the reference u.

v follows the same convex-splitting step as the reference with one extra
explicit term, the feedback mu*(I_h(u) - I_h(v)) evaluated at the current
observation points:

    (1 - dt*(nu*D_xx + 1 + 2*alpha)) V^{n+1}
        = V^n + dt*((-2*alpha*V^n - alpha*(V^n)**3) + mu*(I_h(U^n) - I_h(V^n)))

Treating the feedback explicitly imposes the CFL-type constraint
dt <= 2/mu, which NudgeConfig checks at construction.  When the
observations are a sweeping probe, the feedback uses the probe position of
the current step and the probe advances afterwards.
"""

from __future__ import annotations

from dataclasses import InitVar, dataclass

import math
import numpy as np

from .observation import SWEEPING_PROBE, ObservationSet, advance_probe, interpolate_values
from .solver import (
    DivergenceError,
    Field,
    SolverConfig,
    _nudged_rhs,
    discrete_l2,
    discrete_linf,
    scheme_operator,
)


@dataclass(frozen=True)
class NudgeConfig:
    """Relaxation strength and observation policy for one assimilation run.

    dt is only used to validate the explicit-feedback stability constraint
    dt <= 2/mu; pass the SolverConfig's time-step.
    """

    mu: float
    obs: ObservationSet
    t_end: float
    record_every: int = 10
    dt: InitVar[float] = None

    def __post_init__(self, dt):
        if self.mu <= 0:
            raise ValueError(f"mu must be positive, got {self.mu}")
        if self.t_end < 0:
            raise ValueError(f"t_end must be non-negative, got {self.t_end}")
        if self.record_every < 1:
            raise ValueError(f"record_every must be >= 1, got {self.record_every}")
        if dt is None:
            raise ValueError("NudgeConfig needs the solver dt to check dt <= 2/mu")
        if dt > 2.0 / self.mu:
            raise ValueError(
                f"explicit nudging is unstable: dt = {dt} exceeds 2/mu = {2.0 / self.mu}"
            )


@dataclass
class RunRecord:
    """Error trajectory of one coupled reference/assimilated run.

    times are elapsed since the assimilation started; converged_at is the
    first recorded time at which the L2 error reached the run's threshold
    (first crossing, not sustained).  probe_positions carries the probe
    anchor x-coordinate per sample for probe runs, else None.
    """

    times: np.ndarray
    l2_errors: np.ndarray
    linf_errors: np.ndarray
    converged_at: float | None = None
    probe_positions: np.ndarray | None = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.l2_errors = np.asarray(self.l2_errors, dtype=float)
        self.linf_errors = np.asarray(self.linf_errors, dtype=float)
        if not (self.times.size == self.l2_errors.size == self.linf_errors.size):
            raise ValueError("record arrays must have equal length")
        if np.any(self.l2_errors < 0) or np.any(self.linf_errors < 0):
            raise ValueError("error norms cannot be negative")


def step_assimilated(
    v: Field,
    u_current: Field,
    nudge: NudgeConfig,
    config: SolverConfig,
    obs: ObservationSet | None = None,
) -> Field:
    """One nudged step of v against the already-computed reference state U^n.

    obs overrides nudge.obs when the caller is threading a moving probe
    through a run loop; the step itself never mutates the observation set.
    """
    if obs is None:
        obs = nudge.obs
    dt = config.dt
    ih_u = interpolate_values(u_current.values, obs)
    ih_v = interpolate_values(v.values, obs)
    rhs = _nudged_rhs(v.values[1:-1], ih_u[1:-1], ih_v[1:-1], config.alpha, nudge.mu, dt)
    interior = scheme_operator(config).solve(rhs)
    out = np.empty_like(v.values)
    out[0] = 0.0
    out[-1] = 0.0
    out[1:-1] = interior
    t_next = v.time + dt
    if not np.all(np.isfinite(out)):
        bad = int(np.argmin(np.isfinite(out)))
        raise DivergenceError(
            f"assimilated step produced a non-finite value at index {bad} "
            f"(t = {t_next:.6g}, mu*dt = {nudge.mu * dt:.6g})"
        )
    return Field(out, t_next)


def _probe_anchor(obs: ObservationSet, config: SolverConfig) -> float:
    """x-coordinate of the probe cluster's center node (for plotting)."""
    return obs.points[len(obs.points) // 2] * config.dx


def run_pair(
    u0: Field,
    nudge: NudgeConfig,
    config: SolverConfig,
    threshold: float,
    stop_at_threshold: bool = False,
) -> RunRecord:
    """Advance reference and assimilated systems in tandem from v0 = 0.

    Errors are sampled every nudge.record_every steps plus the final step.
    The feedback of step n uses the probe position at step n; the probe
    then advances.  With stop_at_threshold the run halts at the sample
    that first reaches the threshold (converged_at is first-crossing
    either way).
    """
    from .solver import step_reference  # local import keeps module init cheap

    dt = config.dt
    n_steps = max(0, int(round(nudge.t_end / dt)))
    u = u0
    v = Field(np.zeros_like(u0.values), u0.time)
    obs = nudge.obs
    is_probe = obs.kind == SWEEPING_PROBE

    times: list[float] = []
    l2s: list[float] = []
    linfs: list[float] = []
    positions: list[float] = []
    converged_at: float | None = None

    def sample(step: int) -> bool:
        nonlocal converged_at
        err = u.values - v.values
        t = step * dt
        times.append(t)
        l2 = discrete_l2(err, config.dx)
        l2s.append(l2)
        linfs.append(discrete_linf(err))
        if is_probe:
            positions.append(_probe_anchor(obs, config))
        if converged_at is None and l2 <= threshold:
            converged_at = t
            return True
        return False

    for step in range(n_steps):
        if step % nudge.record_every == 0:
            if sample(step) and stop_at_threshold:
                break
        v = step_assimilated(v, u, nudge, config, obs=obs)
        if is_probe:
            obs = advance_probe(obs, config)
        u = step_reference(u, config)
    else:
        sample(n_steps)

    return RunRecord(
        times=np.array(times),
        l2_errors=np.array(l2s),
        linf_errors=np.array(linfs),
        converged_at=converged_at,
        probe_positions=np.array(positions) if is_probe else None,
    )


def detect_stairsteps(
    record: RunRecord,
    config: SolverConfig,
    obs: ObservationSet,
    skip_fraction: float = 0.15,
) -> np.ndarray:
    """Plateau lengths of the descending stair-step pattern of a probe run.

    The log-error curve of a converged probe run alternates plateaus with
    one dominant drop per traversal of the domain.  The dominant recurrence
    period is estimated from the autocorrelation of the local slope, the
    strongest drop per period is kept (greedy peak picking with a minimum
    separation of 0.6 periods), and the gaps between consecutive drops are
    returned.  Non-probe or non-converged records yield an empty array.
    """
    if obs.kind != SWEEPING_PROBE or record.converged_at is None:
        return np.array([])
    t = record.times
    e = record.l2_errors
    stop = int(np.searchsorted(t, record.converged_at, side="right"))
    mask = e[:stop] > 0
    t = t[:stop][mask]
    e = e[:stop][mask]
    if t.size < 16:
        return np.array([])
    # skip the initial transient (v grows from zero) before segmenting
    start = int(np.searchsorted(t, t[0] + skip_fraction * (t[-1] - t[0])))
    t = t[start:]
    loge = np.log(e[start:])
    if t.size < 16 or t[-1] <= t[0]:
        return np.array([])
    dt_s = float(np.median(np.diff(t)))
    slopes = np.diff(loge) / np.diff(t)
    fluct = slopes - slopes.mean()
    ac = np.correlate(fluct, fluct, mode="full")[fluct.size - 1 :]
    lag_min = max(2, int(math.ceil(0.05 / dt_s)) if dt_s < 0.05 else 2)
    lag_max = fluct.size // 2
    if lag_max <= lag_min or ac[0] <= 0:
        return np.array([])
    period = (lag_min + int(np.argmax(ac[lag_min:lag_max]))) * dt_s
    # one drop event per period: largest drops first, minimum separation 0.6 periods
    drops = -np.diff(loge)
    order = np.argsort(drops)[::-1]
    cutoff = 0.25 * drops[order[0]]
    accepted: list[float] = []
    for i in order:
        if drops[i] < cutoff:
            break
        ti = t[i]
        if all(abs(ti - tj) >= 0.6 * period for tj in accepted):
            accepted.append(ti)
    if len(accepted) < 2:
        return np.array([])
    return np.diff(np.sort(accepted))
