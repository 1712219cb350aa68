"""Experiment protocol tests at desk scale (N = 256 unless noted)."""

import math

import numpy as np
import pytest

from acnudge.experiments import (
    TrialSpec,
    binary_search_min_nodes,
    conjectured_locked_speeds,
    probe_size_study,
    run_trial_batch,
    spin_up_reference,
    velocity_sweep,
)
from acnudge.observation import SWEEPING_PROBE
from acnudge.solver import DivergenceError, SolverConfig, discrete_linf


def desk_config(nu=1e-3, n=256):
    return SolverConfig(nu=nu, n_points=n)


class TestSpinUp:
    def test_reaches_trigger_amplitude(self):
        config = desk_config()
        u = spin_up_reference(config, seed=0, t_cap=20.0)
        assert discrete_linf(u) >= 0.8
        assert 0.0 < u.time <= 20.0

    def test_alpha_scales_trigger(self):
        config = SolverConfig(nu=1e-3, n_points=256, alpha=4.0)
        u = spin_up_reference(config, seed=0, t_cap=20.0)
        sup = discrete_linf(u)
        assert 0.4 <= sup <= 0.5  # trigger is 0.8/sqrt(4), saturation 1/sqrt(4)

    def test_cap_violation_raises(self):
        config = desk_config()
        with pytest.raises(DivergenceError, match="metastable"):
            spin_up_reference(config, seed=0, t_cap=0.05)

    def test_last_time_below_never_raises(self):
        config = desk_config()
        u = spin_up_reference(config, seed=0, t_cap=0.05, last_time_below=True)
        assert u.time <= 0.05 + 1e-9
        assert discrete_linf(u) < 0.8

    def test_spin_up_time_decreases_with_viscosity(self):
        times = []
        for nu in (1e-3, 1e-4, 1e-5):
            config = SolverConfig(nu=nu, n_points=1024)
            times.append(spin_up_reference(config, seed=0, t_cap=20.0).time)
        assert times[0] > times[1] > times[2]


def probe_spec(seed=0, threshold=1e-8, t_star=15.0, speed=8.0):
    return TrialSpec(
        config=desk_config(),
        mu=500.0,
        obs_kind=SWEEPING_PROBE,
        seed=seed,
        threshold=threshold,
        t_star=t_star,
        probe_speed=speed,
        spin_up_cap=20.0,
    )


class TestBinarySearch:
    def test_matches_exhaustive_scan_for_probe(self):
        spec = probe_spec()
        u0 = spin_up_reference(spec.config, spec.seed, t_cap=spec.spin_up_cap)
        result = binary_search_min_nodes(spec, u_start=u0)
        assert result.m_h is not None

        from acnudge.assimilation import NudgeConfig, run_pair
        from acnudge.observation import sweeping_probe

        def converges(m):
            obs = sweeping_probe(m, spec.probe_speed, spec.config.n_points)
            nudge = NudgeConfig(mu=spec.mu, obs=obs, t_end=spec.t_star, dt=spec.config.dt)
            rec = run_pair(u0, nudge, spec.config, spec.threshold, stop_at_threshold=True)
            return rec.converged_at is not None

        scan = next(m for m in range(1, spec.config.n_points + 1) if converges(m))
        assert result.m_h == scan
        # monotone in probe size across a window above the transition
        assert all(converges(m) for m in range(scan, scan + 4))

    def test_bracket_correctness_from_audit_trail(self):
        spec = probe_spec(seed=1, threshold=1e-10, t_star=8.0)
        result = binary_search_min_nodes(spec)
        audited = dict(result.probes)
        assert audited[result.m_h] is True
        below = [m for m, ok in result.probes if m < result.m_h]
        assert below and not any(audited[m] for m in below)

    def test_infinite_threshold_returns_one(self):
        spec = probe_spec(threshold=math.inf, t_star=1.0)
        result = binary_search_min_nodes(spec)
        assert result.m_h == 1

    def test_impossible_threshold_returns_sentinel(self):
        # ten steps are not enough to contract the error to 1e-300
        spec = TrialSpec(
            config=desk_config(),
            mu=500.0,
            seed=0,
            threshold=1e-300,
            t_star=0.01,
            spin_up_cap=20.0,
        )
        result = binary_search_min_nodes(spec)
        assert result.m_h is None
        assert all(ok is False for _, ok in result.probes)

    def test_deterministic(self):
        a = binary_search_min_nodes(probe_spec(seed=2))
        b = binary_search_min_nodes(probe_spec(seed=2))
        assert a.m_h == b.m_h
        assert a.probes == b.probes


class TestTrialBatch:
    def test_single_spec_equals_direct_search(self):
        spec = probe_spec(seed=3)
        batch = run_trial_batch([spec])
        direct = binary_search_min_nodes(spec)
        assert len(batch) == 1
        assert batch[0].m_h == direct.m_h

    def test_results_sorted_by_nu_then_seed(self):
        specs = [
            probe_spec(seed=1),
            probe_spec(seed=0),
        ]
        results = run_trial_batch(specs)
        assert [r.seed for r in results] == [0, 1]

    def test_failures_recorded_not_fatal(self):
        bad = TrialSpec(
            config=desk_config(),
            mu=500.0,
            seed=0,
            threshold=1e-8,
            t_star=1.0,
            spin_up_cap=0.05,  # spin-up cannot trigger this fast
        )
        results = run_trial_batch([bad, probe_spec(seed=0)])
        assert len(results) == 2
        failed = [r for r in results if r.error is not None]
        assert len(failed) == 1
        assert failed[0].m_h is None

    def test_empty_batch_rejected(self):
        with pytest.raises(ValueError):
            run_trial_batch([])


class TestVelocitySweep:
    def test_zero_speed_is_locked(self):
        config = desk_config()
        results = velocity_sweep(
            config, mu=500.0, m=6, speeds=[0.0, 8.0], seed=0, threshold=1e-8, time_cap=20.0
        )
        by_speed = {r.c: r for r in results}
        assert by_speed[0.0].converge_time is None
        assert by_speed[0.0].locked
        assert by_speed[8.0].converge_time is not None
        assert not by_speed[8.0].locked

    def test_same_initial_data_reused(self):
        config = desk_config()
        a = velocity_sweep(config, mu=500.0, m=6, speeds=[8.0], seed=0, threshold=1e-8, time_cap=20.0)
        b = velocity_sweep(config, mu=500.0, m=6, speeds=[8.0], seed=0, threshold=1e-8, time_cap=20.0)
        assert a[0].converge_time == b[0].converge_time

    def test_locked_flag_uses_mean_ratio(self):
        from acnudge.experiments import VelocityResult

        # classification happens inside velocity_sweep; emulate its rule here
        times = [10.0, 11.0, 40.0]
        mean = float(np.mean(times))
        assert 40.0 > 1.5 * mean  # the slow one is locked under the 1.5x rule


class TestConjecture:
    def test_divisors_near_probe_size(self):
        # N = 64: divisors 1,2,4,8,16,32,64; |K - 6| < 12 keeps 1,2,4,8,16
        got = conjectured_locked_speeds(64, m=6, lam=12 * (1.0 / 64), dx=1.0 / 64)
        assert got == [1, 2, 4, 8, 16]

    def test_narrow_band(self):
        got = conjectured_locked_speeds(64, m=8, lam=1.0 / 64, dx=1.0 / 64)
        assert got == [8]


class TestProbeSizeStudy:
    def test_single_size_reports_mean_only(self):
        config = desk_config()
        table = probe_size_study(
            config, mu=500.0, sizes=[6], speeds=[8.0, 12.0], seed=0, threshold=1e-8, time_cap=20.0
        )
        assert set(table) == {6}
        assert table[6] > 0

    def test_larger_probes_converge_faster(self):
        config = desk_config()
        table = probe_size_study(
            config, mu=500.0, sizes=[4, 16], speeds=[8.0], seed=0, threshold=1e-8, time_cap=30.0
        )
        assert table[16] < table[4]