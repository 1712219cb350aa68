"""Command-line entry points and key=value experiment configuration.

Subcommands: simulate, assimilate, find-min-nodes, velocity-sweep,
probe-size-study, fit-power-law, estimate-lambda.  Parameters come from
(in increasing precedence) built-in defaults, a --preset, a --config
key=value file, and repeated --set key=value flags.  Every output file
echoes the fully resolved configuration in its metadata header.

Exit codes: 0 success, 1 validation/configuration error, 2 runtime
divergence of a simulation.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__, analysis, runio
from .assimilation import NudgeConfig, RunRecord, run_pair, step_assimilated
from .experiments import (
    TrialSpec,
    conjectured_locked_speeds,
    probe_size_study,
    run_trial_batch,
    spin_up_reference,
    velocity_sweep,
)
from .observation import (
    LAYER_BASED,
    SWEEPING_PROBE,
    UNIFORM_STATIC,
    advance_probe,
    layer_based_placement,
    remove_layer_coverage,
    sweeping_probe,
    uniform_static,
)
from .solver import (
    DivergenceError,
    Field,
    SolverConfig,
    discrete_l2,
    discrete_linf,
    make_initial_data,
    step_reference,
)


class ConfigError(ValueError):
    """Bad key, missing key, or out-of-range value in an experiment config."""


def _parse_bool(s: str) -> bool:
    low = s.strip().lower()
    if low in ("true", "1", "yes"):
        return True
    if low in ("false", "0", "no"):
        return False
    raise ConfigError(f"expected a boolean, got {s!r}")


def _parse_list(parse_item):
    def parse(s: str):
        items = [tok for tok in s.replace(";", ",").split(",") if tok.strip()]
        return tuple(parse_item(tok.strip()) for tok in items)

    return parse


def _positive(x, key):
    if x <= 0:
        raise ConfigError(f"{key} must be positive, got {x}")
    return x


def _non_negative(x, key):
    if x < 0:
        raise ConfigError(f"{key} must be non-negative, got {x}")
    return x


# key -> (parser, validator); validators raise ConfigError on bad ranges.
KEY_SPECS = {
    "nu": (float, _positive),
    "alpha": (float, _positive),
    "domain_length": (float, _positive),
    "n_points": (int, lambda x, k: x if x >= 8 else _raise(f"{k} must be >= 8, got {x}")),
    "dt": (float, _positive),
    "seed": (int, lambda x, k: x),
    "seeds": (_parse_list(int), lambda x, k: x),
    "target_l2": (float, _positive),
    "mu": (float, _positive),
    "t_end": (float, _non_negative),
    "record_every": (int, _positive),
    "threshold": (float, _positive),
    "t_star": (float, _positive),
    "spin_up_cap": (float, _positive),
    "spin_up": (_parse_bool, lambda x, k: x),
    "spin_up_mode": (str, lambda x, k: x if x in ("first", "last_below") else _raise(f"{k} must be 'first' or 'last_below', got {x!r}")),
    "obs_kind": (str, lambda x, k: x if x in (UNIFORM_STATIC, LAYER_BASED, SWEEPING_PROBE) else _raise(f"{k} must be 'uniform', 'layer', or 'probe', got {x!r}")),
    "m": (int, _non_negative),
    "c": (float, _non_negative),
    "remove_layer": (int, _non_negative),
    "nu_list": (_parse_list(float), lambda x, k: tuple(_positive(v, k) for v in x)),
    "speeds": (_parse_list(float), lambda x, k: tuple(_non_negative(v, k) for v in x)),
    "sizes": (_parse_list(int), lambda x, k: tuple(_positive(v, k) for v in x)),
    "snapshot_times": (_parse_list(float), lambda x, k: tuple(_non_negative(v, k) for v in x)),
    "time_cap": (float, _positive),
    "uniform_m": (int, _positive),
    "compare_probe_sizes": (_parse_list(int), lambda x, k: tuple(_positive(v, k) for v in x)),
    "lam": (float, _positive),
    "input": (str, lambda x, k: x),
    "out_dir": (str, lambda x, k: x),
}

DEFAULTS = {
    "alpha": 1.0,
    "domain_length": 1.0,
    "n_points": 4096,
    "dt": 1e-3,
    "seed": 0,
    "seeds": (0,),
    "target_l2": 1e-2,
    "record_every": 10,
    "threshold": 5e-14,
    "t_star": 50.0,
    "spin_up_cap": 10.0,
    "spin_up": True,
    "spin_up_mode": "first",
    "obs_kind": UNIFORM_STATIC,
    "c": 30.0,
    "time_cap": 200.0,
    "out_dir": "out",
}

PRESETS = {
    # metastable development snapshots (inflation through fully formed layers)
    "fig1": {
        "nu": 7.5e-6,
        "snapshot_times": (0.0, 3.0, 4.5, 9.0),
        "spin_up": False,
        "t_end": 9.0,
    },
    # sweeping probe snapshots with probe-position column
    "fig4": {
        "nu": 5e-4,
        "mu": 500.0,
        "obs_kind": SWEEPING_PROBE,
        "m": 10,
        "c": 10.0,
        "t_end": 50.0,
        "snapshot_times": (0.15, 0.25, 1.271),
    },
    # uniform grid vs probes of several lengths, large viscosity
    "fig5": {
        "nu": 5e-3,
        "mu": 500.0,
        "c": 10.0,
        "t_end": 50.0,
        "uniform_m": 100,
        "compare_probe_sizes": (10, 25, 50, 100),
    },
    # same comparison in the small-viscosity regime
    "fig6": {
        "nu": 5e-6,
        "mu": 500.0,
        "c": 10.0,
        "t_end": 50.0,
        "uniform_m": 100,
        "compare_probe_sizes": (10, 25, 50, 100),
    },
    # minimum-node search grid for the power-law fit (capped t_s recipe)
    "fig8": {
        "nu_list": (1e-2, 3e-3, 1e-3, 3e-4, 1e-4),
        "seeds": (0, 1, 2),
        "mu": 1000.0,
        "spin_up_mode": "last_below",
    },
    # velocity sweep with frequency-locked speeds
    "fig9": {
        "nu": 7.5e-6,
        "mu": 300.0,
        "m": 16,
        "speeds": (8.0, 16.0, 24.0, 32.0, 40.0, 48.0, 56.0, 64.0, 80.0, 96.0, 112.0, 128.0),
        "threshold": 1e-10,
        "time_cap": 150.0,
    },
    # probe-size scaling of the mean convergence time
    "fig10": {
        "nu": 7.5e-6,
        "mu": 300.0,
        "sizes": (5, 10, 20, 40),
        "speeds": (10.0, 25.0, 40.0),
        "threshold": 1e-10,
        "time_cap": 150.0,
    },
}


def _raise(msg):
    raise ConfigError(msg)


def parse_config_file(path) -> dict[str, str]:
    """Plain key=value lines; '#' starts a comment, blank lines ignored."""
    raw: dict[str, str] = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}")
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, _, value = stripped.partition("=")
        raw[key.strip()] = value.strip()
    return raw


def resolve_config(required: tuple[str, ...], preset: str | None, config_file, overrides) -> dict:
    """Merge defaults < preset < config file < --set overrides, then validate."""
    resolved = dict(DEFAULTS)
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; known: {', '.join(sorted(PRESETS))}")
        resolved.update(PRESETS[preset])
    raw: dict[str, str] = {}
    if config_file is not None:
        raw.update(parse_config_file(config_file))
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, _, value = item.partition("=")
        raw[key.strip()] = value.strip()
    for key, value in raw.items():
        if key not in KEY_SPECS:
            raise ConfigError(f"unknown configuration key {key!r}")
        parse, validate = KEY_SPECS[key]
        try:
            parsed = parse(value)
        except (ValueError, TypeError):
            raise ConfigError(f"bad value for {key}: {value!r}")
        resolved[key] = validate(parsed, key)
    missing = [k for k in required if k not in resolved]
    if missing:
        raise ConfigError(f"missing required keys: {', '.join(missing)}")
    return resolved


def _solver_config(cfg: dict) -> SolverConfig:
    try:
        return SolverConfig(
            nu=cfg["nu"],
            alpha=cfg["alpha"],
            domain_length=cfg["domain_length"],
            n_points=cfg["n_points"],
            dt=cfg["dt"],
        )
    except ValueError as exc:
        raise ConfigError(str(exc))


def _meta(cfg: dict, extra: dict | None = None) -> dict:
    meta = {"acnudge_version": __version__}
    meta.update({k: v for k, v in cfg.items() if not isinstance(v, tuple)})
    meta.update({k: ";".join(runio.format_value(i) for i in v) for k, v in cfg.items() if isinstance(v, tuple)})
    if extra:
        meta.update(extra)
    return meta


def _observation(cfg: dict, config: SolverConfig, kind=None, m=None):
    kind = kind or cfg["obs_kind"]
    m = m if m is not None else cfg.get("m")
    if m is None:
        raise ConfigError("observation node count 'm' is required")
    if kind == SWEEPING_PROBE:
        return sweeping_probe(m, cfg["c"], config.n_points)
    return uniform_static(m, config.n_points)


def cmd_simulate(cfg: dict) -> int:
    config = _solver_config(cfg)
    times = cfg.get("snapshot_times")
    if not times:
        raise ConfigError("simulate needs snapshot_times")
    out_dir = Path(cfg["out_dir"])
    u = make_initial_data(config, cfg["seed"], cfg["target_l2"])
    meta = _meta(cfg)
    remaining = sorted(times)
    steps_for = [int(round(t / config.dt)) for t in remaining]
    step = 0
    for target_t, target_step in zip(remaining, steps_for):
        while step < target_step:
            u = step_reference(u, config)
            step += 1
        path = out_dir / f"snapshot_t{target_t:g}.csv"
        runio.write_snapshot(path, config, meta, u)
        print(f"wrote {path}")
    return 0


def _spun_state(cfg: dict, config: SolverConfig) -> Field:
    if cfg["spin_up"]:
        return spin_up_reference(
            config,
            cfg["seed"],
            cfg["target_l2"],
            t_cap=cfg["spin_up_cap"],
            last_time_below=cfg["spin_up_mode"] == "last_below",
        )
    return make_initial_data(config, cfg["seed"], cfg["target_l2"])


def _assimilate_once(cfg, config, u0, obs, label, out_dir) -> None:
    nudge = NudgeConfig(
        mu=cfg["mu"], obs=obs, t_end=cfg["t_end"], record_every=cfg["record_every"], dt=config.dt
    )
    snapshot_times = sorted(cfg.get("snapshot_times", ()))
    meta = _meta(cfg, {"obs": obs.to_csv_record().replace(",", "|"), "label": label})
    if not snapshot_times:
        record = run_pair(u0, nudge, config, cfg["threshold"])
        runio.write_run_record(out_dir / f"record_{label}.csv", record, meta)
        print(f"wrote {out_dir / f'record_{label}.csv'}")
        return
    # drive the loop manually to capture paired snapshots at the asked times
    v = Field(np.zeros_like(u0.values), u0.time)
    u = u0
    cur = obs
    t_end = cfg["t_end"]
    n_steps = int(round(t_end / config.dt))
    targets = [int(round(t / config.dt)) for t in snapshot_times]
    times, l2s, linfs, positions = [], [], [], []

    def snap(target_t):
        path = out_dir / f"assimilate_{label}_t{target_t:g}.csv"
        snap_meta = dict(meta)
        if cur.kind == SWEEPING_PROBE:
            snap_meta["probe_x"] = cur.points[len(cur.points) // 2] * config.dx
        runio.write_snapshot(path, config, snap_meta, u, v)
        print(f"wrote {path}")

    for step in range(n_steps + 1):
        if step in targets:
            snap(snapshot_times[targets.index(step)])
        if step % cfg["record_every"] == 0 or step == n_steps:
            times.append(step * config.dt)
            l2s.append(discrete_l2(u.values - v.values, config.dx))
            linfs.append(discrete_linf(u.values - v.values))
            if cur.kind == SWEEPING_PROBE:
                positions.append(cur.points[len(cur.points) // 2] * config.dx)
        if step == n_steps:
            break
        v = step_assimilated(v, u, nudge, config, obs=cur)
        if cur.kind == SWEEPING_PROBE:
            cur = advance_probe(cur, config)
        u = step_reference(u, config)

    threshold = cfg["threshold"]
    l2arr = np.array(l2s)
    below = np.nonzero(l2arr <= threshold)[0]
    record = RunRecord(
        times=np.array(times),
        l2_errors=l2arr,
        linf_errors=np.array(linfs),
        converged_at=float(times[below[0]]) if below.size else None,
        probe_positions=np.array(positions) if positions else None,
    )
    runio.write_run_record(out_dir / f"record_{label}.csv", record, meta)
    print(f"wrote {out_dir / f'record_{label}.csv'}")


def cmd_assimilate(cfg: dict) -> int:
    config = _solver_config(cfg)
    try:
        NudgeConfig(mu=cfg["mu"], obs=uniform_static(0, config.n_points), t_end=cfg["t_end"], dt=config.dt)
    except ValueError as exc:
        raise ConfigError(str(exc))
    out_dir = Path(cfg["out_dir"])
    u0 = _spun_state(cfg, config)
    probe_sizes = cfg.get("compare_probe_sizes", ())
    if probe_sizes:
        m_uniform = cfg.get("uniform_m")
        if m_uniform:
            obs = uniform_static(m_uniform, config.n_points)
            _assimilate_once(cfg, config, u0, obs, f"uniform_m{m_uniform}", out_dir)
        for m in probe_sizes:
            obs = sweeping_probe(m, cfg["c"], config.n_points)
            _assimilate_once(cfg, config, u0, obs, f"probe_m{m}", out_dir)
        return 0
    if cfg["obs_kind"] == LAYER_BASED:
        try:
            obs = layer_based_placement(u0, config)
        except ValueError as exc:
            raise ConfigError(f"layer placement failed: {exc}")
        label = "layer"
        if "remove_layer" in cfg:
            k = cfg["remove_layer"]
            try:
                obs = remove_layer_coverage(obs, k)
            except IndexError as exc:
                raise ConfigError(str(exc))
            label = f"layer_cut{k}"
        _assimilate_once(cfg, config, u0, obs, label, out_dir)
        return 0
    obs = _observation(cfg, config)
    label = f"{cfg['obs_kind']}_m{obs.m}"
    _assimilate_once(cfg, config, u0, obs, label, out_dir)
    return 0


def cmd_find_min_nodes(cfg: dict) -> int:
    nu_list = cfg.get("nu_list")
    if not nu_list:
        raise ConfigError("find-min-nodes needs a non-empty nu_list")
    if "mu" not in cfg:
        raise ConfigError("find-min-nodes needs mu")
    specs = []
    for nu in nu_list:
        for seed in cfg["seeds"]:
            cfg_nu = dict(cfg, nu=nu, seed=seed)
            specs.append(
                TrialSpec(
                    config=_solver_config(cfg_nu),
                    mu=cfg["mu"],
                    obs_kind=cfg["obs_kind"],
                    seed=seed,
                    threshold=cfg["threshold"],
                    t_star=cfg["t_star"],
                    probe_speed=cfg["c"],
                    spin_up_cap=cfg["spin_up_cap"],
                    spin_up_mode=cfg["spin_up_mode"],
                    target_l2=cfg["target_l2"],
                    record_every=cfg["record_every"],
                )
            )
    results = run_trial_batch(specs)
    out = Path(cfg["out_dir"]) / f"min_nodes_{cfg['obs_kind']}.csv"
    runio.write_min_nodes(out, results, _meta(cfg))
    print(f"wrote {out}")
    for r in results:
        status = r.m_h if r.m_h is not None else f"none ({r.error or 'no convergence'})"
        print(f"  nu={r.nu:g} seed={r.seed} m_h={status}")
    return 0


def cmd_velocity_sweep(cfg: dict) -> int:
    speeds = cfg.get("speeds")
    if not speeds:
        raise ConfigError("velocity-sweep needs a non-empty speeds list")
    for key in ("mu", "m"):
        if key not in cfg:
            raise ConfigError(f"velocity-sweep needs {key}")
    config = _solver_config(cfg)
    results = velocity_sweep(
        config,
        mu=cfg["mu"],
        m=cfg["m"],
        speeds=list(speeds),
        seed=cfg["seed"],
        threshold=cfg["threshold"],
        time_cap=cfg["time_cap"],
        record_every=cfg["record_every"],
    )
    conjectured = None
    if "lam" in cfg:
        bases = conjectured_locked_speeds(config.n_points, cfg["m"], cfg["lam"], config.dx)
        conjectured = {r.c for r in results if any(r.c % k == 0 for k in bases)} | {0.0}
    out = Path(cfg["out_dir"]) / "velocity_sweep.csv"
    runio.write_velocity_results(out, results, _meta(cfg), conjectured)
    print(f"wrote {out}")
    for r in results:
        print(f"  c={r.c:g} t={r.converge_time} locked={r.locked}")
    return 0


def cmd_probe_size_study(cfg: dict) -> int:
    sizes = cfg.get("sizes")
    speeds = cfg.get("speeds")
    if not sizes or not speeds:
        raise ConfigError("probe-size-study needs sizes and speeds lists")
    if "mu" not in cfg:
        raise ConfigError("probe-size-study needs mu")
    config = _solver_config(cfg)
    table = probe_size_study(
        config,
        mu=cfg["mu"],
        sizes=list(sizes),
        speeds=list(speeds),
        seed=cfg["seed"],
        threshold=cfg["threshold"],
        time_cap=cfg["time_cap"],
    )
    fit = None
    if len(table) >= 3:
        fit = analysis.fit_power_law(list(table.items()))
        print(f"mean time fit: T = {fit.c0:.4g} * M^{-fit.p:.4g}")
    out = Path(cfg["out_dir"]) / "probe_sizes.csv"
    runio.write_size_table(out, table, _meta(cfg), fit)
    print(f"wrote {out}")
    return 0


def cmd_fit_power_law(cfg: dict) -> int:
    if "input" not in cfg:
        raise ConfigError("fit-power-law needs input=<min-nodes csv>")
    pairs = runio.read_min_nodes_pairs(cfg["input"], obs_kind=cfg["obs_kind"])
    try:
        fit = analysis.fit_power_law(pairs)
    except ValueError as exc:
        raise ConfigError(str(exc))
    out_dir = Path(cfg["out_dir"])
    runio.write_fit_summary(out_dir / "power_law_fit.csv", fit, _meta(cfg))
    estimates = []
    for nu in sorted({nu for nu, _ in pairs}):
        estimates.append(analysis.estimate_length_scale(fit, nu, cfg["domain_length"]))
    runio.write_lambda_table(out_dir / "length_scales.csv", estimates, _meta(cfg))
    band = math.exp(fit.log_residual_std)
    print(f"m_h = {fit.c0:.4g} * e^(+-{fit.log_residual_std:.4g}) * nu^(-{fit.p:.4g})   [n={fit.n_points}]")
    for e in estimates:
        print(f"  nu={e.nu:g}  lambda={e.lam:.6g}  n_s={e.n_s}")
    print(f"wrote {out_dir / 'power_law_fit.csv'} and {out_dir / 'length_scales.csv'}")
    return 0


def cmd_estimate_lambda(cfg: dict) -> int:
    if "input" not in cfg:
        raise ConfigError("estimate-lambda needs input=<fit summary csv>")
    if "nu" not in cfg:
        raise ConfigError("estimate-lambda needs nu")
    _, fit = runio.read_fit_summary(cfg["input"])
    est = analysis.estimate_length_scale(fit, cfg["nu"], cfg["domain_length"])
    tag = "  (extrapolated beyond the fitted range)" if est.extrapolated else ""
    print(f"nu={est.nu:g}  lambda={est.lam:.6g}  n_s={est.n_s}{tag}")
    return 0


COMMANDS = {
    "simulate": (cmd_simulate, ("nu",)),
    "assimilate": (cmd_assimilate, ("nu", "mu", "t_end")),
    "find-min-nodes": (cmd_find_min_nodes, ("nu_list", "mu")),
    "velocity-sweep": (cmd_velocity_sweep, ("nu", "mu", "m", "speeds")),
    "probe-size-study": (cmd_probe_size_study, ("nu", "mu", "sizes", "speeds")),
    "fit-power-law": (cmd_fit_power_law, ("input",)),
    "estimate-lambda": (cmd_estimate_lambda, ("input", "nu")),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="acnudge",
        description="Allen-Cahn nudging data-assimilation experiments",
    )
    parser.add_argument("--version", action="version", version=f"acnudge {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="key=value configuration file")
        p.add_argument("--preset", help=f"named preset ({', '.join(sorted(PRESETS))})")
        p.add_argument(
            "--set",
            dest="overrides",
            action="append",
            metavar="KEY=VALUE",
            help="override a configuration key (repeatable)",
        )
        p.add_argument("--out-dir", help="output directory (same as --set out_dir=...)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    func, required = COMMANDS[args.command]
    try:
        overrides = list(args.overrides or [])
        if args.out_dir:
            overrides.append(f"out_dir={args.out_dir}")
        cfg = resolve_config(required, args.preset, args.config, overrides)
        return func(cfg)
    except DivergenceError as exc:
        print(f"divergence: {exc}", file=sys.stderr)
        return 2
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
