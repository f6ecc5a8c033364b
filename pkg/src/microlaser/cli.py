"""Configuration-driven experiment runner.

Commands:
    microlaser run <config.toml | preset-name>  [--seed N] [--out DIR]
                                                [--threads N] [--set k=v ...]
    microlaser list-presets
    microlaser validate <config.toml | preset-name>

Every run writes result.csv (17-significant-digit CSV with `#` metadata
lines) and manifest.json into the output directory; identical config + seed
reproduces identical CSV bytes.  Exit codes: 0 ok, 2 config error,
3 numerical error.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib

from . import __version__, analytic, correlation, generator, qtm
from .model import (FockGrid, ModelParams, ParameterError, single_mode_preset,
                    symmetric_params, validate)

EXPERIMENT_KINDS = ("steady-dist", "sweep-mean", "g2", "trapping-scan",
                    "velocity-study", "semiclassical")


class ConfigError(ValueError):
    pass


NUMERICAL_ERRORS = (
    analytic.DivergenceError,
    generator.ConvergenceError,
    generator.StabilityError,
    qtm.GridOverflowError,
    correlation.EstimationError,
)


# ---------------------------------------------------------------------------
# presets: one per paper-figure class, each tagged with the acceptance
# criterion it feeds ("none" for purely illustrative outputs)

_TRAP1 = math.pi / math.sqrt(3.0)   # one-photon trapping phase
_TRAP0 = math.pi / math.sqrt(2.0)   # vacuum trapping phase

PRESETS: dict[str, dict] = {
    "fig3-flat-regions": {
        "kind": "steady-dist",
        "criterion": "1, 3",
        "note": "staircase photon distribution with exactly flat regions",
        "params": {"g": 1.0, "gamma": 1.0, "nb": 0.1, "R": 50.0, "gtau": 0.8},
        "method": "all",
        "qtm": {"n_traj": 400, "t_final": 40.0, "burn_in": 15.0},
    },
    "fig10-qtm-distribution": {
        "kind": "steady-dist",
        "criterion": "2",
        "note": "trajectory ensemble vs analytic distribution at high pump",
        "params": {"g": 1.0, "gamma": 1.0, "nb": 0.1, "R": 200.0, "gtau": 0.3},
        "method": "all",
        "qtm": {"n_traj": 2000, "t_final": 50.0, "burn_in": 25.0},
    },
    "fig11-mean-sweep": {
        "kind": "sweep-mean",
        "criterion": "none",
        "note": "mean photon number vs pump phase with sharp transitions",
        "params": {"g": 1.0, "gamma": 1.0, "nb": 0.1, "R": 50.0, "gtau": 0.8},
        "sweep": {"parameter": "gtau", "min": 0.05, "max": 3.5, "points": 140},
    },
    "fig7-trapping-g2": {
        "kind": "g2",
        "criterion": "4, 6",
        "note": "antibunched correlation at the one-photon trapping point",
        "params": {"g": 1.0, "gamma": 1.0, "nb": 0.0, "R": 10.0, "gtau": _TRAP1},
        "qtm": {"n_traj": 4000, "t_final": 35.0, "burn_in": 10.0},
        "correlation": {"bin_width": 0.05, "tau_max": 10.0, "target": "mode1"},
    },
    "fig9-bunching-g2": {
        "kind": "g2",
        "criterion": "6",
        "note": "bunched correlations decaying to one at weak pump phases",
        "params": {"g": 1.0, "gamma": 1.0, "nb": 0.0, "R": 10.0, "gtau": 0.5},
        "variants": [{"label": "gtau=0.12", "gtau": 0.12},
                     {"label": "gtau=0.5", "gtau": 0.5}],
        "qtm": {"n_traj": 4000, "t_final": 35.0, "burn_in": 10.0},
        "correlation": {"bin_width": 0.05, "tau_max": 10.0, "target": "mode1"},
    },
    "fig13-transient-antibunching": {
        "kind": "g2",
        "criterion": "6",
        "note": "transient antibunching before monotone decay to one",
        "params": {"g": 1.0, "gamma": 1.0, "nb": 0.0, "R": 10.0, "gtau": 1.0},
        "variants": [{"label": "gtau=3", "gtau": 3.0},
                     {"label": "gtau=2", "gtau": 2.0},
                     {"label": "gtau=1", "gtau": 1.0}],
        "qtm": {"n_traj": 4000, "t_final": 35.0, "burn_in": 10.0},
        "correlation": {"bin_width": 0.05, "tau_max": 10.0, "target": "mode1"},
    },
    "fig8-trapped-decay": {
        "kind": "velocity-study",
        "criterion": "5",
        "note": "single-mode trapped-state correlation, 1 - exp(-eta tau)",
        "params": {"g": 1.0, "gamma": 1.0, "nb": 0.0, "R": 10.0,
                   "gtau": _TRAP0, "single_mode": True},
        "spreads": [0.0],
        "correlation": {"bin_width": 0.05, "tau_max": 10.0, "target": "mode1"},
    },
    "fig15-trapping-dips": {
        "kind": "trapping-scan",
        "criterion": "7a",
        "note": "vacuum-trapping dip filled in by atomic velocity spread",
        "params": {"g": 1.0, "gamma": 1.0, "nb": 0.0, "R": 50.0, "gtau": _TRAP0},
        "sweep": {"parameter": "gtau", "min": 2.08, "max": 2.36, "points": 57},
        "spreads": [0.0, 2e-5, 2e-4, 1e-3, 2e-3, 1e-2, 2e-2],
    },
    "fig20-noise-induced-bunching": {
        "kind": "velocity-study",
        "criterion": "7b, 8",
        "note": "velocity noise converts trapping antibunching into bunching",
        "params": {"g": 1.0, "gamma": 1.0, "nb": 0.0, "R": 10.0, "gtau": _TRAP1},
        "spreads": [1e-4, 3e-4, 5e-4, 7e-4, 1e-3, 1.5e-3, 2e-3],
        "correlation": {"bin_width": 0.05, "tau_max": 10.0, "target": "mode1"},
    },
    "fig21-bunching-decline": {
        "kind": "velocity-study",
        "criterion": "7b",
        "note": "bunching decays again at large velocity spreads",
        "params": {"g": 1.0, "gamma": 1.0, "nb": 0.0, "R": 10.0, "gtau": _TRAP1},
        "spreads": [2e-3, 6e-3, 1e-2, 2e-2, 0.2],
        "correlation": {"bin_width": 0.05, "tau_max": 10.0, "target": "mode1"},
    },
    "fig21-total-correlation": {
        "kind": "velocity-study",
        "criterion": "none",
        "note": "total-photon correlation flips to bunching under spread",
        "params": {"g": 1.0, "gamma": 1.0, "nb": 0.0, "R": 10.0, "gtau": _TRAP1},
        "spreads": [0.0, 4e-4],
        "correlation": {"bin_width": 0.05, "tau_max": 10.0, "target": "total"},
    },
    "semiclassical-thresholds": {
        "kind": "semiclassical",
        "criterion": "none",
        "note": "stable/unstable rate-equation occupations vs pump phase",
        "params": {"g": 1.0, "gamma": 1.0, "nb": 0.1, "R": 50.0, "gtau": 0.8},
        "sweep": {"parameter": "gtau", "min": 0.05, "max": 3.5, "points": 140},
    },
}


# ---------------------------------------------------------------------------
# configuration


@dataclasses.dataclass
class ExperimentConfig:
    kind: str
    params: ModelParams
    name: str = "custom"
    criterion: str = "none"
    note: str = ""
    method: str = "all"
    grid: FockGrid | None = None
    sweep: dict | None = None
    qtm: dict | None = None
    correlation: dict | None = None
    spreads: list | None = None
    variants: list | None = None
    single_mode: bool = False
    dump_trajectories: bool = False


def _build_params(raw: dict) -> tuple[ModelParams, bool]:
    required = {"g", "gamma", "nb", "R", "gtau"}
    missing = required - raw.keys()
    if missing:
        raise ConfigError(f"params missing keys: {sorted(missing)}")
    single = bool(raw.get("single_mode", False))
    spread = float(raw.get("spread", 0.0))
    tau_int = float(raw["gtau"]) / float(raw["g"])
    maker = single_mode_preset if single else symmetric_params
    try:
        p = maker(float(raw["g"]), float(raw["gamma"]), float(raw["nb"]),
                  float(raw["R"]), tau_int, spread)
    except ParameterError as exc:
        raise ConfigError(str(exc)) from exc
    return p, single


def config_from_dict(raw: dict, name: str = "custom") -> ExperimentConfig:
    if "kind" not in raw:
        raise ConfigError("config missing 'kind'")
    kind = raw["kind"]
    if kind not in EXPERIMENT_KINDS:
        raise ConfigError(f"unknown kind {kind!r}; expected one of {EXPERIMENT_KINDS}")
    if "params" not in raw:
        raise ConfigError("config missing 'params' table")
    params, single = _build_params(dict(raw["params"]))
    grid = None
    if "grid" in raw:
        g = raw["grid"]
        try:
            grid = FockGrid(int(g["n1_max"]), int(g["n2_max"]))
        except (KeyError, ParameterError) as exc:
            raise ConfigError(f"bad grid table: {exc}") from exc
    sweep = raw.get("sweep")
    if kind in ("sweep-mean", "trapping-scan", "semiclassical"):
        if not sweep:
            raise ConfigError(f"kind {kind!r} requires a 'sweep' table")
        if sweep["parameter"] not in ("gtau", "theta"):
            raise ConfigError("sweep parameter must be 'gtau' or 'theta'")
        if not (float(sweep["min"]) < float(sweep["max"])):
            raise ConfigError("sweep bounds must satisfy min < max")
        if int(sweep["points"]) < 2:
            raise ConfigError("sweep needs at least 2 points")
    qtm_spec = raw.get("qtm")
    if qtm_spec is not None:
        if int(qtm_spec.get("n_traj", 0)) < 1:
            raise ConfigError("qtm.n_traj must be positive")
        if float(qtm_spec.get("t_final", 0.0)) <= float(qtm_spec.get("burn_in", 0.0)):
            raise ConfigError("qtm.t_final must exceed qtm.burn_in")
    if kind == "g2" and qtm_spec is None:
        raise ConfigError("kind 'g2' requires a 'qtm' budget table")
    corr = raw.get("correlation")
    if corr is not None:
        if corr.get("target", "mode1") not in ("mode1", "mode2", "total"):
            raise ConfigError("correlation.target must be mode1, mode2 or total")
        if float(corr.get("bin_width", 0.05)) <= 0:
            raise ConfigError("correlation.bin_width must be positive")
    spreads = raw.get("spreads")
    if kind in ("trapping-scan", "velocity-study"):
        if not spreads:
            raise ConfigError(f"kind {kind!r} requires a 'spreads' list")
        if any(float(s) < 0 for s in spreads):
            raise ConfigError("spreads must be nonnegative")
    return ExperimentConfig(
        kind=kind, params=params, name=name,
        criterion=str(raw.get("criterion", "none")),
        note=str(raw.get("note", "")),
        method=str(raw.get("method", "all")),
        grid=grid, sweep=sweep, qtm=qtm_spec, correlation=corr,
        spreads=[float(s) for s in spreads] if spreads else None,
        variants=raw.get("variants"),
        single_mode=single,
        dump_trajectories=bool(raw.get("dump_trajectories", False)),
    )


def load_config(source: str) -> tuple[ExperimentConfig, dict]:
    """Config from a preset name or a TOML file path; returns (config, raw)."""
    if source in PRESETS:
        raw = json.loads(json.dumps(PRESETS[source]))  # deep copy
        return config_from_dict(raw, name=source), raw
    path = Path(source)
    if not path.exists():
        raise ConfigError(f"{source!r} is neither a preset nor an existing file")
    try:
        raw = tomllib.loads(path.read_text())
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML: {exc}") from exc
    return config_from_dict(raw, name=path.stem), raw


def apply_overrides(raw: dict, pairs: list[str]) -> dict:
    """--set key=value with dotted keys; values parsed as TOML literals."""
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"--set expects key=value, got {pair!r}")
        key, value = pair.split("=", 1)
        try:
            parsed = tomllib.loads(f"v = {value}")["v"]
        except tomllib.TOMLDecodeError:
            parsed = value
        node = raw
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"--set path {key!r} crosses a non-table value")
        node[parts[-1]] = parsed
    return raw


# ---------------------------------------------------------------------------
# experiment kinds


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def _params_with_gtau(cfg: ExperimentConfig, gtau: float,
                      spread: float | None = None) -> ModelParams:
    p = cfg.params
    return p.with_(tau_int=gtau / p.g1,
                   spread=p.spread if spread is None else spread)


def _sweep_axis(cfg: ExperimentConfig):
    sw = cfg.sweep
    x = np.linspace(float(sw["min"]), float(sw["max"]), int(sw["points"]))
    if sw["parameter"] == "theta":
        # theta = g tau sqrt(R / gamma) -> gtau = theta / sqrt(R / gamma)
        scale = math.sqrt(cfg.params.R / cfg.params.gamma1)
        return x, x / scale
    return x, x


def _tau_centers(cfg: ExperimentConfig):
    corr = cfg.correlation or {}
    bw = float(corr.get("bin_width", correlation.DEFAULT_BIN_WIDTH))
    tmax = float(corr.get("tau_max", correlation.DEFAULT_TAU_MAX))
    nbins = int(round(tmax / bw))
    return (np.arange(nbins) + 0.5) * bw, bw, tmax


def _run_steady_dist(cfg, seed, threads):
    p = cfg.params
    grid = cfg.grid or analytic.default_grid(p)
    columns = ["n"]
    series = []
    method = cfg.method
    if method in ("analytic", "all"):
        columns.append("analytic")
        series.append(analytic.marginal(analytic.steady_joint_dist(p, grid), 1))
    if method in ("generator", "all"):
        columns.append("generator")
        gen = generator.build(p, grid)
        series.append(analytic.marginal(generator.steady_state(gen), 1))
    ens = None
    if method in ("qtm", "all"):
        columns.append("qtm")
        spec = cfg.qtm or {"n_traj": 1000, "t_final": 40.0, "burn_in": 15.0}
        ens = qtm.ensemble_run(
            p, int(spec["n_traj"]), float(spec["t_final"]), seed=seed,
            grid=grid, burn_in=float(spec.get("burn_in", 0.0)),
            collect_leaks=False, collect_events=cfg.dump_trajectories,
            n_workers=threads,
        )
        series.append(analytic.marginal(qtm.time_averaged_dist(ens), 1))
    if len(columns) == 1:
        raise ConfigError(f"unknown method {method!r}")
    rows = [[n, *(s[n] for s in series)] for n in range(grid.n1_max + 1)]
    return columns, rows, {"grid": grid.shape}, ens


def _run_sweep_mean(cfg, seed, threads):
    xs, gtaus = _sweep_axis(cfg)
    rows = []
    for x, gtau in zip(xs, gtaus):
        p = _params_with_gtau(cfg, gtau)
        marg = analytic.marginal(
            analytic.steady_joint_dist(p, analytic.default_grid(p)), 1)
        mean, _, fano = analytic.moments(marg)
        rows.append([x, mean, fano])
    return [cfg.sweep["parameter"], "mean_n", "fano"], rows, {}, None


def _run_g2(cfg, seed, threads):
    variants = cfg.variants or [{"label": "g2", "gtau": cfg.params.gtau}]
    centers, bw, tmax = _tau_centers(cfg)
    target = (cfg.correlation or {}).get("target", "mode1")
    spec = cfg.qtm
    rows = []
    last_ens = None
    for var in variants:
        p = _params_with_gtau(cfg, float(var["gtau"]))
        grid = cfg.grid or analytic.default_grid(p)
        ens = qtm.ensemble_run(
            p, int(spec["n_traj"]), float(spec["t_final"]), seed=seed,
            grid=grid, burn_in=float(spec.get("burn_in", 0.0)),
            collect_events=cfg.dump_trajectories, n_workers=threads,
        )
        est = correlation.pooled_correlation(
            ens.records, target, bin_width=bw, tau_max=tmax,
            burn_in=float(spec.get("burn_in", 0.0)))
        reg = generator.g2_regression(p, grid, target, centers)
        for j in range(len(centers)):
            rows.append([var["label"], centers[j], est.g2[j],
                         int(est.pair_counts[j]), est.stderr[j], reg.g2[j]])
        last_ens = ens
    columns = ["label", "tau", "g2", "pair_count", "stderr", "g2_regression"]
    return columns, rows, {"target": target}, last_ens


def _run_trapping_scan(cfg, seed, threads):
    xs, gtaus = _sweep_axis(cfg)
    rows = []
    for spread in cfg.spreads:
        label = f"spread={spread:g}"
        for x, gtau in zip(xs, gtaus):
            p = _params_with_gtau(cfg, gtau, spread=spread)
            marg = analytic.marginal(
                analytic.steady_joint_dist(p, analytic.default_grid(p)), 1)
            mean = float(np.sum(np.arange(len(marg)) * marg))
            rows.append([label, x, mean])
    return ["label", cfg.sweep["parameter"], "mean_n"], rows, {}, None


def _run_velocity_study(cfg, seed, threads):
    centers, bw, tmax = _tau_centers(cfg)
    target = (cfg.correlation or {}).get("target", "mode1")
    tau_grid = np.concatenate([[0.0], centers])
    rows = []
    for spread in cfg.spreads:
        p = cfg.params.with_(spread=spread)
        grid = cfg.grid or analytic.default_grid(p)
        reg = generator.g2_regression(p, grid, target, tau_grid)
        label = f"spread={spread:g}"
        for j, tau in enumerate(tau_grid):
            rows.append([label, tau, reg.g2[j], 0, 0.0])
    return ["label", "tau", "g2", "pair_count", "stderr"], rows, {"target": target}, None


def _run_semiclassical(cfg, seed, threads):
    xs, gtaus = _sweep_axis(cfg)
    rows = []
    for x, gtau in zip(xs, gtaus):
        p = _params_with_gtau(cfg, gtau)
        s_max = 4.0 * p.R / p.gamma1
        roots = analytic.semiclassical_roots(p, s_max)
        for s, stable in roots.roots:
            rows.append([x, s, stable])
    return [cfg.sweep["parameter"], "root_s", "stable"], rows, {}, None


_RUNNERS = {
    "steady-dist": _run_steady_dist,
    "sweep-mean": _run_sweep_mean,
    "g2": _run_g2,
    "trapping-scan": _run_trapping_scan,
    "velocity-study": _run_velocity_study,
    "semiclassical": _run_semiclassical,
}


# ---------------------------------------------------------------------------
# artifact writing


def _metadata_lines(cfg: ExperimentConfig, seed: int, extra: dict) -> list[str]:
    p = cfg.params
    lines = [
        f"# experiment: {cfg.name} (kind={cfg.kind})",
        f"# criterion: {cfg.criterion}",
        f"# params: g1={_fmt(p.g1)} g2={_fmt(p.g2)} gamma1={_fmt(p.gamma1)}"
        f" gamma2={_fmt(p.gamma2)} nb1={_fmt(p.nb1)} nb2={_fmt(p.nb2)}"
        f" R={_fmt(p.R)} tau_int={_fmt(p.tau_int)} spread={_fmt(p.spread)}",
        f"# seed: {seed}",
        "# units: rates in gamma1 = 1, times in 1/gamma1",
        "# spread semantics: spread = sigma_v / v0 (standard deviation)",
    ]
    for key in sorted(extra):
        lines.append(f"# {key}: {extra[key]}")
    return lines


def write_result_csv(path: Path, columns, rows, cfg, seed, extra):
    lines = _metadata_lines(cfg, seed, extra)
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(_fmt(v) if not isinstance(v, str) else v
                              for v in row))
    path.write_text("\n".join(lines) + "\n")


def write_trajectories_csv(path: Path, ens) -> int:
    lines = ["traj_id,time,event_kind,n1,n2"]
    for rec in ens.records:
        for traj_id, t, kind, n1, n2 in qtm.event_table(rec):
            lines.append(f"{traj_id},{format(t, '.17g')},{kind},{n1},{n2}")
    path.write_text("\n".join(lines) + "\n")
    return len(lines) - 1


def run(source: str, out_dir: str, seed: int = 12345, threads: int = 1,
        overrides: list[str] | None = None) -> dict:
    cfg, raw = load_config(source)
    if overrides:
        raw = apply_overrides(raw, overrides)
        cfg = config_from_dict(raw, name=cfg.name)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    columns, rows, extra, ens = _RUNNERS[cfg.kind](cfg, seed, threads)
    extra = dict(extra)
    extra["kernel"] = qtm.kernel_name()
    write_result_csv(out / "result.csv", columns, rows, cfg, seed, extra)
    outputs = ["result.csv"]
    if cfg.dump_trajectories:
        if ens is None or not ens.records or ens.records[0].events is None:
            raise ConfigError(
                "dump_trajectories requires an experiment kind that runs trajectories")
        write_trajectories_csv(out / "trajectories.csv", ens)
        outputs.append("trajectories.csv")
    manifest = {
        "name": cfg.name,
        "kind": cfg.kind,
        "criterion": cfg.criterion,
        "config": raw,
        "seed": seed,
        "threads": threads,
        "version": __version__,
        "kernel": qtm.kernel_name(),
        "outputs": outputs,
        "columns": columns,
        "rows": len(rows),
        "wall_time_s": round(time.perf_counter() - t0, 3),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2,
                                                  sort_keys=True) + "\n")
    return manifest


def list_presets(file=None):
    width = max(len(n) for n in PRESETS)
    for name, spec in PRESETS.items():
        print(f"{name:<{width}}  kind={spec['kind']:<14} "
              f"criterion={spec['criterion']:<6} {spec['note']}",
              file=file or sys.stdout)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="microlaser",
        description="Two-mode microlaser photon-statistics experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run a preset or TOML config")
    p_run.add_argument("source", help="preset name or path to config.toml")
    p_run.add_argument("--seed", type=int, default=12345)
    p_run.add_argument("--out", default="out")
    p_run.add_argument("--threads", type=int, default=1)
    p_run.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="K=V", help="override a config key (dotted path)")
    sub.add_parser("list-presets", help="show the preset catalog")
    p_val = sub.add_parser("validate", help="check a config without running it")
    p_val.add_argument("source")
    args = parser.parse_args(argv)

    try:
        if args.command == "list-presets":
            list_presets()
            return 0
        if args.command == "validate":
            cfg, _ = load_config(args.source)
            print(f"ok: {cfg.name} (kind={cfg.kind})")
            return 0
        manifest = run(args.source, args.out, seed=args.seed,
                       threads=args.threads, overrides=args.overrides)
        print(f"wrote {', '.join(manifest['outputs'])} to {args.out} "
              f"({manifest['rows']} rows, {manifest['wall_time_s']} s)")
        return 0
    except (ConfigError, ParameterError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NUMERICAL_ERRORS as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
