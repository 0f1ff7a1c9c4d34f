"""Command-line front end: subcommands map 1:1 to the study operations.

Exit status: 0 on PASS/WARN verdicts, 1 on FAIL, 2 on configuration errors.
Errors are emitted as a JSON object {code, message, location} on stderr.
All floats in CSV output use the shortest representation that parses back
exactly, so downstream plotting loses no precision.
"""

import argparse
import csv
import json
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import averaging, bsvi, experiments, forward, grids
from .config import parse_config
from .errors import ConfigurationError, MsavgError

SUBCOMMANDS = (
    "simulate-forward", "solve-bsvi", "avg-verify", "rate-sweep",
    "converge-backward", "homogenize", "example71",
)


def _fmt(value):
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return value


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _write_manifest(out_dir, command, run_cfg, threads, verdicts, wall_times, outputs):
    manifest = {
        "command": command,
        "seed": run_cfg.seed,
        "threads": threads,
        "config": run_cfg.effective,
        "defaults_applied": run_cfg.defaults_applied,
        "verdicts": verdicts,
        "wall_times_s": {k: round(v, 3) for k, v in wall_times.items()},
        "outputs": sorted(outputs),
    }
    path = Path(out_dir) / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def _sweep_rows_csv(result):
    header = ["epsilon", "error", "ci_low", "ci_high", "n_steps", "predicted"]
    rows = []
    for i, r in enumerate(result.rows):
        pred = result.predicted[i] if result.predicted is not None else ""
        rows.append([r.epsilon, r.error, r.ci_low, r.ci_high, r.n_steps, pred])
    return header, rows


def _run_simulate_forward(run_cfg, out_dir):
    cfg = run_cfg.sweep
    grid = grids.make_grid(cfg.t0, cfg.T, cfg.n_steps())
    brownian = grids.sample_brownian(grid, cfg.n_paths, run_cfg.scenario.dim_l, cfg.master_seed)
    eps = cfg.epsilons[0]
    batch = forward.euler_multiscale(run_cfg.scenario, eps, cfg.x0, grid, brownian, cfg.eta_osc)
    nodes = grid.nodes()
    rows = (
        ["run", p, k, nodes[k], c, batch.states[p, k, c]]
        for p in range(batch.n_paths)
        for k in range(grid.n_steps + 1)
        for c in range(batch.dim_m)
    )
    path = Path(out_dir) / "forward_paths.csv"
    write_csv(path, ["run_id", "path", "step", "t", "coord", "value"], rows)
    return {"simulate_forward": "PASS"}, [path.name]


def _run_solve_bsvi(run_cfg, out_dir):
    cfg = run_cfg.sweep
    grid = grids.make_grid(cfg.t0, cfg.T, cfg.n_steps())
    brownian = grids.sample_brownian(grid, cfg.n_paths, run_cfg.scenario.dim_l, cfg.master_seed)
    eps = cfg.epsilons[0]
    batch = forward.euler_multiscale(run_cfg.scenario, eps, cfg.x0, grid, brownian, cfg.eta_osc)
    sol = bsvi.solve_bsvi(batch, run_cfg.scenario, cfg.basis, cfg.n_picard)
    nodes = grid.nodes()
    d, l = run_cfg.scenario.dim_d, run_cfg.scenario.dim_l
    header = (["run_id", "path", "step", "t"]
              + [f"Y{i}" for i in range(d)]
              + [f"Z{i}_{j}" for i in range(d) for j in range(l)]
              + [f"dK{i}" for i in range(d)])

    def rows():
        for p in range(batch.n_paths):
            for k in range(grid.n_steps):
                yield (["run", p, k, nodes[k]] + list(sol.Y[p, k]) +
                       list(sol.Z[p, k].ravel()) + list(sol.dK[p, k]))

    path = Path(out_dir) / "bsvi_solution.csv"
    write_csv(path, header, rows())
    diag_path = Path(out_dir) / "bsvi_diagnostics.json"
    diag = {
        "condition_numbers": [float(c) for c in sol.diagnostics["condition_numbers"]],
        "residual_rms": [float(r) for r in sol.diagnostics["residual_rms"]],
        "cond_warnings": sol.diagnostics["cond_warnings"],
    }
    diag_path.write_text(json.dumps(diag, indent=2) + "\n")
    return {"solve_bsvi": "PASS"}, [path.name, diag_path.name]


def _run_avg_verify(run_cfg, out_dir):
    scn = run_cfg.scenario
    if not scn.has_averaged():
        raise ConfigurationError("avg-verify needs averaged coefficients on the scenario")
    rows = []
    ok = True
    for kind in run_cfg.avg_kinds:
        est = averaging.estimate_kappa(kind, scn, np.array(run_cfg.avg_t_hats))
        ok = ok and est.decreasing
        for t_hat, kappa, probe in zip(est.T_hats, est.kappa_hats, est.argmax_probes):
            rows.append([kind, float(t_hat), float(kappa),
                         " ".join(repr(float(v)) for v in probe)])
    path = Path(out_dir) / "kappa.csv"
    write_csv(path, ["kind", "T_hat", "kappa_hat", "argmax_probe"], rows)
    return {"avg_verify": "PASS" if ok else "WARN"}, [path.name]


def _run_rate_sweep(run_cfg, out_dir):
    result = experiments.rate_sweep_forward(run_cfg.scenario, run_cfg.sweep)
    header, rows = _sweep_rows_csv(result)
    path = Path(out_dir) / "rate_forward.csv"
    write_csv(path, header, rows)
    verdicts = {"rate_sweep": result.verdict}
    if result.slope is not None:
        verdicts["slope"] = repr(result.slope)
    else:
        verdicts["slope"] = None
    return verdicts, [path.name]


def _run_converge_backward(run_cfg, out_dir):
    result = experiments.converge_backward(run_cfg.scenario, run_cfg.sweep)
    header, rows = _sweep_rows_csv(result)
    path = Path(out_dir) / "converge_backward.csv"
    write_csv(path, header, rows)
    return {"converge_backward": result.verdict}, [path.name]


def _run_homogenize(run_cfg, out_dir):
    result = experiments.homogenize_pde(
        run_cfg.scenario, run_cfg.homogenize_points, run_cfg.sweep.epsilons, run_cfg.sweep
    )
    path = Path(out_dir) / "homogenize.csv"
    write_csv(
        path,
        ["t", "x", "epsilon", "u_eps", "se_eps", "u_bar", "se_bar", "gap"],
        [[r.t, r.x, r.epsilon, r.u_eps, r.se_eps, r.u_bar, r.se_bar, r.gap]
         for r in result.rows],
    )
    return {"homogenize": result.verdict}, [path.name]


def _run_example71(run_cfg, out_dir):
    report = experiments.example71(run_cfg.sweep)
    outputs = []
    header, rows = _sweep_rows_csv(report.forward_sweep)
    path = Path(out_dir) / "rate_forward.csv"
    write_csv(path, header, rows)
    outputs.append(path.name)
    header, rows = _sweep_rows_csv(report.backward_sweep)
    path = Path(out_dir) / "converge_backward.csv"
    write_csv(path, header, rows)
    outputs.append(path.name)
    path = Path(out_dir) / "homogenize.csv"
    write_csv(
        path,
        ["t", "x", "epsilon", "u_eps", "se_eps", "u_bar", "se_bar", "gap"],
        [[r.t, r.x, r.epsilon, r.u_eps, r.se_eps, r.u_bar, r.se_bar, r.gap]
         for r in report.homogenize.rows],
    )
    outputs.append(path.name)
    kappa_rows = []
    for est in (report.kappa_drift, report.kappa_diffusion):
        for t_hat, kappa, probe in zip(est.T_hats, est.kappa_hats, est.argmax_probes):
            kappa_rows.append([est.kind, float(t_hat), float(kappa),
                               " ".join(repr(float(v)) for v in probe)])
    path = Path(out_dir) / "kappa.csv"
    write_csv(path, ["kind", "T_hat", "kappa_hat", "argmax_probe"], kappa_rows)
    outputs.append(path.name)
    verdicts = dict(report.verdicts)
    verdicts["overall"] = report.overall
    if report.forward_sweep.slope is not None:
        verdicts["forward_slope"] = repr(report.forward_sweep.slope)
    return verdicts, outputs


_RUNNERS = {
    "simulate-forward": _run_simulate_forward,
    "solve-bsvi": _run_solve_bsvi,
    "avg-verify": _run_avg_verify,
    "rate-sweep": _run_rate_sweep,
    "converge-backward": _run_converge_backward,
    "homogenize": _run_homogenize,
    "example71": _run_example71,
}


def run_subcommand(name, run_cfg, out_dir, threads=1):
    """Execute one subcommand, writing its artifacts into out_dir.

    Computation is fully vectorized in-process; the threads argument is
    accepted for interface stability and never changes any numeric result.
    """
    if name not in _RUNNERS:
        raise ConfigurationError(f"unknown subcommand {name!r}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    verdicts, outputs = _RUNNERS[name](run_cfg, out)
    wall = {"total": time.perf_counter() - start}
    manifest = _write_manifest(out, name, run_cfg, threads, verdicts, wall, outputs)
    outputs.append(manifest.name)
    failed = any(v == "FAIL" for v in verdicts.values() if isinstance(v, str))
    return (1 if failed else 0), verdicts, outputs


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="msavg",
        description="Multiscale SDE / backward variational inequality studies",
    )
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--config", type=Path, default=None, help="TOML run configuration")
    parser.add_argument("--out", type=Path, default=Path("msavg-out"), help="output directory")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("--threads", type=int, default=1,
                        help="worker threads (results are independent of this)")
    return parser


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        text = args.config.read_text() if args.config is not None else ""
        run_cfg = parse_config(text)
        if args.seed is not None:
            run_cfg = replace(
                run_cfg,
                seed=args.seed,
                sweep=replace(run_cfg.sweep, master_seed=args.seed),
            )
        status, verdicts, _ = run_subcommand(args.subcommand, run_cfg, args.out, args.threads)
    except ConfigurationError as exc:
        json.dump({"code": 2, "message": str(exc), "location": exc.location}, sys.stderr)
        sys.stderr.write("\n")
        return 2
    except MsavgError as exc:
        json.dump({"code": 2, "message": str(exc), "location": None}, sys.stderr)
        sys.stderr.write("\n")
        return 2
    summary = " ".join(f"{k}={v}" for k, v in verdicts.items())
    print(f"{args.subcommand}: {'FAIL' if status else 'PASS'} ({summary})")
    return status


if __name__ == "__main__":
    sys.exit(main())
