"""Command-line entry point: runs, sweeps, analysis reports, gate compilation.

Exit codes: 0 success, 1 validation error, 2 numerical failure, 3 partial
sweep completion.  Every output directory carries a meta.json sufficient to
reproduce the run (full configuration, seed, engine version, convention hash).
Files are written atomically (write-then-rename).
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import os
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

from . import __version__, analysis, calibration, freefermion, gates, oracle, tebd
from .config import (ConfigError, RunConfig, load_toml, run_config_from_dict,
                     sweep_config_from_dict, sweep_points)
from .models import BathSpec, Boundary, CouplingSpec, Family
from .series import EchoSeries

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_PARTIAL = 0, 1, 2, 3


def _atomic_write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_series(series: EchoSeries, out_dir: Path, config: RunConfig):
    lines = ["t,loschmidt"]
    lines += [f"{t:.17g},{v:.17g}" for t, v in zip(series.times, series.values)]
    _atomic_write(out_dir / "echo.csv", "\n".join(lines) + "\n")
    meta = {
        "config": config.as_dict(),
        "engine_version": __version__,
        "convention_hash": calibration.convention_hash(),
        "series_meta": _json_safe(series.meta),
    }
    _atomic_write(out_dir / "meta.json", json.dumps(meta, indent=2, sort_keys=True) + "\n")


def _json_safe(obj):
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return obj


def read_series(run_dir: Path) -> tuple[EchoSeries, dict]:
    raw = np.loadtxt(run_dir / "echo.csv", delimiter=",", skiprows=1)
    raw = np.atleast_2d(raw)
    with open(run_dir / "meta.json") as fh:
        meta = json.load(fh)
    return EchoSeries(raw[:, 0], raw[:, 1], dict(meta.get("series_meta", {}))), meta


def bath_from_meta(meta: dict) -> tuple[BathSpec, CouplingSpec]:
    model = meta["config"]["model"]
    coup = meta["config"]["coupling"]
    bath = BathSpec(Family(model["family"]), int(model["n"]), j=model["j"],
                    gamma=model["gamma"], delta=model["delta"], lam=model["lambda"],
                    boundary=Boundary(model["boundary"]))
    return bath, CouplingSpec(coup["epsilon"], int(coup["site"]), coup["omega_e"])


def run_echo(config: RunConfig, out_dir: Path) -> EchoSeries:
    """Compute one echo series per the configured method and persist it."""
    times = np.linspace(0.0, config.t_max, config.steps)
    if config.method == "determinant":
        series = freefermion.loschmidt_echo_determinant(config.bath, config.coupling, times)
    elif config.method == "exact":
        series = oracle.loschmidt_echo_exact(config.bath, config.coupling, times,
                                             seed=config.seed)
    else:
        series = tebd.loschmidt_echo_tebd(config.bath, config.coupling, times, config.tebd)
    series.meta["seed"] = config.seed
    write_series(series, out_dir, config)
    return series


def _sweep_point(args):
    idx, config, out_dir = args
    t0 = time.time()
    try:
        run_echo(config, out_dir)
        return idx, "ok", "", time.time() - t0
    except Exception as exc:  # a failed point never aborts the sweep
        return idx, "failed", f"{type(exc).__name__}: {exc}", time.time() - t0


def run_sweep(data: dict, out_dir: Path, workers_override=None) -> int:
    sweep = sweep_config_from_dict(data)
    workers = workers_override or sweep.workers
    points = sweep_points(sweep, data)
    print(f"sweep: {len(points)} points "
          f"({' x '.join(f'{k}[{len(v)}]' for k, v in sweep.axes.items())}), "
          f"{workers} workers")
    jobs = [(i, cfg, out_dir / f"point_{i:04d}") for i, cfg in enumerate(points)]
    results = {}
    if workers == 1:
        for job in jobs:
            idx, status, err, dur = _sweep_point(job)
            results[idx] = (status, err, dur)
    else:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            for idx, status, err, dur in pool.map(_sweep_point, jobs):
                results[idx] = (status, err, dur)
    index = {
        "axes": sweep.axes,
        "points": [{
            "dir": f"point_{i:04d}",
            "config": cfg.as_dict(),
            "status": results[i][0],
            "error": results[i][1],
            "seconds": round(results[i][2], 3),
        } for i, cfg in enumerate(points)],
    }
    _atomic_write(out_dir / "index.json", json.dumps(index, indent=2, sort_keys=True) + "\n")
    n_fail = sum(1 for s, _, _ in results.values() if s != "ok")
    print(f"sweep complete: {len(points) - n_fail}/{len(points)} points ok")
    return EXIT_PARTIAL if n_fail else EXIT_OK


def _report_gaussian(run_dir: Path) -> dict:
    series, meta = read_series(run_dir)
    bath, coupling = bath_from_meta(meta)
    fit = analysis.fit_gaussian_rate(series)
    report = {"alpha": fit.alpha, "window": fit.window, "rms_residual": fit.residual,
              "flag": fit.flag}
    try:
        report["predicted_alpha"] = analysis.predicted_alpha(bath, coupling)
    except Exception as exc:
        report["predicted_alpha_error"] = str(exc)
    return report


def _report_plateau(run_dir: Path) -> dict:
    series, meta = read_series(run_dir)
    bath, _ = bath_from_meta(meta)
    est = analysis.plateau_value(series, bath)
    return {"l_inf": est.l_inf, "amplitude": est.amplitude, "window": est.window}


def _report_logdecay(run_dir: Path) -> dict:
    series, meta = read_series(run_dir)
    bath, _ = bath_from_meta(meta)
    t1, _ = analysis.plateau_window(bath)
    log_fit = analysis.fit_log_decay(series, window=(1.0, t1))
    exp_fit = analysis.fit_exponential_decay(series, window=(1.0, t1))
    return {"c0": log_fit.c0, "c1": log_fit.c1, "window": log_fit.window,
            "rms_residual": log_fit.residual, "flag": log_fit.flag,
            "exponential_rms_residual": exp_fit.residual,
            "log_better": log_fit.residual < exp_fit.residual}


def _sweep_runs(sweep_dir: Path):
    with open(sweep_dir / "index.json") as fh:
        index = json.load(fh)
    for point in index["points"]:
        if point["status"] == "ok":
            yield sweep_dir / point["dir"]


def _report_critical(sweep_dir: Path) -> dict:
    pairs, windows = [], []
    for run_dir in _sweep_runs(sweep_dir):
        series, meta = read_series(run_dir)
        bath, _ = bath_from_meta(meta)
        est = analysis.plateau_value(series, bath)
        pairs.append((bath.n_spins, est.l_inf))
        windows.append({"n": bath.n_spins, "window": est.window, "l_inf": est.l_inf,
                        "amplitude": est.amplitude})
    fit = analysis.fit_critical_scaling(sorted(pairs))
    return {"l_infinity": fit.l_infinity, "beta": fit.beta, "residual": fit.residual,
            "r_squared": fit.r_squared, "points": windows}


def _report_concurrence(sweep_dir: Path) -> dict:
    rows = []
    for run_dir in _sweep_runs(sweep_dir):
        series, meta = read_series(run_dir)
        bath, coupling = bath_from_meta(meta)
        fit = analysis.fit_gaussian_rate(series)
        report_rows = analysis.alpha_concurrence_report(
            [bath], coupling, series.times)
        row = report_rows[0]
        rows.append({"parameter": row.parameter, "alpha": row.alpha,
                     "concurrence": row.concurrence, "ratio": row.ratio,
                     "alpha_from_csv": fit.alpha})
    ratios = [r["ratio"] for r in rows if r["ratio"] is not None]
    spread = ((max(ratios) - min(ratios)) / np.mean(ratios)) if ratios else None
    return {"rows": rows, "ratio_spread": spread}


_REPORTS = {"gaussian": _report_gaussian, "plateau": _report_plateau,
            "logdecay": _report_logdecay, "critical": _report_critical,
            "concurrence": _report_concurrence}


def run_analysis(input_dir: Path, which: str, out_path: Path | None) -> dict:
    report = _REPORTS[which](input_dir)
    report["input"] = str(input_dir)
    report["which"] = which
    report["engine_version"] = __version__
    out_path = out_path or input_dir / f"report_{which}.json"
    _atomic_write(out_path, json.dumps(_json_safe(report), indent=2, sort_keys=True) + "\n")
    print(f"wrote {out_path}")
    return report


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="spinbath",
        description="Loschmidt-echo decoherence of a qubit coupled to spin-chain baths")
    sub = parser.add_subparsers(dest="command", required=True)

    p_echo = sub.add_parser("echo", help="run one echo computation")
    p_echo.add_argument("--config", required=True)
    p_echo.add_argument("--output", required=True)
    p_echo.add_argument("--method", choices=sorted({"determinant", "exact", "tebd"}))

    p_sweep = sub.add_parser("sweep", help="run a parameter sweep")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--output", required=True)
    p_sweep.add_argument("--workers", type=int)

    p_an = sub.add_parser("analyze", help="fit reports from stored echo series")
    p_an.add_argument("--input", required=True, help="run directory (or sweep directory)")
    p_an.add_argument("--which", required=True, choices=sorted(_REPORTS))
    p_an.add_argument("--output")

    p_gates = sub.add_parser("compile-gates", help="compile one Trotter step")
    p_gates.add_argument("--config", required=True)
    p_gates.add_argument("--output", required=True)
    p_gates.add_argument("--tau", type=float, required=True)
    p_gates.add_argument("--verify", action="store_true")

    p_check = sub.add_parser("oracle-check",
                             help="run the cross-engine calibration suite")
    p_check.add_argument("--output", required=True)

    args = parser.parse_args(argv)
    try:
        return _dispatch(args)
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (oracle.NumericalError, oracle.DegenerateGroundStateError,
            freefermion.ZeroModeError, tebd.TEBDConvergenceError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


def _dispatch(args) -> int:
    if args.command == "echo":
        data = load_toml(args.config)
        if args.method:
            data["method"] = args.method
        config = run_config_from_dict(data)
        run_echo(config, Path(args.output))
        print(f"wrote {Path(args.output) / 'echo.csv'}")
        return EXIT_OK
    if args.command == "sweep":
        data = load_toml(args.config)
        return run_sweep(data, Path(args.output), args.workers)
    if args.command == "analyze":
        run_analysis(Path(args.input), args.which,
                     Path(args.output) if args.output else None)
        return EXIT_OK
    if args.command == "compile-gates":
        data = load_toml(args.config)
        config = run_config_from_dict(data)
        seq = gates.compile_step(config.bath, config.coupling, args.tau)
        out_dir = Path(args.output)
        _atomic_write(out_dir / "sequence.txt", gates.format_sequence(seq))
        report = {"tau": args.tau, "gate_count": gates.gate_count(seq),
                  "addressing_ok": gates.check_addressing(seq),
                  "config": config.as_dict(), "engine_version": __version__}
        if args.verify:
            report["distance"] = gates.verify_sequence(
                seq, config.bath, config.coupling, args.tau)
        _atomic_write(out_dir / "compile_report.json",
                      json.dumps(_json_safe(report), indent=2, sort_keys=True) + "\n")
        print(f"wrote {out_dir / 'sequence.txt'}")
        return EXIT_OK
    if args.command == "oracle-check":
        result = calibration.run_calibration()
        out_dir = Path(args.output)
        _atomic_write(out_dir / "calibration.json",
                      json.dumps(_json_safe(result), indent=2, sort_keys=True) + "\n")
        for name, check in result["checks"].items():
            status = "PASS" if check["error"] <= check["tol"] else "FAIL"
            print(f"{status} {name}: error {check['error']:.3e} (tol {check['tol']:.0e})")
        print(f"convention hash: {result['convention_hash']}")
        return EXIT_OK if result["passed"] else EXIT_NUMERICAL
    raise ConfigError(f"unknown command {args.command}")


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
