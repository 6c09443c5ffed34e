"""Command-line front end.

Commands: ``simulate``, ``region``, ``spectrum``, ``sweep`` and ``verify``.
Outputs go to ``--out`` (default ``$DELAYWAVE_OUT`` or ``./delaywave_out``).
Exit codes: 0 success, 1 failed acceptance check, 2 invalid input,
3 incomplete root capture.
"""
from __future__ import annotations

import argparse
import itertools
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict
from pathlib import Path
from typing import Optional, Sequence

from . import output, region, spectral1d
from .core import DlpParams, GeometryConstants
from .experiment import ConfigError, parse_experiment, simulate, summarize
from .solver import run

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_INVALID = 2
EXIT_INCOMPLETE = 3

SWEEP_KEYS = ("a", "k", "tau", "xi")


def _err(msg: str) -> None:
    print(f"delaywave: {msg}", file=sys.stderr)


def _load_json(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError("--config", str(exc)) from exc
    except json.JSONDecodeError as exc:
        raise ConfigError("--config", f"invalid JSON: {exc}") from exc


def _out_dir(args) -> Path:
    out = Path(args.out) if args.out else output.default_out_dir()
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# simulate


def cmd_simulate(args) -> int:
    if not args.config:
        _err("simulate needs --config")
        return EXIT_INVALID
    try:
        cfg = _load_json(args.config)
        exp = parse_experiment(cfg)
        result = run(exp.config, exp.init)
    except ValueError as exc:
        _err(str(exc))
        return EXIT_INVALID
    out = _out_dir(args)
    summary = summarize(exp, result)
    output.write_energy_csv(out / "energy.csv", result.samples,
                            comments=["delaywave energy series", f"status={result.status_label}"])
    output.write_json(out / "summary.json", summary)
    grid = exp.config.grid
    for i, snap in enumerate(result.snapshots):
        output.write_snapshot_csv(out / "snapshots" / f"snap_{i:05d}.csv", snap.t, snap.u, snap.v, grid)
    print(f"status={result.status_label} samples={len(result.samples)} out={out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# region


def _region_constants(args) -> GeometryConstants:
    if args.preset not in region.PRESETS:
        raise ConfigError("--preset", f"unsupported preset {args.preset!r}; choose from {sorted(region.PRESETS)}")
    gc = region.geometry_constants(region.PRESETS[args.preset])
    overrides = {k: getattr(args, k) for k in ("n", "m_inf", "delta", "cp", "c0p") if getattr(args, k) is not None}
    return GeometryConstants(**{**asdict(gc), **overrides})


def cmd_region(args) -> int:
    try:
        gc = _region_constants(args)
        point = (args.a, args.xi) if args.a is not None and args.xi is not None else None
        report = region.region_report(args.k, args.tau, gc, point=point)
    except ValueError as exc:
        _err(str(exc))
        return EXIT_INVALID
    out = _out_dir(args)
    output.write_json(out / "region.json", {"preset": args.preset, **report.to_dict()})
    output.write_csv(out / "polygon.csv", ("a", "xi"), report.polygon,
                     comments=[f"admissible (a, xi) for k={output.fmt(args.k)} tau={output.fmt(args.tau)}",
                               "counterclockwise vertices" if report.polygon else f"empty: {report.polygon_reason}"])
    print(f"a0={output.fmt(report.a0)} gamma1={output.fmt(report.gamma1)} vertices={len(report.polygon)}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# spectrum


def spectrum_summary(params: DlpParams, res) -> dict:
    threshold = spectral1d.dlp_threshold(params.a)
    below = params.k < threshold
    return {
        "a": params.a,
        "k": params.k,
        "tau": params.tau,
        "dlp_threshold": threshold,
        "k_below_threshold": below,
        "claim": "condition satisfied; spectrum in Re w <= -beta" if below else "condition not satisfied; no claim",
        "abscissa": res.abscissa,
        "beta": res.beta,
        "search_box": list(res.search_box),
        "winding_count": res.winding_count,
        "found_count": res.found_count,
        "complete": res.complete,
        "max_residual": max(res.residuals) if res.residuals else None,
    }


def cmd_spectrum(args) -> int:
    try:
        params = DlpParams(a=args.a, k=args.k, tau=args.tau)
    except ValueError as exc:
        _err(str(exc))
        return EXIT_INVALID
    res = spectral1d.rightmost_roots(params)
    out = _out_dir(args)
    summary = spectrum_summary(params, res)
    output.write_roots_csv(out / "roots.csv", res.roots, res.residuals,
                           comments=[f"characteristic roots a={output.fmt(params.a)} k={output.fmt(params.k)} "
                                     f"tau={output.fmt(params.tau)}"])
    output.write_json(out / "spectrum.json", summary)
    if not res.complete:
        _err(f"incomplete root capture: winding count {res.winding_count}, roots found {res.found_count}")
        return EXIT_INCOMPLETE
    print(f"abscissa={output.fmt(res.abscissa)} roots={res.found_count} {summary['claim']}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# sweep


def _sweep_points(spec: dict) -> list[dict]:
    axes = spec.get("grid")
    if not isinstance(axes, dict) or not axes:
        raise ConfigError("grid", "expected a non-empty object of parameter lists")
    for key, values in axes.items():
        if key not in SWEEP_KEYS:
            raise ConfigError(f"grid.{key}", f"not a sweepable parameter; use {SWEEP_KEYS}")
        if not isinstance(values, list) or not values:
            raise ConfigError(f"grid.{key}", "expected a non-empty list")
    keys = [k for k in SWEEP_KEYS if k in axes]
    return [dict(zip(keys, combo)) for combo in itertools.product(*(axes[k] for k in keys))]


def _a0_for(base: dict, k: float) -> float:
    from .experiment import parse_grid

    grid = parse_grid(base.get("grid", {}))
    gc = region.geometry_constants(region.geometry_for_grid(grid))
    return region.a0(k, gc)


def sweep_point(job: tuple) -> dict:
    """Run one sweep point; never raises."""
    index, base, point, with_spectrum = job
    cfg = json.loads(json.dumps(base))
    params = dict(cfg.get("params", {}))
    row = {"index": index}
    try:
        if isinstance(point.get("a"), dict):
            factor = point["a"].get("a0_factor")
            k = float(point.get("k", params.get("k")))
            point = {**point, "a": factor * _a0_for(cfg, k)}
        params.update(point)
        if "xi" in point:
            params.pop("xi_over_a", None)
        cfg["params"] = params
        _, result, summary = simulate(cfg)
        p = summary["config"]["params"]
        row.update(a=p["a"], k=p["k"], tau=p["tau"], xi=p["xi"], status=result.status_label,
                   C2_fit=(summary["fit"] or {}).get("c2", ""))
        if with_spectrum:
            res = spectral1d.rightmost_roots(DlpParams(a=p["a"], k=p["k"], tau=p["tau"]))
            row["abscissa"] = res.abscissa if res.complete else "incomplete"
    except Exception as exc:  # recorded per row, never aborts the sweep
        row.update({k: point.get(k, params.get(k, "")) for k in SWEEP_KEYS})
        for k in SWEEP_KEYS:
            if isinstance(row[k], dict):
                row[k] = ""
        msg = str(exc).replace(",", ";").replace("\n", " ")
        row.update(status=f"error: {msg}", C2_fit="")
        if with_spectrum:
            row["abscissa"] = ""
    return row


def run_sweep(spec: dict, parallel: int = 1) -> list[dict]:
    base = spec.get("base")
    if not isinstance(base, dict):
        raise ConfigError("base", "expected a simulate configuration object")
    with_spectrum = bool(spec.get("spectrum", False))
    jobs = [(i, base, p, with_spectrum) for i, p in enumerate(_sweep_points(spec))]
    if parallel > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            rows = list(pool.map(sweep_point, jobs))
    else:
        rows = [sweep_point(j) for j in jobs]
    return sorted(rows, key=lambda r: r["index"])


def cmd_sweep(args) -> int:
    if not args.config:
        _err("sweep needs --config")
        return EXIT_INVALID
    if args.parallel < 1:
        _err("--parallel must be >= 1")
        return EXIT_INVALID
    try:
        spec = _load_json(args.config)
        rows = run_sweep(spec, args.parallel)
    except ValueError as exc:
        _err(str(exc))
        return EXIT_INVALID
    columns = ["a", "k", "tau", "xi", "status", "C2_fit"]
    if spec.get("spectrum", False):
        columns.append("abscissa")
    out = _out_dir(args)
    output.write_csv(out / "sweep.csv", columns, ([r[c] for c in columns] for r in rows),
                     comments=["delaywave parameter sweep"])
    failed = sum(1 for r in rows if str(r["status"]).startswith("error"))
    print(f"rows={len(rows)} errors={failed} out={out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify


def cmd_verify(args) -> int:
    from . import acceptance

    out = _out_dir(args)
    t0 = time.perf_counter()
    results = acceptance.run_all(log=lambda m: print(m, file=sys.stderr))
    report = acceptance.format_report(results)
    with open(out / "verify_report.txt", "w", newline="\n") as fh:
        fh.write(report)
    sys.stdout.write(report)
    print(f"verify finished in {time.perf_counter() - t0:.1f} s", file=sys.stderr)
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAILED


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="delaywave", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--out", help="output directory (default: $DELAYWAVE_OUT or ./delaywave_out)")
        return sp

    s = common(sub.add_parser("simulate", help="run one simulation from a JSON config"))
    s.add_argument("--config", help="JSON experiment configuration")

    r = common(sub.add_parser("region", help="threshold a0(k) and admissible (a, xi) polygon"))
    r.add_argument("--k", type=float, default=1.0)
    r.add_argument("--tau", type=float, default=1.0)
    r.add_argument("--preset", default="interval-unit")
    r.add_argument("--a", type=float, help="evaluate the constraints at this a (with --xi)")
    r.add_argument("--xi", type=float)
    for name in ("n",):
        r.add_argument(f"--{name}", type=int)
    for name in ("m-inf", "delta", "cp", "c0p"):
        r.add_argument(f"--{name}", type=float, dest=name.replace("-", "_"))

    sp = common(sub.add_parser("spectrum", help="characteristic roots of the 1D boundary-delay system"))
    sp.add_argument("--a", type=float, required=True)
    sp.add_argument("--k", type=float, required=True)
    sp.add_argument("--tau", type=float, required=True)

    w = common(sub.add_parser("sweep", help="parameter sweep over a, k, tau, xi"))
    w.add_argument("--config", help="JSON sweep specification")
    w.add_argument("--parallel", type=int, default=1)

    common(sub.add_parser("verify", help="run the acceptance suite"))
    return p


COMMANDS = {
    "simulate": cmd_simulate,
    "region": cmd_region,
    "spectrum": cmd_spectrum,
    "sweep": cmd_sweep,
    "verify": cmd_verify,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    return COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
