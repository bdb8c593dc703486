"""Command-line front end.

Subcommands map one-to-one onto the study types: ``ber``, ``convergence``,
``complexity``, ``throughput``, plus ``validate`` for config checking.
Every run writes its artifacts (CSV + JSON mirrors) into ``--out`` and
finishes with ``run_manifest.json`` listing them; the manifest is written
last, so its presence marks a completed run.

Exit codes: 0 success, 2 invalid configuration, 3 I/O failure.  All
user-facing SNR quantities are in dB; computation is linear internally.
"""

import argparse
import csv
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .channel import UnsupportedLoadError
from .complexity import MacModel, mac_formula
from .detectors import DetectorInput, m_blast, matched_filter, mmse_detect, sic_detect, soft_pic
from .montecarlo import (
    ConfigError,
    ExperimentConfig,
    run_ber_sweep,
    run_convergence_study,
    run_sinr_study,
    trial_rng,
)
from .throughput import CdfSupportError, interp_transfer, load_cdf, percentile_sinr, relative_gain, shannon_rate

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3

TABLE_COLUMNS = ((8, 64, 5), (32, 96, 5), (64, 192, 5), (500, 1000, 10), (1000, 2000, 10))

BER_HEADER = ["detector", "eb_n0_db", "bits", "errors", "ber", "ci_low", "ci_high", "macs"]
CONV_HEADER = ["detector", "iteration", "bits", "errors", "ber", "ci_low", "ci_high"]
MACS_HEADER = ["detector", "k", "m", "t", "formula_macs", "measured_macs",
               "measured_over_formula", "pct_of_mmse_formula"]
TPUT_HEADER = ["cdf_source", "percentile", "baseline", "gain_pct"]
SINR_HEADER = ["detector", "snr_db", "sinr_linear", "ci_low", "ci_high"]


def _fmt(value):
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".10g")


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) if not isinstance(v, str) else v for v in row])


def _write_json(path, payload):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_manifest(out_dir, command, cfg_dict, seed, workers, outputs, wall_time):
    manifest = {
        "tool": "mblast",
        "version": __version__,
        "command": command,
        "config": cfg_dict,
        "seed": seed,
        "workers": workers,
        "outputs": sorted(outputs),
        "wall_time_s": round(wall_time, 3),
    }
    _write_json(out_dir / "run_manifest.json", manifest)


def _resolve_config(args):
    """Load the config file and apply CLI overrides.

    Seed precedence: --seed flag, then the config file, then the
    MBLAST_SEED environment variable, then 1.
    """
    path = Path(args.config)
    raw = json.loads(path.read_text(encoding="utf-8"))
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")

    if args.seed is not None:
        raw["seed"] = args.seed
    elif "seed" not in raw and os.environ.get("MBLAST_SEED"):
        try:
            raw["seed"] = int(os.environ["MBLAST_SEED"])
        except ValueError as exc:
            raise ConfigError(f"MBLAST_SEED is not an integer: {exc}") from exc

    if getattr(args, "grid_db", None):
        raw["eb_n0_grid_db"] = [float(v) for v in args.grid_db.split(",")]
    if getattr(args, "detectors", None):
        wanted = [d.strip() for d in args.detectors.split(",") if d.strip()]
        available = {d.get("label") or d.get("kind") for d in raw.get("detectors", [])}
        missing = set(wanted) - available
        if missing:
            raise ConfigError(f"--detectors names not in config: {sorted(missing)}")
        raw["detectors"] = [
            d for d in raw.get("detectors", [])
            if (d.get("label") or d.get("kind")) in wanted
        ]

    workers = args.workers if args.workers else int(raw.get("workers") or 0)
    if workers <= 0:
        workers = os.cpu_count() or 1
    cfg = ExperimentConfig.from_dict(raw)
    return cfg, workers


def _out_dir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _point_dict(point):
    return {
        "eb_n0_db": point.eb_n0_db,
        "bits": point.bits,
        "errors": point.errors,
        "ber": point.ber,
        "ci_low": point.ci_low,
        "ci_high": point.ci_high,
        "macs": point.macs,
    }


def cmd_ber(args):
    cfg, workers = _resolve_config(args)
    out = _out_dir(args)
    t0 = time.time()
    curves = run_ber_sweep(cfg, workers=workers)
    rows = []
    for label in cfg.labels():
        for p in curves[label].points:
            rows.append([label, p.eb_n0_db, p.bits, p.errors, p.ber,
                         p.ci_low, p.ci_high, p.macs])
    _write_csv(out / "ber.csv", BER_HEADER, rows)
    _write_json(out / "ber.json", {
        "config": cfg.to_dict(),
        "curves": {label: [_point_dict(p) for p in curves[label].points]
                   for label in cfg.labels()},
    })
    _write_manifest(out, "ber", cfg.to_dict(), cfg.master_seed, workers,
                    ["ber.csv", "ber.json"], time.time() - t0)
    print(f"wrote {out / 'ber.csv'}")
    return EXIT_OK


def cmd_convergence(args):
    cfg, workers = _resolve_config(args)
    out = _out_dir(args)
    if args.at_db is not None:
        at_db = float(args.at_db)
    else:
        grid = cfg.eb_n0_grid_db
        at_db = grid[len(grid) // 2]
    t0 = time.time()
    rows = run_convergence_study(cfg, at_db, workers=workers)
    table = [[r.label, r.iteration, r.bits, r.errors, r.ber, r.ci_low, r.ci_high]
             for r in rows]
    _write_csv(out / "conv.csv", CONV_HEADER, table)
    _write_json(out / "conv.json", {
        "config": cfg.to_dict(),
        "eb_n0_db": at_db,
        "rows": [
            {"detector": r.label, "iteration": r.iteration, "bits": r.bits,
             "errors": r.errors, "ber": r.ber, "ci_low": r.ci_low,
             "ci_high": r.ci_high}
            for r in rows
        ],
    })
    _write_manifest(out, "convergence", cfg.to_dict(), cfg.master_seed, workers,
                    ["conv.csv", "conv.json"], time.time() - t0)
    print(f"wrote {out / 'conv.csv'}")
    return EXIT_OK


def _measure_macs(kind, k, m, t, seed=2024):
    """One instrumented detector run on the K-column real submodel.

    The submodel is the natural real embodiment of the complex-dimension
    formulas; its rows are doubled by the lift, so measured/formula ratios
    sit near 2 rather than 1.
    """
    from .channel import generate_channel, generate_powers, lift_to_real, transmit

    rng = trial_rng(seed, 9, k, m)
    ch = generate_channel(k, m, rng)
    h = lift_to_real(ch, generate_powers(k))[:, :k]
    x = rng.integers(0, 2, size=k) * 2.0 - 1.0
    sigma2 = 0.25
    y = transmit(h, x, sigma2, rng)
    inp = DetectorInput(h_est=h, y=y, sigma2_hat=sigma2, beta=k / m)
    if kind == "mf":
        return matched_filter(inp).macs
    if kind == "mmse":
        return mmse_detect(inp).macs
    if kind == "vblast":
        _, out = sic_detect(inp, filter_kind="mmse", constellation="bpsk")
        return out.macs
    runner = m_blast if kind == "mblast" else soft_pic
    return runner(inp, t, early_exit_tol=0.0).macs


def cmd_complexity(args):
    out = _out_dir(args)
    t0 = time.time()
    if args.table:
        columns = []
        for chunk in args.table.split(";"):
            k, m, t = (int(v) for v in chunk.split(","))
            columns.append((k, m, t))
    else:
        columns = list(TABLE_COLUMNS)

    rows = []
    for k, m, t in columns:
        mmse_formula = mac_formula(MacModel("mmse", k, m))
        for kind in ("mf", "mmse", "vblast", "pic", "mblast"):
            iterations = t if kind in ("pic", "mblast") else 1
            formula = mac_formula(MacModel(kind, k, m, iterations))
            measure = args.measure and (kind != "vblast" or k <= args.measure_vblast_max_k)
            measured = _measure_macs(kind, k, m, iterations) if measure else ""
            ratio = measured / formula if measured != "" else ""
            rows.append([kind, k, m, iterations, formula, measured, ratio,
                         100.0 * formula / mmse_formula])
    _write_csv(out / "macs.csv", MACS_HEADER, rows)
    _write_json(out / "macs.json", {
        "columns": [{"k": k, "m": m, "t": t} for k, m, t in columns],
        "rows": [dict(zip(MACS_HEADER, r)) for r in rows],
    })
    _write_manifest(out, "complexity", {"table": [list(c) for c in columns]},
                    None, 1, ["macs.csv", "macs.json"], time.time() - t0)
    print(f"wrote {out / 'macs.csv'}")
    return EXIT_OK


def _auto_snr_grid(cdfs, percentiles):
    ops = [percentile_sinr(cdf, p) for cdf in cdfs for p in percentiles]
    lo, hi = min(ops) - 2.0, max(ops) + 2.0
    count = max(2, int(round((hi - lo) / 2.0)) + 1)
    return [round(v, 6) for v in np.linspace(lo, hi, count)]


def cmd_throughput(args):
    cfg, workers = _resolve_config(args)
    out = _out_dir(args)
    t0 = time.time()
    percentiles = [int(p) for p in args.percentiles.split(",")]
    cdfs = [load_cdf(p) for p in args.cdf]
    if args.snr_grid_db:
        grid = [float(v) for v in args.snr_grid_db.split(",")]
    else:
        grid = _auto_snr_grid(cdfs, percentiles)

    target = args.target
    labels = cfg.labels()
    if target not in labels:
        raise ConfigError(f"target detector {target!r} not among {labels}")
    baselines = [lbl for lbl in labels if lbl != target]

    transfer = run_sinr_study(cfg, grid, workers=workers)
    curves = {
        label: [(p.snr_db, p.sinr_linear) for p in pts]
        for label, pts in transfer.items()
    }

    sinr_rows = [
        [label, p.snr_db, p.sinr_linear, p.ci_low, p.ci_high]
        for label in labels
        for p in transfer[label]
    ]
    _write_csv(out / "sinr.csv", SINR_HEADER, sinr_rows)

    rows = []
    for cdf in cdfs:
        source = Path(cdf.source).name
        for p in percentiles:
            for baseline in baselines:
                gain = relative_gain(curves[target], curves[baseline], cdf, p,
                                     floor_at_zero=args.floor_zero)
                rows.append([source, p, baseline, gain])
    _write_csv(out / "tput.csv", TPUT_HEADER, rows)
    _write_json(out / "tput.json", {
        "config": cfg.to_dict(),
        "target": target,
        "snr_grid_db": grid,
        "rows": [dict(zip(TPUT_HEADER, r)) for r in rows],
    })
    _write_manifest(out, "throughput", cfg.to_dict(), cfg.master_seed, workers,
                    ["tput.csv", "tput.json", "sinr.csv"], time.time() - t0)
    print(f"wrote {out / 'tput.csv'}")
    return EXIT_OK


def cmd_validate(args):
    cfg, workers = _resolve_config(args)
    print(json.dumps({"workers": workers, **cfg.to_dict()}, indent=2, sort_keys=True))
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="mblast",
        description="Uplink massive-MIMO detector simulations (BER, convergence, "
                    "complexity, throughput).",
    )
    parser.add_argument("--version", action="version", version=f"mblast {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_out=True):
        p.add_argument("--config", required=True, help="JSON experiment config")
        if needs_out:
            p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None,
                       help="master seed (overrides config; MBLAST_SEED is the fallback)")
        p.add_argument("--workers", type=int, default=0,
                       help="worker processes (0 = machine parallelism)")
        p.add_argument("--detectors", default="",
                       help="comma-separated detector labels to keep")
        p.add_argument("--grid-db", default="", help="comma-separated Eb/N0 grid override")

    p_ber = sub.add_parser("ber", help="BER vs Eb/N0 sweep (coded when configured)")
    common(p_ber)
    p_ber.set_defaults(handler=cmd_ber)

    p_conv = sub.add_parser("convergence", help="BER vs iteration count")
    common(p_conv)
    p_conv.add_argument("--at-db", type=float, default=None,
                        help="Eb/N0 operating point (default: middle of the grid)")
    p_conv.set_defaults(handler=cmd_convergence)

    p_cx = sub.add_parser("complexity", help="MAC formulas vs instrumented counters")
    p_cx.add_argument("--out", required=True)
    p_cx.add_argument("--table", default="",
                      help="semicolon-separated k,m,t columns (default: built-in table)")
    p_cx.add_argument("--measure", action=argparse.BooleanOptionalAction, default=True,
                      help="run instrumented detectors alongside the formulas")
    p_cx.add_argument("--measure-vblast-max-k", type=int, default=64,
                      help="skip instrumented V-BLAST above this K (quartic cost)")
    p_cx.set_defaults(handler=cmd_complexity)

    p_tp = sub.add_parser("throughput", help="percentile throughput gains vs SINR CDFs")
    common(p_tp)
    p_tp.add_argument("--cdf", action="append", required=True,
                      help="SINR CDF csv (sinr_db,cdf); repeatable")
    p_tp.add_argument("--percentiles", default="10,50,90")
    p_tp.add_argument("--snr-grid-db", default="",
                      help="input-SNR grid for the transfer curves (default: auto from CDFs)")
    p_tp.add_argument("--target", default="mblast", help="detector whose gains are reported")
    p_tp.add_argument("--floor-zero", action="store_true",
                      help="report negative gains as 0%%")
    p_tp.set_defaults(handler=cmd_throughput)

    p_val = sub.add_parser("validate", help="check a config without running")
    common(p_val, needs_out=False)
    p_val.set_defaults(handler=cmd_validate)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except (ConfigError, UnsupportedLoadError, CdfSupportError,
            json.JSONDecodeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
