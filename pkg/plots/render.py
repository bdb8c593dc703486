#!/usr/bin/env python3
"""Render figures from the simulation CLI's CSV artifacts.

Usage:
    python plots/render.py --kind ber_sweep  --in out/ber.csv  --out fig1.svg --logy --bound
    python plots/render.py --kind convergence --in out/conv.csv --out fig2.svg --logy
    python plots/render.py --kind coded      --in out/ber.csv  --out fig3.svg --logy
    python plots/render.py --kind throughput --in out/tput.csv --out tab2.svg

This script never recomputes statistics: every number it draws comes from
the CSV.  A schema mismatch aborts with the column diff and no output file.
"""

import argparse
import csv
import math
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

SCHEMAS = {
    "ber_sweep": ["detector", "eb_n0_db", "bits", "errors", "ber", "ci_low", "ci_high", "macs"],
    "coded": ["detector", "eb_n0_db", "bits", "errors", "ber", "ci_low", "ci_high", "macs"],
    "convergence": ["detector", "iteration", "bits", "errors", "ber", "ci_low", "ci_high"],
    "throughput": ["cdf_source", "percentile", "baseline", "gain_pct"],
}

MARKERS = ["o", "s", "^", "v", "D", "x", "+", "*"]


class SchemaError(ValueError):
    pass


def awgn_bpsk_ber(eb_n0_db):
    """Single-user non-fading BPSK reference: Q(sqrt(2 Eb/N0))."""
    gamma = 10.0 ** (eb_n0_db / 10.0)
    return 0.5 * math.erfc(math.sqrt(gamma))


def read_rows(path, kind):
    expected = SCHEMAS[kind]
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        got = reader.fieldnames or []
        if got != expected:
            missing = [c for c in expected if c not in got]
            extra = [c for c in got if c not in expected]
            raise SchemaError(
                f"{path}: column mismatch for kind '{kind}': "
                f"missing {missing}, unexpected {extra}"
            )
        rows = list(reader)
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    return rows


def _group(rows, key):
    grouped = {}
    for row in rows:
        grouped.setdefault(row[key], []).append(row)
    return grouped


def _whiskers(points, ber_key="ber"):
    ber = [float(p[ber_key]) for p in points]
    low = [max(b - float(p["ci_low"]), 0.0) for b, p in zip(ber, points)]
    high = [max(float(p["ci_high"]) - b, 0.0) for b, p in zip(ber, points)]
    return ber, [low, high]


def render_ber(rows, ax, logy, bound, xlabel, coded=False):
    for i, (det, pts) in enumerate(sorted(_group(rows, "detector").items())):
        pts.sort(key=lambda p: float(p["eb_n0_db"]))
        xs = [float(p["eb_n0_db"]) for p in pts]
        ber, err = _whiskers(pts)
        ax.errorbar(xs, ber, yerr=err, marker=MARKERS[i % len(MARKERS)],
                    capsize=3, label=det)
    if bound:
        xs = sorted({float(p["eb_n0_db"]) for p in rows})
        dense = [xs[0] + i * (xs[-1] - xs[0]) / 200.0 for i in range(201)] if len(xs) > 1 else xs
        ax.plot(dense, [awgn_bpsk_ber(x) for x in dense], "k--", linewidth=1,
                label="SISO-AWGN bound")
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel("coded BER" if coded else "BER")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()


def render_convergence(rows, ax, logy):
    for i, (det, pts) in enumerate(sorted(_group(rows, "detector").items())):
        pts.sort(key=lambda p: int(p["iteration"]))
        xs = [int(p["iteration"]) for p in pts]
        ber, err = _whiskers(pts)
        ax.errorbar(xs, ber, yerr=err, marker=MARKERS[i % len(MARKERS)],
                    capsize=3, label=det)
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel("iterations")
    ax.set_ylabel("BER")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()


def render_throughput(rows, ax):
    sources = sorted(_group(rows, "cdf_source"))
    baselines = sorted({r["baseline"] for r in rows})
    percentiles = sorted({int(r["percentile"]) for r in rows})
    width = 0.8 / len(baselines)
    labels = []
    positions = []
    base = 0.0
    lookup = {(r["cdf_source"], int(r["percentile"]), r["baseline"]): float(r["gain_pct"])
              for r in rows}
    for src in sources:
        for p in percentiles:
            for j, bl in enumerate(baselines):
                gain = lookup.get((src, p, bl))
                if gain is None:
                    continue
                ax.bar(base + j * width, gain, width=width,
                       color=f"C{j}", label=bl if (src == sources[0] and p == percentiles[0]) else None)
            labels.append(f"{src}\np{p}")
            positions.append(base + 0.4 - width / 2)
            base += 1.0
    ax.set_xticks(positions)
    ax.set_xticklabels(labels, fontsize=7)
    ax.set_ylabel("throughput gain [%]")
    ax.grid(True, axis="y", alpha=0.3)
    ax.legend(fontsize=8)


def render(kind, in_csv, out_img, logy=False, bound=False):
    """Render one figure; raises SchemaError on malformed input."""
    rows = read_rows(in_csv, kind)
    fig, ax = plt.subplots(figsize=(6.4, 4.4), constrained_layout=True)
    if kind in ("ber_sweep", "coded"):
        render_ber(rows, ax, logy, bound, "Eb/N0 [dB]", coded=(kind == "coded"))
    elif kind == "convergence":
        render_convergence(rows, ax, logy)
    else:
        render_throughput(rows, ax)
    fig.savefig(out_img)
    plt.close(fig)
    return out_img


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--kind", required=True, choices=sorted(SCHEMAS))
    parser.add_argument("--in", dest="in_csv", required=True, help="input CSV")
    parser.add_argument("--out", dest="out_img", required=True,
                        help="output image (.svg default, .png supported)")
    parser.add_argument("--logy", action="store_true", help="log-scale BER axis")
    parser.add_argument("--bound", action="store_true",
                        help="overlay the SISO-AWGN BPSK reference curve")
    args = parser.parse_args(argv)
    try:
        render(args.kind, args.in_csv, args.out_img, logy=args.logy, bound=args.bound)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 3
    print(f"wrote {args.out_img}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
