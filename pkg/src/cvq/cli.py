"""Command line front end: ``cvq <experiment-id> [--key value]...``.

Runs a registered experiment and writes a deterministic CSV (plus an
optional dependency-free SVG line plot).  Exit codes: 0 success, 2 when
a precision warning fired during evaluation, 64 for usage errors or an
unknown experiment id.
"""

from __future__ import annotations

import argparse
import sys
import warnings

import numpy as np

from . import __version__
from .experiments import REGISTRY, list_experiments, run_experiment
from .numerics import PrecisionWarning

USAGE_ERROR = 64
PRECISION_EXIT = 2


def parse_config_file(path):
    """Flat ``key = value`` pairs, '#' comments; later keys win."""
    out = {}
    with open(path, "r", encoding="utf-8") as fh:
        for ln, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{ln}: expected 'key = value'")
            key, value = line.split("=", 1)
            out[key.strip()] = value.strip()
    return out


def _coerce(value):
    for cast in (int, float):
        try:
            return cast(value)
        except ValueError:
            continue
    return value


def write_csv(path, columns, meta, eid, profile, params):
    names = list(columns)
    arrays = [np.asarray(columns[n], dtype=float) for n in names]
    lines = [f"# cvq {__version__} experiment={eid} profile={profile}"]
    for key in sorted(params):
        lines.append(f"# {key} = {params[key]}")
    for key in sorted(meta):
        lines.append(f"# {key} = {meta[key]!r}")
    lines.append(",".join(names))
    for row in zip(*arrays):
        lines.append(",".join(f"{x:.17e}" for x in row))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_svg(path, columns, title):
    """Minimal polyline plot: first column is x, the rest are series."""
    names = list(columns)
    x = np.asarray(columns[names[0]], dtype=float)
    series = [(n, np.asarray(columns[n], dtype=float)) for n in names[1:]]
    width, height, margin = 640, 440, 55
    finite_y = np.concatenate([s[np.isfinite(s)] for _, s in series]) if series else np.zeros(1)
    if finite_y.size == 0:
        finite_y = np.zeros(1)
    y_lo, y_hi = float(np.min(finite_y)), float(np.max(finite_y))
    if y_hi == y_lo:
        y_hi = y_lo + 1.0
    x_lo, x_hi = float(np.min(x)), float(np.max(x))
    if x_hi == x_lo:
        x_hi = x_lo + 1.0

    def sx(v):
        return margin + (v - x_lo) / (x_hi - x_lo) * (width - 2 * margin)

    def sy(v):
        return height - margin - (v - y_lo) / (y_hi - y_lo) * (height - 2 * margin)

    palette = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width/2:.0f}" y="20" text-anchor="middle" font-size="14">{title}</text>',
        f'<line x1="{margin}" y1="{height-margin}" x2="{width-margin}" '
        f'y2="{height-margin}" stroke="black"/>',
        f'<line x1="{margin}" y1="{margin}" x2="{margin}" y2="{height-margin}" '
        'stroke="black"/>',
        f'<text x="{width/2:.0f}" y="{height-12}" text-anchor="middle" '
        f'font-size="12">{names[0]}</text>',
        f'<text x="{margin}" y="{margin-8}" font-size="12">[{y_lo:.3g}, {y_hi:.3g}]</text>',
    ]
    for i, (name, ys) in enumerate(series):
        pts = " ".join(
            f"{sx(xv):.2f},{sy(yv):.2f}"
            for xv, yv in zip(x, ys)
            if np.isfinite(yv)
        )
        color = palette[i % len(palette)]
        parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>'
        )
        parts.append(
            f'<text x="{width-margin+4}" y="{margin+14*i}" font-size="11" '
            f'fill="{color}">{name}</text>'
        )
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(parts) + "\n")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="cvq",
        description="Coherent-state discrimination and CV-QKD experiments",
    )
    parser.add_argument("experiment", help="experiment id, or 'list'")
    parser.add_argument("filter", nargs="?", default="",
                        help="substring filter for 'list'")
    parser.add_argument("--out", default=None, help="output CSV path")
    parser.add_argument("--svg", default=None, help="optional SVG plot path")
    parser.add_argument("--profile", choices=("fast", "paper"), default="paper")
    parser.add_argument("--config", default=None,
                        help="flat key=value config file (overridden by --key)")
    parser.add_argument("--key", action="append", default=[], metavar="K=V",
                        help="parameter override, repeatable")
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return USAGE_ERROR if exc.code not in (0, None) else 0

    if args.experiment == "list":
        for eid, desc in list_experiments(args.filter).items():
            print(f"{eid:26s} {desc}")
        return 0

    if args.experiment not in REGISTRY:
        print(f"cvq: unknown experiment {args.experiment!r} "
              f"(try 'cvq list')", file=sys.stderr)
        return USAGE_ERROR

    params = {}
    if args.config:
        try:
            params.update(parse_config_file(args.config))
        except (OSError, ValueError) as exc:
            print(f"cvq: {exc}", file=sys.stderr)
            return USAGE_ERROR
    for item in args.key:
        if "=" not in item:
            print(f"cvq: bad --key {item!r}, expected K=V", file=sys.stderr)
            return USAGE_ERROR
        key, value = item.split("=", 1)
        params[key.strip()] = value.strip()
    params = {k: _coerce(v) for k, v in params.items()}

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", PrecisionWarning)
        columns, meta = run_experiment(args.experiment, args.profile, params)
        precision_hits = [w for w in caught if issubclass(w.category, PrecisionWarning)]

    out = args.out or f"{args.experiment}.csv"
    write_csv(out, columns, meta, args.experiment, args.profile, params)
    print(f"wrote {out} ({len(next(iter(columns.values())))} rows)")
    if args.svg:
        write_svg(args.svg, columns, args.experiment)
        print(f"wrote {args.svg}")
    if precision_hits:
        print(f"cvq: {len(precision_hits)} precision warning(s)", file=sys.stderr)
        return PRECISION_EXIT
    return 0


if __name__ == "__main__":
    sys.exit(main())
