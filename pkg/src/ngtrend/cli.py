"""Command-line front end: ``ngtrend generate | fit | influence``.

Exit codes: 0 success, 2 usage or bad input, 3 numerical failure, 4 I/O.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import mle_fit as mf
from . import noise_models as nm
from . import svgplot
from .errors import InvalidParameter, InvalidSpec, NgTrendError, UndefinedAt, ZeroEvidence
from .ng_filter import BAND_LABELS, default_grid, posterior_bands, run_smoother, NgModel
from .synthetic import JumpSpec, generate

log = logging.getLogger("ngtrend")

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4

DEFAULTS = {
    "col": None,
    "presets": ["gaussian"],
    "models": [],
    "grid_span": 4.0,
    "grid_nodes": 800,
    "restarts": 3,
    "budget": 400,
    "seed": 0,
    "out_dir": ".",
}

GRID_HINT = "grid too narrow - widen with --grid-span"


class UsageError(Exception):
    pass


# --------------------------------------------------------------------------
# input / output helpers


def _is_number(text):
    try:
        float(text)
        return True
    except ValueError:
        return False


def read_series(path, col=None):
    """Read one numeric column from a CSV file (header optional).

    ``col`` is a header name or a 0-based index; by default the ``y``
    column is used when a header names one, otherwise the last column.
    """
    try:
        text = sys.stdin.read() if str(path) == "-" else Path(path).read_text()
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc}") from exc
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
    if not rows:
        raise UsageError(f"{path}: no data rows")
    header = None
    if not all(_is_number(c) for c in rows[0]):
        header = [c.strip() for c in rows[0]]
        rows = rows[1:]
    if col is None:
        idx = header.index("y") if header and "y" in header else len(rows[0]) - 1
    elif str(col).lstrip("-").isdigit():
        idx = int(col)
    elif header and col in header:
        idx = header.index(col)
    else:
        raise UsageError(f"{path}: no column {col!r}")
    try:
        y = np.array([float(r[idx]) for r in rows])
    except (ValueError, IndexError) as exc:
        raise UsageError(f"{path}: column {col if col is not None else idx} is not numeric") from exc
    if not np.all(np.isfinite(y)):
        raise UsageError(f"{path}: column contains non-finite values")
    return y


def _write(path, text):
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def bands_csv(bands):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", *BAND_LABELS])
    for i, row in enumerate(bands.values, start=1):
        w.writerow([i, *(f"{v:.9g}" for v in row)])
    return buf.getvalue()


def _parse_floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


# --------------------------------------------------------------------------
# model configuration


def _default_free(m):
    names = ["sigma2"]
    p = mf.model_params(m)
    for key in ("tau2", "tau", "alpha"):
        if key in p:
            names.append(key)
    return tuple(names)


def spec_from_json(obj, budget, restarts, seed):
    """Build a FitSpec from ``{"family", "params", "free"?, "sigma2"?, "name"?}``."""
    if isinstance(obj, str):
        try:
            obj = json.loads(obj)
        except json.JSONDecodeError as exc:
            raise UsageError(f"--model is not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise UsageError("a model must be a JSON object")
    try:
        model = nm.from_dict(obj)
        free = tuple(obj.get("free", _default_free(model)))
        return mf.FitSpec(model, free, sigma2=obj.get("sigma2"), name=obj.get("name", ""),
                          budget=budget, restarts=restarts, seed=seed)
    except (InvalidParameter, InvalidSpec, TypeError, ValueError) as exc:
        raise UsageError(f"bad model {json.dumps(obj, sort_keys=True)}: {exc}") from exc


def spec_from_preset(name, budget, restarts, seed):
    try:
        base = mf.preset(name)
    except InvalidSpec as exc:
        raise UsageError(str(exc)) from exc
    return mf.FitSpec(base.model, base.free, sigma2=base.sigma2, name=base.name,
                      budget=budget, restarts=restarts, seed=seed)


def effective_config(args):
    """Merge flags over the JSON config file over built-in defaults."""
    cfg = dict(DEFAULTS)
    if args.config:
        try:
            file_cfg = json.loads(Path(args.config).read_text())
        except json.JSONDecodeError as exc:
            raise UsageError(f"{args.config}: invalid JSON: {exc}") from exc
        if not isinstance(file_cfg, dict):
            raise UsageError(f"{args.config}: expected a JSON object")
        unknown = set(file_cfg) - set(DEFAULTS)
        if unknown:
            raise UsageError(f"{args.config}: unknown keys {sorted(unknown)}")
        if "presets" in file_cfg or "models" in file_cfg:
            cfg["presets"], cfg["models"] = [], []
        cfg.update(file_cfg)
    if args.preset or args.model:
        cfg["presets"] = list(args.preset or [])
        cfg["models"] = [json.loads(m) if _looks_json(m) else m for m in (args.model or [])]
    for key in ("col", "grid_span", "grid_nodes", "restarts", "budget", "seed", "out_dir"):
        value = getattr(args, key)
        if value is not None:
            cfg[key] = value
    return cfg


def _looks_json(text):
    try:
        json.loads(text)
        return True
    except json.JSONDecodeError:
        return False


# --------------------------------------------------------------------------
# commands


def cmd_generate(args):
    kw = {}
    if args.sigma2 is not None:
        kw["obs_sigma2"] = args.sigma2
    if args.seed is not None:
        kw["seed"] = args.seed
    try:
        if args.bounds or args.levels:
            n = args.n if args.n is not None else JumpSpec().n
            bounds = args.bounds or list(JumpSpec.scaled(n).segment_bounds)
            levels = args.levels or list(JumpSpec().segment_levels)
            spec = JumpSpec(n=n, segment_bounds=tuple(int(b) for b in bounds),
                            segment_levels=tuple(levels), **kw)
        else:
            spec = JumpSpec.scaled(args.n if args.n is not None else JumpSpec().n, **kw)
    except InvalidSpec as exc:
        raise UsageError(str(exc)) from exc
    series = generate(spec)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "y", "truth"])
    for i, (yv, tv) in enumerate(zip(series.y, series.truth), start=1):
        w.writerow([i, f"{yv:.17g}", f"{tv:.17g}"])
    meta = json.dumps(series.metadata, sort_keys=True)
    if args.out == "-":
        sys.stdout.write(buf.getvalue())
        print(meta, file=sys.stderr)
    else:
        _write(args.out, buf.getvalue())
        _write(str(args.out) + ".meta.json", meta + "\n")
    return EXIT_OK


def _trend_svg(y, bands, title):
    x = np.arange(1, y.size + 1)
    panel = svgplot.Panel(title=title, xlabel="n", ylabel="trend")
    panel.add(x, y, color="#bbbbbb", width=0.8)
    styles = {0: "2,2", 1: "4,2", 2: "", 3: "", 4: "", 5: "4,2", 6: "2,2"}
    for j, label in enumerate(BAND_LABELS):
        panel.add(x, bands.values[:, j], label=label,
                  color="#000000" if label == "p50" else "#1f77b4",
                  width=1.6 if label == "p50" else 0.9, dash=styles[j])
    return svgplot.render([panel])


def cmd_fit(args):
    cfg = effective_config(args)
    print("effective config: " + json.dumps(cfg, sort_keys=True), file=sys.stderr)
    y = read_series(args.input, cfg["col"])
    if y.size < 10:
        raise UsageError("need at least 10 observations")
    try:
        budget, restarts, seed = int(cfg["budget"]), int(cfg["restarts"]), int(cfg["seed"])
        specs = [spec_from_preset(p, budget, restarts, seed) for p in mf.expand_presets(cfg["presets"])]
        specs += [spec_from_json(m, budget, restarts, seed) for m in cfg["models"]]
        grid = default_grid(y, float(cfg["grid_span"]), int(cfg["grid_nodes"]))
    except (InvalidSpec, InvalidParameter, TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from exc
    if not specs:
        raise UsageError("no models requested; use --preset or --model")

    table = mf.compare(y, specs, grid)
    for r in table.rows:
        if r.ok and not r.converged:
            print(f"warning: {r.name} did not converge within {budget} evaluations per restart",
                  file=sys.stderr)
    best = next((r for r in table.rows if r.ok), None)
    if best is None:
        if any(r.error.startswith("ZeroEvidence") for r in table.rows):
            raise ZeroEvidence(GRID_HINT)
        raise NgTrendError("; ".join(f"{r.name}: {r.error}" for r in table.rows))

    run = run_smoother(y, NgModel(best.model, best.sigma2, grid))
    bands = posterior_bands(run.smoothed)

    out = Path(cfg["out_dir"])
    text = table.to_text()
    files = {
        out / "bands.csv": bands_csv(bands),
        out / "comparison.csv": table.to_csv(),
        out / "trend.svg": _trend_svg(y, bands, f"{best.name}: smoothed trend percentiles"),
    }
    for path, content in files.items():
        _write(path, content)
    sys.stdout.write(text)
    return EXIT_OK


def singular_points(m):
    """Locations where the influence function is undefined."""
    pts = []
    if isinstance(m, nm.GeneralizedLaplace) and m.b <= 1:
        pts.append(0.0)
    if isinstance(m, nm.Mixture):
        w, loc = nm.atom_mass(m)
        if w > 0:
            pts.append(loc)
    return pts


def influence_curve(m, x):
    """Influence values at ``x`` with NaN where undefined, and NaN breaks
    inserted between samples that straddle a singular point."""
    vals = np.empty(x.size)
    for i, xi in enumerate(x):
        try:
            vals[i] = nm.influence(m, float(xi))
        except UndefinedAt:
            vals[i] = np.nan
    return _insert_breaks(x, vals, singular_points(m))


def _insert_breaks(x, v, points):
    xs, vs = list(x), list(v)
    for p in sorted(points, reverse=True):
        k = int(np.searchsorted(x, p))
        if 0 < k < x.size and x[k - 1] < p < x[k]:
            xs.insert(k, p)
            vs.insert(k, np.nan)
    return np.array(xs), np.array(vs)


def _display_model(m, tau2, tau):
    p = mf.model_params(m)
    upd = {}
    if "tau2" in p:
        upd["tau2"] = tau2
    if "tau" in p:
        upd["tau"] = tau
    return mf.with_params(m, upd)


def cmd_influence(args):
    if not args.xmax > args.xmin:
        raise UsageError("--xmax must exceed --xmin")
    models = []
    try:
        for p in args.preset or []:
            base = mf.preset(p)
            models.append((base.name, _display_model(base.model, args.tau2, args.tau)))
        for text in args.model or []:
            m = nm.from_json(text)
            models.append((mf.default_name(m), m))
    except (InvalidSpec, InvalidParameter, json.JSONDecodeError) as exc:
        raise UsageError(str(exc)) from exc
    if not models:
        raise UsageError("no models requested; use --preset or --model")

    x = np.linspace(args.xmin, args.xmax, args.points)
    dens = svgplot.Panel(title="density", xlabel="x", ylabel="p(x)")
    infl = svgplot.Panel(title="influence function", xlabel="x", ylabel="-d log p(x)/dx")
    for i, (name, m) in enumerate(models):
        color = svgplot.PALETTE[i % len(svgplot.PALETTE)]
        dens.add(x, nm.density(m, x), label=name, color=color, width=1.4)
        w, loc = nm.atom_mass(m)
        if w > 0:
            dens.vlines.append((loc, color, f"atom {w:g}"))
        xi, vi = influence_curve(m, x)
        infl.add(xi, vi, label=name, color=color, width=1.4)
    finite = np.concatenate([s.y[np.isfinite(s.y)] for s in infl.series])
    if finite.size:
        lim = float(np.max(np.abs(finite)))
        lim = min(lim, args.clip) if args.clip else lim
        infl.ylim = (-1.05 * lim, 1.05 * lim) if lim > 0 else (-1.0, 1.0)
    _write(args.out, svgplot.render([dens, infl]))
    return EXIT_OK


# --------------------------------------------------------------------------
# entry point


def build_parser():
    p = argparse.ArgumentParser(prog="ngtrend", description="Non-Gaussian trend estimation.")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic three-jump series as CSV")
    g.add_argument("--n", type=int, default=None, help="series length (default 500)")
    g.add_argument("--seed", type=int, default=None, help="RNG seed (default 42)")
    g.add_argument("--sigma2", type=float, default=None, help="observation noise variance")
    g.add_argument("--bounds", type=_parse_floats, default=None,
                   help="comma-separated 1-based segment bounds, first 1 and last n")
    g.add_argument("--levels", type=_parse_floats, default=None,
                   help="comma-separated segment levels")
    g.add_argument("--out", default="-", help="output CSV path (default stdout)")
    g.set_defaults(func=cmd_generate)

    f = sub.add_parser("fit", help="fit trend models, write bands, plot and comparison table")
    f.add_argument("input", help="CSV file, or - for stdin")
    f.add_argument("--col", default=None, help="value column name or 0-based index")
    f.add_argument("--preset", action="append", default=None,
                   help="model preset, repeatable (gaussian, cauchy, laplace, pearson-b:B, "
                        "pearson, glaplace-b:B, glaplace, gauss-gauss, gauss-unif, delta-unif, "
                        "delta-gauss, all, full)")
    f.add_argument("--model", action="append", default=None,
                   help='model JSON, repeatable, e.g. {"family": "pearson", "params": '
                        '{"b": 0.75, "tau2": 1e-4}, "free": ["sigma2", "tau2"]}')
    f.add_argument("--config", default=None, help="JSON config file (overridden by flags)")
    f.add_argument("--grid-span", dest="grid_span", type=float, default=None,
                   help="grid margin in standard deviations of y (default 4)")
    f.add_argument("--grid-nodes", dest="grid_nodes", type=int, default=None,
                   help="grid node count (default 800)")
    f.add_argument("--restarts", type=int, default=None, help="optimizer restarts (default 3)")
    f.add_argument("--budget", type=int, default=None,
                   help="objective evaluations per restart (default 400)")
    f.add_argument("--seed", type=int, default=None, help="restart jitter seed (default 0)")
    f.add_argument("--out-dir", dest="out_dir", default=None, help="output directory (default .)")
    f.set_defaults(func=cmd_fit)

    i = sub.add_parser("influence", help="plot densities and influence functions")
    i.add_argument("--preset", action="append", default=None, help="model preset, repeatable")
    i.add_argument("--model", action="append", default=None, help="model JSON, repeatable")
    i.add_argument("--tau2", type=float, default=1.0, help="dispersion tau2 for presets")
    i.add_argument("--tau", type=float, default=1.0, help="dispersion tau for presets")
    i.add_argument("--xmin", type=float, default=-4.0)
    i.add_argument("--xmax", type=float, default=4.0)
    i.add_argument("--points", type=int, default=512)
    i.add_argument("--clip", type=float, default=None, help="clip the influence axis at +-CLIP")
    i.add_argument("--out", required=True, help="output SVG path")
    i.set_defaults(func=cmd_influence)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"ngtrend: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ZeroEvidence as exc:
        msg = str(exc)
        print(f"ngtrend: {msg if msg == GRID_HINT else GRID_HINT + ' (' + msg + ')'}", file=sys.stderr)
        return EXIT_NUMERIC
    except (NgTrendError, ArithmeticError) as exc:
        print(f"ngtrend: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"ngtrend: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
