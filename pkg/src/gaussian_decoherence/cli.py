"""Command-line front end.

    gaussdeco analyze  --scenario pq
    gaussdeco simulate --scenario free_particle --cat z1=0,1 z2=0,-1 --out decay.csv
    gaussdeco check    --scenario damped_oscillator --t-max 5 --steps 50
    gaussdeco scenario --scenario chain --params frequencies=1:1:1,delta=1,noise_site=2 --out chain.json
    gaussdeco wigner   --scenario free_particle --cat z1=0,2 z2=0,-2 --times 0,0.125 --out field

Exit codes: 0 success, 1 runtime or integrity failure, 2 invalid input.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import model as mdl
from .decoherence import (DEFAULT_WINDOW, decay_series, default_t_grid, fit_exponent, predict,
                          prediction_report, write_decay_csv)
from .errors import (ConvergenceError, FlowRangeError, IntegrityError, ModelError,
                     UnsupportedStructureError)
from .hormander import DEFAULT_TOL, chain_order_map, filtration
from .propagation import (CP_TOL, GaussianChannel, GridSpec, QuadraticIntegratorConfig, cat_state_terms,
                          compose, cp_min_eig, diffusion, flow, timeseries_header, wigner_field, write_field)

EXIT_OK, EXIT_RUNTIME, EXIT_INPUT = 0, 1, 2
SEMIGROUP_TOL = 1e-8


class InputError(Exception):
    pass


# -- scenario parsing ------------------------------------------------------------------------

SCENARIOS = {
    "free_particle": {"m": 1.0, "Lambda": 1.0},
    "quadratic_potential": {"m": 1.0, "omega0": 1.0, "Lambda": 1.0},
    "damped_oscillator": {"gamma": 1.0, "omega": 1.0, "nbar": 0.5},
    "pq": {"lambda": 1.0, "Lambda": 1.0},
    "chain": {"frequencies": "1:1:1", "delta": 1.0, "noise_site": 1, "gamma": 1.0, "nbar": 0.5},
}


def parse_params(text: str | None) -> dict[str, str]:
    params: dict[str, str] = {}
    if not text:
        return params
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise InputError(f"malformed parameter {item!r}; expected key=value")
        params[key.strip()] = value.strip()
    return params


def _float(params, key, default) -> float:
    raw = params.get(key, default)
    try:
        return float(raw)
    except (TypeError, ValueError):
        raise InputError(f"parameter {key!r} must be a number, got {raw!r}") from None


def build_scenario(name: str, params: dict[str, str], hbar: float = 1.0) -> mdl.SystemModel:
    if name not in SCENARIOS:
        raise InputError(f"unknown scenario {name!r}; choose from {', '.join(SCENARIOS)}")
    defaults = SCENARIOS[name]
    unknown = set(params) - set(defaults) - ({"n", "omega"} if name == "chain" else set())
    if unknown:
        raise InputError(f"unknown parameter(s) for {name}: {', '.join(sorted(unknown))}")
    p = {k: params.get(k, v) for k, v in defaults.items()}
    if name == "free_particle":
        return mdl.scenario_free_particle(_float(p, "m", 1), _float(p, "Lambda", 1), hbar)
    if name == "quadratic_potential":
        return mdl.scenario_quadratic_potential(_float(p, "m", 1), _float(p, "omega0", 1), _float(p, "Lambda", 1), hbar)
    if name == "damped_oscillator":
        return mdl.scenario_damped_oscillator(_float(p, "gamma", 1), _float(p, "omega", 1), _float(p, "nbar", 0.5), hbar)
    if name == "pq":
        return mdl.scenario_pq(_float(p, "lambda", 1), _float(p, "Lambda", 1), hbar)
    # chain: explicit frequencies, or n copies of omega
    if "n" in params:
        n = int(_float(params, "n", 3))
        freqs = [_float(params, "omega", 1.0)] * n
    else:
        try:
            freqs = [float(x) for x in str(p["frequencies"]).split(":")]
        except ValueError:
            raise InputError(f"frequencies must be ':'-separated numbers, got {p['frequencies']!r}") from None
    site = _float(p, "noise_site", 1)
    if site != int(site):
        raise InputError(f"noise_site must be an integer, got {p['noise_site']!r}")
    Delta = mdl.nearest_neighbour(len(freqs), _float(p, "delta", 1.0))
    return mdl.scenario_chain(freqs, Delta, int(site), _float(p, "gamma", 1), _float(p, "nbar", 0.5), hbar)


def resolve_model(args) -> mdl.SystemModel:
    if bool(args.model) == bool(args.scenario):
        raise InputError("supply exactly one of --model or --scenario")
    if args.model:
        try:
            model = mdl.load_model(args.model)
        except FileNotFoundError:
            raise InputError(f"model file not found: {args.model}") from None
    else:
        model = build_scenario(args.scenario, parse_params(args.params))
    if args.hbar is not None:
        model = model.with_hbar(args.hbar)
    return model


def parse_cat(tokens, dim: int) -> tuple[np.ndarray, np.ndarray]:
    if not tokens:
        raise InputError("--cat z1=... z2=... is required")
    found = {}
    for tok in tokens:
        key, sep, value = tok.partition("=")
        if key not in ("z1", "z2") or not sep:
            raise InputError(f"malformed --cat entry {tok!r}; expected z1=p,q[,...] z2=p,q[,...]")
        try:
            vec = np.array([float(x) for x in value.split(",")])
        except ValueError:
            raise InputError(f"non-numeric --cat entry {tok!r}") from None
        if vec.size != dim:
            raise InputError(f"{key} needs {dim} coordinates, got {vec.size}")
        found[key] = vec
    if set(found) != {"z1", "z2"}:
        raise InputError("--cat needs both z1 and z2")
    return found["z1"], found["z2"]


def _floats(text: str, name: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise InputError(f"{name} must be comma-separated numbers, got {text!r}") from None


# -- output ------------------------------------------------------------------------------------

def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _json(obj) -> str:
    return json.dumps(obj, indent=2, default=_json_default) + "\n"


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o).__name__)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([format(v, ".17g") if isinstance(v, float) else v for v in row])
    return buf.getvalue()


# -- commands --------------------------------------------------------------------------------------

def cmd_analyze(args) -> int:
    model = resolve_model(args)
    filt = filtration(model, args.tol)
    report = filt.report()
    try:
        report["mode_orders"] = [
            {"mode": m.mode, "order": m.order, "fully_reached": m.fully_reached, "weights": list(m.weights)}
            for m in chain_order_map(model, filt)
        ]
    except UnsupportedStructureError:
        report["mode_orders"] = None
    if args.format == "csv":
        rows = []
        labels = [f"W_{k}" for k in range(len(filt.W_blocks))] + ["W_DF"]
        for label, B in zip(labels, [*filt.W_blocks, filt.W_DF]):
            for i, v in enumerate(B.T):
                rows.append([label, i, *[float(x) for x in v]])
        _emit(_csv(["block", "index", *[f"x{i}" for i in range(model.dim)]], rows), args.out)
    else:
        _emit(_json(report), args.out)
    return EXIT_OK


def cmd_simulate(args) -> int:
    model = resolve_model(args)
    z1, z2 = parse_cat(args.cat, model.dim)
    cat = mdl.CatCoherence(z1, z2)
    window = tuple(_floats(args.fit_window, "--fit-window")) if args.fit_window else DEFAULT_WINDOW
    if len(window) != 2:
        raise InputError("--fit-window needs two numbers lo,hi")
    t_max = args.t_max if args.t_max is not None else window[1]
    if not t_max > 0 or args.steps < 2:
        raise InputError("--t-max must be positive and --steps >= 2")
    grid = default_t_grid(t_max, args.steps, window)
    series = decay_series(model, cat, grid)
    filt = filtration(model, args.tol)
    pred = predict(model, filt, cat)
    fit = None
    if window[1] <= t_max:
        fit = fit_exponent(series, window)
    report = prediction_report(pred, fit)
    report["dz"] = cat.dz.tolist()
    report["window"] = list(window)
    if args.format == "csv":
        if args.out:
            write_decay_csv(args.out, series)
            Path(args.out).with_suffix(".report.json").write_text(_json(report))
        else:
            _emit(_csv(["t", "hs_norm", "neg2hbar_log"], series.rows()), None)
    else:
        _emit(_json(report), args.out)
    return EXIT_OK


def cmd_check(args) -> int:
    model = resolve_model(args)
    t_max = args.t_max if args.t_max is not None else 5.0
    if not t_max > 0 or args.steps < 2:
        raise InputError("--t-max must be positive and --steps >= 2")
    cfg = QuadraticIntegratorConfig()
    tol = args.tol if args.tol is not None else CP_TOL
    ts = np.linspace(0.0, t_max, args.steps + 1)
    channels = [GaussianChannel(flow(model, t), diffusion(model, t, cfg), model.hbar) for t in ts]
    cp = [cp_min_eig(ch) for ch in channels]
    semigroup = [0.0]
    for i in range(1, len(ts)):
        dt = ts[i] - ts[i - 1]
        step = GaussianChannel(flow(model, dt), diffusion(model, dt, cfg), model.hbar)
        joined = compose(step, channels[i - 1])
        semigroup.append(float(max(np.max(np.abs(joined.D - channels[i].D)), np.max(np.abs(joined.R - channels[i].R)))))
    cp_ok = min(cp) >= -tol
    sg_ok = max(semigroup) <= SEMIGROUP_TOL
    if args.format == "csv":
        rows = [[float(t), *ch.D.ravel().tolist(), float(np.linalg.eigvalsh(ch.D)[0]), c]
                for t, ch, c in zip(ts, channels, cp)]
        _emit(_csv(timeseries_header(model.dim), rows), args.out)
    else:
        _emit(_json({"t": ts.tolist(), "cp_min_eig": cp, "semigroup_residual": semigroup, "cp_tol": tol,
                     "semigroup_tol": SEMIGROUP_TOL, "cp_ok": cp_ok, "semigroup_ok": sg_ok,
                     "passed": cp_ok and sg_ok}), args.out)
    status = "PASS" if cp_ok and sg_ok else "FAIL"
    print(f"check {status}: min cp eigenvalue {min(cp):.3e} (tol {tol:g}), "
          f"max semigroup residual {max(semigroup):.3e} (tol {SEMIGROUP_TOL:g})", file=sys.stderr)
    return EXIT_OK if cp_ok and sg_ok else EXIT_RUNTIME


def cmd_scenario(args) -> int:
    if args.model:
        raise InputError("scenario builds a model; use --scenario, not --model")
    model = resolve_model(args)
    _emit(mdl.dumps_model(model), args.out)
    return EXIT_OK


def cmd_wigner(args) -> int:
    model = resolve_model(args)
    if model.n != 1:
        raise InputError("wigner renders single-mode models only (n = 1)")
    if not args.out:
        raise InputError("wigner writes field files; --out BASE is required")
    z1, z2 = parse_cat(args.cat, model.dim)
    if args.state == "cat":
        state = cat_state_terms(z1, z2)
    else:
        state = mdl.CatCoherence(z1, z2)
    times = _floats(args.times, "--times") if args.times else [0.0, args.t_max if args.t_max is not None else 1.0]
    if any(t < 0 for t in times):
        raise InputError("--times must be nonnegative")
    half = args.grid_half_width or (max(np.max(np.abs(z1)), np.max(np.abs(z2))) + 6.0 * math.sqrt(model.hbar))
    grid = GridSpec.square(2, half, args.grid_points)
    alias_tol = args.tol if args.tol is not None else 1e-8
    fmt = "csv" if args.format == "csv" else "bin"
    base = Path(args.out)
    for i, t in enumerate(times):
        field = wigner_field(model, state, t, grid, alias_tol=alias_tol)
        write_field(base.with_name(f"{base.name}_t{i}"), field, fmt)
    return EXIT_OK


# -- parser ------------------------------------------------------------------------------------------

def _common(p: argparse.ArgumentParser, tol_help: str) -> None:
    src = p.add_argument_group("model source")
    src.add_argument("--model", metavar="PATH", help="model file (JSON)")
    src.add_argument("--scenario", choices=sorted(SCENARIOS), help="built-in scenario")
    src.add_argument("--params", metavar="k=v,...", help="scenario parameters")
    p.add_argument("--hbar", type=float, help="override hbar")
    p.add_argument("--tol", type=float, help=tol_help)
    p.add_argument("--t-max", type=float, dest="t_max")
    p.add_argument("--steps", type=int, default=50)
    p.add_argument("--cat", nargs=2, metavar=("z1=p,q", "z2=p,q"))
    p.add_argument("--out", metavar="PATH")
    p.add_argument("--format", choices=("csv", "report"), default="report")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gaussdeco", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="Hormander filtration and decoherence-free subspace")
    _common(p, f"rank tolerance (default {DEFAULT_TOL:g})")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("simulate", help="HS-norm decay of a cat coherence and exponent fit")
    _common(p, f"rank tolerance for the prediction (default {DEFAULT_TOL:g})")
    p.add_argument("--fit-window", metavar="lo,hi", help="fit window (default 1e-3,1e-2)")
    p.set_defaults(func=cmd_simulate, format="csv")

    p = sub.add_parser("check", help="complete-positivity and semigroup certification")
    _common(p, f"allowed negativity of the CP certificate (default {CP_TOL:g})")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("scenario", help="write a built-in scenario as a model file")
    _common(p, "unused")
    p.set_defaults(func=cmd_scenario)

    p = sub.add_parser("wigner", help="Wigner field of a cat state on a grid (n = 1)")
    _common(p, "aliasing-guard threshold (default 1e-8)")
    p.add_argument("--times", metavar="t0,t1,...")
    p.add_argument("--state", choices=("cat", "offdiag"), default="cat")
    p.add_argument("--grid-half-width", type=float)
    p.add_argument("--grid-points", type=int, default=128)
    p.set_defaults(func=cmd_wigner)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command in ("analyze", "simulate") and args.tol is None:
        args.tol = DEFAULT_TOL
    try:
        return args.func(args)
    except (InputError, ModelError, UnsupportedStructureError, ValueError) as exc:
        print(f"gaussdeco {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (IntegrityError, ConvergenceError, FlowRangeError, OSError) as exc:
        print(f"gaussdeco {args.command}: failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
