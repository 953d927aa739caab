"""The ``zs`` command line.

Exit codes: 0 success, 1 usage error, 2 numerical failure, 3 invariant failure.
Every option except --config may also come from a JSON config file whose keys
are the option names with dashes replaced by underscores; flags win.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import bloch, evolution, inverse, rhpdata, spectra, suites
from . import monodromy as mono
from . import potential as pot
from .config import Tolerances

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_INVARIANT = 0, 1, 2, 3

NUMERIC_ERRORS = (
    mono.IntegrationError, spectra.SpectralError, bloch.BlochError, rhpdata.RhpError,
    evolution.FlowError, inverse.TraceReconstructionError, inverse.TraceCalibrationError,
    FloatingPointError, np.linalg.LinAlgError,
)


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# deterministic text output

def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "NaN"
    if math.isinf(v):
        return "Infinity" if v > 0 else "-Infinity"
    return format(v, ".17g")


def dumps(obj, indent: int = 1, _level: int = 0) -> str:
    """JSON with every float at 17 significant digits and keys in insertion order."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if obj is None:
        return "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, (bool, np.bool_, int, np.integer, float, np.floating)):
        return fmt(obj)
    if isinstance(obj, complex):
        return dumps([obj.real, obj.imag], indent, _level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        if len(obj) == 0:
            return "[]"
        if all(isinstance(v, (int, float, np.integer, np.floating, bool)) or v is None for v in obj):
            return "[" + ", ".join(dumps(v) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + dumps(v, indent, _level + 1) for v in obj) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    return buf.getvalue()


def _write(args, name: str, text: str) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    path.write_text(text)
    print(path)
    return path


# ---------------------------------------------------------------------------
# inputs

PRESETS = ("zero", "plane-wave", "two-gap", "random")


def _potential(args) -> pot.PeriodicPotential:
    if args.potential and args.preset:
        raise UsageError("give either --potential or --preset, not both")
    if args.potential:
        try:
            return pot.load(args.potential)
        except FileNotFoundError:
            raise UsageError(f"no such potential file: {args.potential}") from None
        except (json.JSONDecodeError, pot.PotentialError) as exc:
            raise UsageError(f"bad potential file {args.potential}: {exc}") from None
    preset = args.preset or "two-gap"
    L = args.period
    if preset == "zero":
        return pot.zero(L)
    if preset == "plane-wave":
        return pot.constant(args.amplitude, args.phase, L)
    if preset == "two-gap":
        return pot.from_fourier([0, 0, 0.5, 0.25, 0], L)
    return pot.smooth_random(args.seed, L)


def _tol(args) -> Tolerances:
    try:
        return Tolerances(ode_tol=args.ode_tol, eps_gap=args.eps_gap, eps_sign=args.eps_sign,
                          eps_deriv=args.eps_deriv, eps_edge=args.eps_edge)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _window(args) -> tuple[float, float]:
    lo, hi = (float(v) for v in args.window)
    if not hi > lo:
        raise UsageError(f"window must satisfy lo < hi, got [{lo}, {hi}]")
    return lo, hi


def _threads(args) -> int:
    n = args.threads
    if n is None:
        env = os.environ.get("ZS_THREADS")
        try:
            n = int(env) if env else 1
        except ValueError:
            raise UsageError(f"ZS_THREADS must be an integer, got {env!r}") from None
    if n < 1:
        raise UsageError("thread count must be positive")
    return n


# ---------------------------------------------------------------------------
# commands

def _band_svg(p, band, data, zs, ds) -> str:
    from matplotlib import rcParams
    from matplotlib.backends.backend_svg import FigureCanvasSVG
    from matplotlib.figure import Figure

    rcParams["svg.hashsalt"] = "zs"
    fig = Figure(figsize=(8, 4))
    FigureCanvasSVG(fig)
    ax = fig.add_subplot()
    ax.axhspan(-1, 1, color="0.92", zorder=0)
    for E1, E2, _ in band.open_gaps:
        ax.axvspan(E1, E2, color="tab:orange", alpha=0.25, lw=0)
        ax.axvline(E1, color="tab:orange", lw=0.6)
        ax.axvline(E2, color="tab:orange", lw=0.6)
    ax.plot(zs, ds, color="tab:blue", lw=1)
    for g in data.gaps:
        ax.plot([g.gamma], [0.0], marker="x", color="k", ms=5)
    ax.set_ylim(-3, 3)
    ax.set_xlim(*band.window)
    ax.set_xlabel("z")
    ax.set_ylabel("Delta(z)")
    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None})
    return buf.getvalue()


def cmd_bands(args) -> int:
    p, tol, window = _potential(args), _tol(args), _window(args)
    band = spectra.main_spectrum(p, window, tol)
    data = spectra.spectral_data(p, window, 0.0, tol, band)
    zs = np.linspace(window[0], window[1], args.n_points)
    ds = mono.discriminant_grid(p, zs, tol.ode_tol, _threads(args)).real
    _write(args, "bands.json", dumps(band.to_json()) + "\n")
    _write(args, "delta.csv", csv_text(["z", "delta"], zip(zs, ds)))
    if not args.no_plot:
        _write(args, "bands.svg", _band_svg(p, band, data, zs, ds))
    return EXIT_OK


def cmd_spectral_data(args) -> int:
    p, tol, window = _potential(args), _tol(args), _window(args)
    data = spectra.spectral_data(p, window, args.x0, tol)
    _write(args, "spectral_data.json", dumps(data.to_json()) + "\n")
    return EXIT_OK


def _nodes(args, rhp) -> list:
    if args.nodes:
        try:
            return [(float(x), None if t is None else float(t), float(z)) for x, t, z in args.nodes]
        except (TypeError, ValueError):
            raise UsageError("nodes must be a list of [x, t or null, z] triples") from None
    pts = []
    for s in rhpdata.segments(rhp):
        a, b = s["a"], s["b"]
        if math.isinf(a):
            a = max(b - 1.0, rhp.window[0])
        if math.isinf(b):
            b = min(a + 1.0, rhp.window[1])
        if b - a > 4 * rhp.tol.eps_edge * (1 + abs(a) + abs(b)):
            pts.append(0.5 * (a + b))
    return [(args.x, args.t, z) for z in pts]


def cmd_rhp_export(args) -> int:
    p, tol, window = _potential(args), _tol(args), _window(args)
    data = spectra.spectral_data(p, window, args.x0, tol)
    rhp = rhpdata.build_rhp(p, data, args.truncation_j, tol, calibrate=not args.no_calibrate)
    out = rhpdata.export(rhp, _nodes(args, rhp))
    _write(args, "rhp.json", dumps(out) + "\n")
    return EXIT_OK


def cmd_reconstruct(args) -> int:
    p, tol, window = _potential(args), _tol(args), _window(args)
    conv = inverse.calibrate_trace_convention()
    rep = inverse.roundtrip_report(p, window, args.n_x, conv, tuple(args.r_values), tol, _threads(args))
    rows = [[x, qt.real, qt.imag, q.real, q.imag, abs(qt - q)] for x, qt, q in zip(rep.x, rep.q_trace, rep.q)]
    _write(args, "reconstruct.csv", csv_text(["x", "re_q_hat", "im_q_hat", "re_q", "im_q", "abs_error"], rows))
    meta = {"convention": {k: v for k, v in conv.to_json().items()},
            "trace_error": rep.trace_error, "bloch_error": rep.bloch_error,
            "open_gaps": rep.n_open_gaps, "R": list(rep.R)}
    _write(args, "reconstruct_meta.json", dumps(meta) + "\n")
    return EXIT_OK


def cmd_evolve(args) -> int:
    p, tol, window = _potential(args), _tol(args), _window(args)
    if args.dt <= 0 or args.t_end < 0:
        raise UsageError("need dt > 0 and t_end >= 0")
    band = spectra.main_spectrum(p, window, tol)
    probes = evolution.default_probes(window, args.n_probes)
    state = evolution.initial_state(p, band, probes, tol)
    ref = [d for _, d in state.probes]

    def drift(q):
        return max((abs(mono.discriminant(q, z, tol.ode_tol) - d) for z, d in zip(probes, ref)), default=0.0)

    times = [0.0]
    gammas = [[tr.gamma for tr in state.dirichlet_tracks]]
    sigmas = [[tr.sigma for tr in state.dirichlet_tracks]]
    drifts = [0.0]

    def log(t, q, mus, sig):
        times.append(t)
        gammas.append(list(mus))
        sigmas.append(list(sig))
        drifts.append(drift(q))

    every = max(1, args.log_every)
    final = evolution.dirichlet_flow(state, args.t_end, args.dt, args.n_modes, tol, every, log)
    if times[-1] != final.t:
        log(final.t, final.potential, [tr.gamma for tr in final.dirichlet_tracks],
            [tr.sigma for tr in final.dirichlet_tracks])
    header = ["t"]
    for k in range(len(state.dirichlet_tracks)):
        header += [f"gamma_{k}", f"sigma_{k}"]
    header.append("drift")
    _write(args, "flow.csv", csv_text(header, evolution.flow_csv_rows(times, gammas, sigmas, drifts)))
    return EXIT_OK


def cmd_verify(args) -> int:
    tol = _tol(args)
    if args.potential or args.preset:
        cases = [(args.preset or Path(args.potential).stem, _potential(args), _window(args))]
    else:
        cases = suites.standard_set()
    names = args.suites or list(suites.SUITES)
    unknown = [s for s in names if s not in suites.SUITES]
    if unknown:
        raise UsageError(f"unknown suites: {', '.join(unknown)}")
    results = []
    for label, p, window in cases:
        results += suites.run(p, window, tol, names, label)
    w = max(len(r.name) for r in results) if results else 10
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"{status}  {r.suite:10s} {r.name:<{w}s}  value={r.value:.3e}  limit={r.limit:.1e}  {r.detail}")
    n_fail = sum(not r.passed for r in results)
    print(f"{len(results) - n_fail}/{len(results)} checks passed")
    if args.report:
        rows = [[r.suite, r.name, fmt(r.value), fmt(r.limit), "pass" if r.passed else "fail", r.detail]
                for r in results]
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["suite", "check", "value", "limit", "status", "detail"])
        wr.writerows(rows)
        Path(args.report).write_text(buf.getvalue())
    return EXIT_OK if n_fail == 0 else EXIT_INVARIANT


# ---------------------------------------------------------------------------
# parser

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _common(sp: argparse.ArgumentParser) -> None:
    g = sp.add_argument_group("input")
    g.add_argument("--potential", help="potential JSON file")
    g.add_argument("--preset", choices=PRESETS, help="built-in potential (default two-gap)")
    g.add_argument("--period", type=float, default=1.0)
    g.add_argument("--amplitude", type=float, default=1.0, help="plane-wave amplitude")
    g.add_argument("--phase", type=float, default=0.75 * math.pi, help="plane-wave phase")
    g.add_argument("--seed", type=int, default=1, help="seed for the random preset")
    g.add_argument("--window", type=float, nargs=2, default=[-11.0, 11.0], metavar=("LO", "HI"))
    t = sp.add_argument_group("tolerances")
    t.add_argument("--ode-tol", type=float, default=1e-10)
    t.add_argument("--eps-gap", type=float, default=1e-8)
    t.add_argument("--eps-sign", type=float, default=1e-8)
    t.add_argument("--eps-deriv", type=float, default=1e-6)
    t.add_argument("--eps-edge", type=float, default=1e-6)
    sp.add_argument("--out-dir", default=".")
    sp.add_argument("--threads", type=int, default=None, help="worker count (fallback: ZS_THREADS)")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="zs", description="Periodic Zakharov-Shabat spectral toolkit")
    ap.add_argument("--config", help="JSON file of option defaults")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sp = sub.add_parser("bands", help="band structure, Delta table and plot")
    _common(sp)
    sp.add_argument("--n-points", type=int, default=801)
    sp.add_argument("--no-plot", action="store_true")
    sp.set_defaults(func=cmd_bands)

    sp = sub.add_parser("spectral-data", help="gap edges, Dirichlet eigenvalues and signs")
    _common(sp)
    sp.add_argument("--x0", type=float, default=0.0)
    sp.set_defaults(func=cmd_spectral_data)

    sp = sub.add_parser("rhp-export", help="jump segments and sampled jump matrices")
    _common(sp)
    sp.add_argument("--x0", type=float, default=0.0)
    sp.add_argument("--truncation-j", type=int, default=4096)
    sp.add_argument("--no-calibrate", action="store_true")
    sp.add_argument("--x", type=float, default=0.0, help="x for the default nodes")
    sp.add_argument("--t", type=float, default=None, help="t for the default nodes")
    sp.add_argument("--nodes", type=json.loads, default=None, help='JSON list of [x, t|null, z]')
    sp.set_defaults(func=cmd_rhp_export)

    sp = sub.add_parser("reconstruct", help="trace-formula and Bloch reconstruction of q")
    _common(sp)
    sp.add_argument("--n-x", type=int, default=16)
    sp.add_argument("--r-values", type=float, nargs="+", default=[20.0, 40.0, 80.0])
    sp.set_defaults(func=cmd_reconstruct)

    sp = sub.add_parser("evolve", help="NLS flow with Dirichlet tracks and Delta drift")
    _common(sp)
    sp.add_argument("--t-end", type=float, default=0.1)
    sp.add_argument("--dt", type=float, default=1e-4)
    sp.add_argument("--n-modes", type=int, default=256)
    sp.add_argument("--n-probes", type=int, default=20)
    sp.add_argument("--log-every", type=int, default=100)
    sp.set_defaults(func=cmd_evolve)

    sp = sub.add_parser("verify", help="run the invariant suites")
    _common(sp)
    sp.add_argument("--suites", nargs="+", default=None, help=f"subset of {', '.join(suites.SUITES)}")
    sp.add_argument("--report", default=None, help="CSV file for the result table")
    sp.set_defaults(func=cmd_verify)
    return ap


def _apply_config(ap: argparse.ArgumentParser, argv) -> None:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    try:
        cfg = json.loads(Path(known.config).read_text())
    except FileNotFoundError:
        raise UsageError(f"no such config file: {known.config}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"bad config file: {exc}") from None
    if not isinstance(cfg, dict):
        raise UsageError("config file must hold a JSON object")
    subs = next(a for a in ap._actions if isinstance(a, argparse._SubParsersAction))
    known_keys = set()
    for sp in subs.choices.values():
        dests = {a.dest for a in sp._actions} - {"help", "func"}
        known_keys |= dests
        sp.set_defaults(**{k: v for k, v in cfg.items() if k in dests})
    extra = set(cfg) - known_keys
    if extra:
        raise UsageError(f"unknown config keys: {', '.join(sorted(extra))}")


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    ap = build_parser()
    try:
        _apply_config(ap, argv)
        args = ap.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"zs: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        # library input validation, e.g. an unusable mode count
        print(f"zs: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NUMERIC_ERRORS as exc:
        print(f"zs: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
