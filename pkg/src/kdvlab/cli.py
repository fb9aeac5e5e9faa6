"""Command-line front end: ``kdvlab COMMAND [--config PATH] [flags]``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 I/O error. Failures print a JSON object to stderr and, when the output
directory is writable, also leave it in ``error.json``.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time

import numpy as np

from . import __version__
from .config import COMMANDS, auto_dt, build_config, load_config
from .errors import ConfigError, KdvLabError, NumericFailure
from .normal_form import (DEFAULT_COUPLING, KDV_COUPLING, check_cubic_identity, decompose,
                          j_cancellation_residual, t_cancellation_residual)
from .reports import ArtifactWriter, csv_text, dumps, svg_line_plot
from .solver import SolverConfig, conserved_quantities, evolve
from .spectral import (FourierField, MultiplierSymbol, apply_multiplier, normalized,
                       random_rough_field, sobolev_norm)

_TWO_PI_SQRT = math.sqrt(2.0 * math.pi)


# -- helpers -------------------------------------------------------------------------

def make_data(rc, n):
    """Initial datum described by the ``data`` section at size ``n``.

    ``l2`` (if set) is the target physical ``L^2`` norm ``||u||_{L^2(T)}``.
    """
    d = rc.sections["data"]
    kind = d["kind"]
    if kind == "zero":
        u0 = FourierField.zeros(n)
    elif kind == "rough":
        u0 = random_rough_field(n, rc.params, rc.seed, float(d["amplitude"]))
    elif kind == "modes":
        half = np.zeros(n + 1, dtype=complex)
        for key, val in d["modes"].items():
            xi = int(key)
            if not 1 <= xi <= n:
                raise ConfigError(f"data.modes key {key!r} must lie in 1..{n}")
            half[xi] = complex(*val) if isinstance(val, (list, tuple)) else complex(val)
        u0 = FourierField.from_half(half, is_mean_zero=True)
    else:
        raise ConfigError(f"unknown data.kind {kind!r}; expected rough, zero or modes")
    if d["l2"] is not None:
        u0 = normalized(u0, 0.0, float(d["l2"]) / _TWO_PI_SQRT)
    return u0


def _solver_config(rc, u0, n=None, integrator=None):
    """Resolve ``dt`` and ``sample_stride`` and write them back into the echo."""
    sv = rc.sections["solver"]
    n = int(sv["n"]) if n is None else n
    integ = integrator or sv["integrator"]
    t_end = float(sv["t_end"])
    probe = SolverConfig(n, t_end, t_end, 1, integ, float(sv["c_cfl"]))
    dt = sv["dt"]
    if dt is None:
        dt = auto_dt(t_end, probe.cfl_limit(u0), float(sv["cfl_fraction"]))
    steps = int(round(t_end / dt))
    stride = sv["sample_stride"]
    if stride is None:
        stride = max(1, steps // max(1, int(sv["samples"])))
        while steps % stride:
            stride -= 1
    sv["dt"], sv["sample_stride"] = float(dt), int(stride)
    return SolverConfig(n, float(dt), t_end, int(stride), integ, float(sv["c_cfl"]))


def _config_line(rc):
    return "# kdvlab " + __version__ + " config=" + json.dumps(rc.effective(), sort_keys=True,
                                                                separators=(",", ":"))


class _Out:
    """Artifact writer that stamps the effective config on every file."""

    def __init__(self, rc):
        self.rc = rc
        self.w = ArtifactWriter(rc.out_dir, rc.formats)

    def json(self, name, obj):
        self.w.json(name, {"config": self.rc.effective(), "version": __version__, **obj})

    def csv(self, name, header, rows):
        self.w.csv_raw(name, _config_line(self.rc) + "\n" + csv_text(header, rows))

    def svg(self, name, series, **kw):
        if "svg" in self.w.formats:
            text = svg_line_plot(series, **kw)
            desc = "<desc>" + json.dumps(self.rc.effective(), sort_keys=True) \
                .replace("&", "&amp;").replace("<", "&lt;") + "</desc>\n"
            head, rest = text.split("\n", 1)
            self.w._write(name, head + "\n" + desc + rest)

    @property
    def written(self):
        return self.w.written


# -- commands ------------------------------------------------------------------------

def cmd_simulate(rc, out):
    n = int(rc.sections["solver"]["n"])
    u0 = make_data(rc, n)
    cfg = _solver_config(rc, u0)
    traj = evolve(u0, cfg)
    q = [conserved_quantities(f) for f in traj.fields]
    rows = [(float(t), c["mean"], c["l2"], c["hamiltonian"]) for t, c in zip(traj.times, q)]
    out.csv("conserved.csv", ["t", "mean", "l2", "hamiltonian"], rows)

    def drift(key):
        ref = q[0][key]
        d = max(abs(c[key] - ref) for c in q)
        return d / abs(ref) if ref != 0 else d

    out.json("trajectory.json", {"trajectory": traj.to_dict()})
    out.json("summary.json", {"drift": {k: drift(k) for k in ("mean", "l2", "hamiltonian")},
                              "steps": cfg.n_steps})
    ts = [r[0] for r in rows]
    out.svg("conserved.svg", {"l2": (ts, [r[2] for r in rows]),
                              "hamiltonian": (ts, [r[3] for r in rows])},
            title="conserved quantities", xlabel="t", ylabel="value")


def cmd_decompose(rc, out):
    s = rc.params.s
    sec = rc.sections["decompose"]
    coupling = KDV_COUPLING if sec["coupling"] is None else float(sec["coupling"])
    sec["coupling"] = coupling
    n = int(rc.sections["solver"]["n"])
    u0 = make_data(rc, n)
    cfg = _solver_config(rc, u0)
    traj = evolve(u0, cfg)
    down = MultiplierSymbol.bessel(-s)
    v_traj = traj.map(lambda u: apply_multiplier(u, down))
    dec = decompose(v_traj, v_traj.fields[0], s, sec["method"], coupling)
    rows = []
    for i, t in enumerate(dec.times):
        v = v_traj.fields[i]
        rows.append((float(t), sobolev_norm(dec.r_part[i], 0.0), sobolev_norm(dec.h_part[i], 0.0),
                     sobolev_norm(dec.k_part[i], 0.0), sobolev_norm(dec.w_part[i], 0.0),
                     sobolev_norm(dec.w_part[i], 1.0),
                     sobolev_norm(dec.reconstruct(i) - v, 0.0)))
    out.csv("decomposition.csv", ["t", "r_l2", "h_l2", "k_l2", "w_l2", "w_h1",
                                  "reconstruction_error"], rows)
    out.json("decomposition.json", {"w0_defect": dec.w0_defect, "coupling": coupling,
                                    "max_reconstruction_error": max(r[6] for r in rows)})
    ts = [r[0] for r in rows]
    out.svg("decomposition.svg", {name: (ts, [r[k] for r in rows]) for k, name in
                                  ((1, "R"), (2, "h"), (3, "k"), (4, "w"))},
            title="decomposition parts (L2)", xlabel="t", ylabel="norm")


def cmd_smoothing(rc, out):
    from .smoothing import refinement_study, residual_report

    sec = rc.sections["smoothing"]
    s = rc.params.s
    ns = [int(x) for x in sec["ns"]]
    sigma = -s + 0.9 if sec["sigma"] is None else float(sec["sigma"])
    sec["sigma"] = sigma
    coupling = KDV_COUPLING if sec["coupling"] is None else float(sec["coupling"])
    sec["coupling"] = coupling
    amp = float(rc.sections["data"]["amplitude"])
    if rc.sections["data"]["kind"] != "rough":
        raise ConfigError("smoothing-scan needs data.kind = rough (nested refinements)")
    big = random_rough_field(ns[-1], rc.params, rc.seed, amp)
    cfg = _solver_config(rc, big, n=ns[-1], integrator=sec["integrator"])
    study = refinement_study(rc.params, rc.seed, ns, cfg, sigma, coupling, amplitude=amp)
    rows = []
    for n, a, b in zip(ns, study["unshifted"], study["shifted"]):
        rows.append(("refinement:unshifted", cfg.t_end, sigma, n, a))
        rows.append(("refinement:shifted", cfg.t_end, sigma, n, b))
    rep = residual_report(big, rc.params, cfg, sec["sigma_grid"], coupling)
    rows.extend(rep.rows("residual"))
    out.csv("smoothing.csv", ["experiment", "t", "sigma", "N", "value"], rows)
    out.json("smoothing.json", {"refinement": study, "residual": rep.summary()})
    out.svg("smoothing.svg", {"unshifted": (ns, study["unshifted"]),
                              "shifted": (ns, study["shifted"])},
            title="residual norms at t_end", xlabel="N", ylabel="H^sigma norm",
            logx=True, logy=True)


def cmd_multiplier(rc, out):
    from .multipliers import Kind, MultiplierSpec, doubling_growth, growth_trend, scan

    sec = rc.sections["multiplier"]
    p = rc.params
    names = sec["kinds"] or [k.value for k in Kind]
    try:
        kinds = [Kind(x) for x in names]
    except ValueError as exc:
        raise ConfigError(f"unknown multiplier kind: {exc}") from None
    ns = sorted(int(x) for x in sec["ns"])
    rows, summary, series = [], {}, {}
    for kind in kinds:
        spec = MultiplierSpec(kind, p.s, p.delta, p.gamma, float(sec["eps"]))
        res = [scan(spec, n) for n in ns]
        rows.extend(r.csv_row() for r in res)
        entry = {"spec": spec.to_dict(), "sups": [r.sup_value for r in res],
                 "argmax": [list(r.argmax) for r in res],
                 "doubling_growth": doubling_growth(res)}
        entry["growth_exponent"] = growth_trend(spec, ns, res) if len(ns) >= 3 else None
        summary[spec.name] = entry
        series[spec.name] = (ns, entry["sups"])
    out.csv("multipliers.csv", ["spec", "N", "sup", "argmax_xi1", "argmax_xi2", "argmax_xi3",
                                "evals", "wall_ms"], rows)
    out.json("multipliers.json", {"scans": summary})
    out.svg("multipliers.svg", series, title="multiplier suprema", xlabel="N", ylabel="sup",
            logx=True, logy=True)


def cmd_identity(rc, out):
    sec = rc.sections["identity"]
    bad = check_cubic_identity(int(sec["count"]), int(sec["bound"]), rc.seed)
    box = int(sec["symbol_box"])
    t_res, t_cnt = t_cancellation_residual(box, rc.params.s)
    j_res, j_cnt = j_cancellation_residual(box, rc.params.s)
    rows = [("cubic", int(sec["count"]), float(bad)), ("t_symbol", t_cnt, t_res),
            ("j_symbol", j_cnt, j_res)]
    out.csv("identities.csv", ["check", "count", "value"], rows)
    out.json("identities.json", {"cubic_mismatches": bad, "t_residual": t_res,
                                 "j_residual": j_res, "t_pairs": t_cnt, "j_triples": j_cnt})
    if bad:
        raise NumericFailure(f"cubic identity failed on {bad} tuples")
    if max(t_res, j_res) > 1e-13:
        raise NumericFailure(f"symbol cancellation residual {max(t_res, j_res):.3g} > 1e-13")


def cmd_nonuniform(rc, out):
    from .smoothing import nonuniform_demo

    sec = rc.sections["nonuniform"]
    grid = np.linspace(0.0, float(sec["t_max"]), int(sec["points"]))
    res = nonuniform_demo(int(sec["xi"]), float(sec["delta"]), rc.params.s, grid,
                          float(sec["coupling"]))
    out.csv("nonuniform.csv", ["t", "numeric", "closed_form", "discrepancy"], res["rows"])
    out.json("nonuniform.json", {"max_discrepancy": res["max_discrepancy"]})
    ts = [r[0] for r in res["rows"]]
    out.svg("nonuniform.svg", {"numeric": (ts, [r[1] for r in res["rows"]]),
                               "closed form": (ts, [r[2] for r in res["rows"]])},
            title="distance between resonant flows", xlabel="t", ylabel="L2 distance")


def cmd_xsb(rc, out):
    from .smoothing import XsbConfig, flow_trajectory, unit_rough_f, xsb_norm

    sec = rc.sections["xsb"]
    xcfg = XsbConfig(b=float(sec["b"]), window_width=float(sec["window_width"]),
                     time_samples=int(sec["time_samples"]), window_span=sec["window_span"])
    k = xcfg.time_samples
    times = float(sec["t_end"]) * np.arange(k) / (k - 1)
    sigma = float(sec["sigma"])
    rows, series = [], {}
    for n in (int(x) for x in sec["ns"]):
        f = unit_rough_f(n, rc.params, rc.seed)
        for flow in ("airy", "resonant"):
            tr = flow_trajectory(f, times, flow, rc.params.s, DEFAULT_COUPLING)
            val = xsb_norm(tr, xcfg, sigma)
            base = xsb_norm(tr, XsbConfig(0.0, "tukey", xcfg.window_width, k,
                                          xcfg.window_span), sigma)
            rows.append((flow, n, xcfg.b, val, base, val / base))
            series.setdefault(flow, ([], []))
            series[flow][0].append(n)
            series[flow][1].append(val / base)
    out.csv("xsb.csv", ["flow", "N", "b", "xsb", "xsb_b0", "ratio"], rows)
    out.json("xsb.json", {"rows": [list(r) for r in rows]})
    out.svg("xsb.svg", series, title="X^{sigma,b} / X^{sigma,0}", xlabel="N", ylabel="ratio",
            logx=True)


HANDLERS = {
    "simulate": cmd_simulate,
    "decompose": cmd_decompose,
    "smoothing-scan": cmd_smoothing,
    "multiplier-scan": cmd_multiplier,
    "identity-check": cmd_identity,
    "demo-nonuniform": cmd_nonuniform,
    "xsb-diagnostic": cmd_xsb,
}


def _set_threads(n):
    if n is None:
        return
    import numba

    from . import multipliers  # noqa: F401  (selects the threading layer)

    numba.set_num_threads(max(1, min(int(n), numba.config.NUMBA_NUM_THREADS)))


def run(rc):
    """Execute a validated config; writes artifacts plus ``manifest.json``. Returns 0."""
    _set_threads(rc.threads)
    out = _Out(rc)
    t0 = time.perf_counter()
    HANDLERS[rc.command](rc, out)
    wall = time.perf_counter() - t0
    manifest = {"command": rc.command, "config": rc.effective(), "seed": rc.seed,
                "version": __version__, "artifacts": sorted(out.written),
                "status": "ok", "wall_time_s": wall}
    out.w.always("manifest.json", manifest)
    return 0


def _fail(exc, code, out_dir):
    err = {"error": type(exc).__name__, "message": str(exc), "exit_code": code,
           "version": __version__}
    sys.stderr.write(json.dumps(err, sort_keys=True) + "\n")
    if out_dir:
        try:
            os.makedirs(out_dir, exist_ok=True)
            with open(os.path.join(out_dir, "error.json"), "w", encoding="utf-8") as fh:
                fh.write(dumps(err))
        except OSError:
            pass
    return code


def build_parser():
    p = argparse.ArgumentParser(prog="kdvlab", description=__doc__.split("\n")[0])
    p.add_argument("command", nargs="?", choices=COMMANDS,
                   help="command to run (overrides the config's 'command')")
    p.add_argument("--config", metavar="PATH", help="JSON configuration file")
    p.add_argument("--seed", type=int, help="override the random seed")
    p.add_argument("--out", metavar="DIR", help="output directory")
    p.add_argument("--threads", type=int, help="worker threads (fallback: KDVLAB_THREADS)")
    p.add_argument("--format", metavar="LIST", help="comma-separated subset of csv,json,svg")
    p.add_argument("--version", action="version", version=__version__)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    over = {"command": args.command, "seed": args.seed, "out": args.out,
            "threads": args.threads,
            "formats": None if args.format is None else args.format.split(",")}
    out_dir = args.out
    try:
        rc = load_config(args.config, **over) if args.config else build_config({}, **over)
        out_dir = rc.out_dir
        return run(rc)
    except ConfigError as exc:
        return _fail(exc, 2, out_dir)
    except (KdvLabError, ArithmeticError, FloatingPointError) as exc:
        return _fail(exc, 3, out_dir)
    except OSError as exc:
        return _fail(exc, 4, out_dir)
    except ValueError as exc:
        return _fail(exc, 2, out_dir)


if __name__ == "__main__":
    sys.exit(main())
