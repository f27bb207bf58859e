"""Command-line front end: ``relaxbc <command> <config> [options]``."""

import argparse
import csv
import json
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import expansion as ex
from .config import apply_grid_overrides, load_config, print_config
from .errors import (ConfigError, ConvergenceFailed, GkcFailed, NotValidated, RelaxBCError,
                     UkcFailed)
from .kreiss import SamplingGrid, certify_gkc
from .layer import build_layer_algebra, format_algebra
from .reduced import derive_reduced_matrices, ukc_minimum
from .relaxation import TimeGrid, solve_relaxation
from .system import check_compatibility, classify, normalize, validate_structural_stability
from .transport import stable_dt

COMMANDS = ("validate", "gkc", "reduce", "expand", "simulate", "converge")


def fixture_path(name):
    """Path of a shipped fixture such as ``ts4.cfg``."""
    return Path(str(resources.files("relaxbc") / "fixtures" / name))


def resolve_config(path):
    p = Path(path)
    if p.exists():
        return p
    f = fixture_path(p.name)
    return f if f.exists() else p


def _g(v):
    return f"{float(v):.17g}"


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_g(v) if isinstance(v, (float, np.floating)) else v for v in r])


class Pipeline:
    """Lazily evaluated chain from configuration to reduced boundary."""

    def __init__(self, cfg):
        self.cfg = cfg
        self.tol = cfg.tolerances
        self.system = cfg.system()
        self._cache = {}

    def _once(self, key, fn):
        if key not in self._cache:
            self._cache[key] = fn()
        return self._cache[key]

    @property
    def report(self):
        return self._once("report", lambda: validate_structural_stability(
            self.system, tol_zero=self.tol.tol_zero, tol_sym=self.tol.tol_sym))

    @property
    def norm(self):
        return self._once("norm", lambda: normalize(self.system, report=self.report,
                                                    tol_zero=self.tol.tol_zero))

    @property
    def sig(self):
        return self._once("sig", lambda: classify(self.norm, tol_zero=self.tol.tol_zero))

    @property
    def layer(self):
        return self._once("layer", lambda: build_layer_algebra(
            self.norm, self.sig, tol_zero=self.tol.tol_zero,
            tol_congruence=self.tol.tol_congruence))

    @property
    def reduced(self):
        return self._once("reduced", lambda: derive_reduced_matrices(
            self.norm, self.sig, self.layer, tol_invert=self.tol.tol_invert))

    @property
    def freq_grid(self):
        return SamplingGrid.parse(self.cfg.frequency_grid)

    @property
    def data(self):
        def make():
            u0, b = self.cfg.data.make(self.norm.B_u)
            check_compatibility(self.norm, b, u0, self.cfg.grid_spec().xhat_nodes(),
                                tol=self.tol.tol_compat)
            return u0, b
        return self._once("data", make)

    def gkc(self):
        return self._once("gkc", lambda: certify_gkc(self.norm, grid=self.freq_grid,
                                                     threshold=self.tol.gkc_threshold))

    def require_gkc(self):
        rep = self.gkc()
        if not rep.passed:
            raise GkcFailed(f"min ratio {rep.min_ratio:.6g} <= {rep.threshold:g}")
        return rep

    def require_solvable_dimension(self):
        if self.cfg.d > 2:
            raise ConfigError(f"the solvers support d <= 2, got d = {self.cfg.d}")


def _emit(args, text, payload):
    if args.json:
        print(json.dumps(payload, indent=2, sort_keys=True, default=float))
    else:
        print(text)


def cmd_validate(pl, args):
    rep = pl.report
    payload = {"checks": rep.as_dict()}
    lines = [rep.format()]
    if rep.passed:
        sig = pl.sig
        la_ = pl.layer
        pl.data
        payload.update(n_plus=sig.n_plus, n1_plus=sig.n1_plus, n1_zero=sig.n1_zero)
        lines += [f"n_plus {sig.n_plus}  n1_plus {sig.n1_plus}  n1_zero {sig.n1_zero}",
                  format_algebra(la_), "compatibility PASS"]
    _emit(args, "\n".join(lines), payload)
    if args.dump_csv:
        write_csv(args.dump_csv, ["check", "passed", "value"],
                  [[c.name, int(c.passed), float(c.value)] for c in rep.checks])
    if not rep.passed:
        raise NotValidated("failed checks: " + ", ".join(c.name for c in rep.failures()))


def cmd_gkc(pl, args):
    rep = pl.gkc()
    fp = rep.argmin_point
    payload = {"min_ratio": rep.min_ratio, "raw_min_ratio": rep.min_ratio * rep.scale,
               "scale": rep.scale, "sampled": len(rep.sampled_points),
               "skipped": rep.skipped, "status": rep.status,
               "argmin": None if fp is None else fp.row()}
    _emit(args, rep.format(), payload)
    if args.dump_csv:
        header = ["re_xi", "im_xi"] + [f"omega{j}" for j in range(2, pl.norm.d + 1)] \
            + ["eta", "raw_ratio", "scaled_ratio"]
        write_csv(args.dump_csv, header, rep.csv_rows())
    if not rep.passed:
        raise GkcFailed(f"min ratio {rep.min_ratio:.6g} <= {rep.threshold:g}")


def cmd_reduce(pl, args):
    pl.require_gkc()
    rb = pl.reduced
    ukc, arg, skipped = ukc_minimum(pl.norm, pl.sig, pl.layer, rb, pl.freq_grid)
    _emit(args, rb.format(ukc), rb.as_dict(ukc))
    if args.dump_csv:
        rows = []
        for name in ("B_o", "B_1", "B_2", "Y1", "Y2", "Y3", "coupling"):
            M = np.asarray(getattr(rb, name))
            rows += [[name, i, j, float(M[i, j])] for i in range(M.shape[0])
                     for j in range(M.shape[1])]
        write_csv(args.dump_csv, ["matrix", "row", "col", "value"], rows)
    if not ukc > pl.tol.ukc_threshold:
        raise UkcFailed(f"UKC minimum {ukc:.6g} <= {pl.tol.ukc_threshold:g}")


def _single_eps(pl, args):
    if args.eps is None:
        return pl.cfg.epsilons[-1]
    vals = _parse_eps(args.eps)
    if len(vals) != 1:
        raise ConfigError("--eps: this command takes a single value")
    return vals[0]


def _parse_eps(text):
    try:
        vals = [float(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise ConfigError(f"--eps: cannot parse {text!r}") from None
    if not vals or any(v <= 0 for v in vals):
        raise ConfigError("--eps: values must be positive")
    return vals


def _time_grid(pl, eps):
    grid = pl.cfg.grid_spec()
    x = grid.x1_nodes(eps)
    xhat = grid.xhat_nodes()
    spacing = [] if xhat is None else [float(xhat[1] - xhat[0]) if len(xhat) > 1 else np.inf]
    dt = stable_dt(pl.norm.A[:1 + len(spacing)], x, spacing, grid.cfl)
    return grid, x, xhat, TimeGrid.build(grid.t_max, dt, grid.n_slices)


def dump_fields(path, norm, x, xhat, times, states):
    """CSV snapshot dump in physical coordinates, one row per node and time."""
    n = norm.n
    with open(path, "w", newline="", encoding="utf-8") as fh:
        nh = 0 if xhat is None else len(xhat)
        fh.write(f"# nt={len(times)} nx={len(x)} nxhat={nh} n={n}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "x1"] + (["x2"] if xhat is not None else [])
                   + [f"U{i + 1}" for i in range(n)])
        for t, U in zip(times, states):
            P = norm.denormalize(U)
            if xhat is None:
                for i, xi in enumerate(x):
                    w.writerow([_g(t), _g(xi)] + [_g(v) for v in P[i]])
            else:
                for i, xi in enumerate(x):
                    for h, xh in enumerate(xhat):
                        w.writerow([_g(t), _g(xi), _g(xh)] + [_g(v) for v in P[i, h]])


def cmd_simulate(pl, args):
    pl.require_solvable_dimension()
    pl.require_gkc()
    eps = _single_eps(pl, args)
    u0, b = pl.data
    grid, x, xhat, tg = _time_grid(pl, eps)
    U0 = np.zeros(x.shape + (() if xhat is None else (len(xhat),)) + (pl.norm.n,))
    U0[..., :pl.norm.m] = u0(x, xhat)
    hist = solve_relaxation(pl.norm, b, U0, eps, x, tg, xhat)
    rows = []
    for k in tg.slice_steps:
        U = hist.at(k)
        rows.append([k * tg.dt, ex.l2_norm(U, x, xhat),
                     ex.l2_norm(U[..., pl.norm.m:], x, xhat)])
    text = "\n".join([f"epsilon {eps:g}  nodes {x.size}  steps {tg.n_steps}  dt {tg.dt:.6g}",
                      f"{'t':>10s} {'L2 norm U':>18s} {'L2 norm v':>18s}"]
                     + [f"{t:10.4f} {a:18.10e} {c:18.10e}" for t, a, c in rows])
    _emit(args, text, {"epsilon": eps, "nodes": int(x.size), "steps": tg.n_steps,
                       "dt": tg.dt, "slices": rows})
    if args.dump_csv:
        write_csv(args.dump_csv, ["t", "l2_U", "l2_v"], rows)
    if args.dump_fields:
        dump_fields(args.dump_fields, pl.norm, x, xhat, tg.slice_times, hist.slices())


def cmd_expand(pl, args):
    pl.require_solvable_dimension()
    pl.require_gkc()
    eps = _single_eps(pl, args)
    u0, b = pl.data
    grid, x, xhat, tg = _time_grid(pl, eps)
    fields = ex.build_expansion(pl.norm, pl.sig, pl.layer, pl.reduced, b, u0, eps, x, tg,
                                xhat, grid, layer_source=pl.cfg.layer_source)
    decay = fields.decay_report()
    wmax = max(float(np.abs(fields.w_field(k)).max(initial=0.0)) for k in tg.slice_steps)
    rows = []
    for k in tg.slice_steps:
        rows.append([k * tg.dt, float(np.abs(fields.mu1_trace[k]).max(initial=0.0)),
                     float(np.abs(fields.wS[k]).max(initial=0.0)),
                     float(np.abs(fields.heat.fields[k]).max(initial=0.0))])
    text = "\n".join(
        [f"epsilon {eps:g}  layer source {pl.cfg.layer_source}",
         f"y extent {fields.y[-1]:.6g}  z extent {fields.z[-1]:.6g}",
         f"max |w| {wmax:.6g}  decay w {decay['w']:.3e}  decay mu1 {decay['mu1']:.3e}",
         f"{'t':>10s} {'|mu1 trace|':>16s} {'|wS|':>16s} {'max |m|':>16s}"]
        + [f"{r[0]:10.4f} {r[1]:16.8e} {r[2]:16.8e} {r[3]:16.8e}" for r in rows])
    _emit(args, text, {"epsilon": eps, "w_max": wmax, "decay": decay, "slices": rows})
    if args.dump_csv:
        write_csv(args.dump_csv, ["t", "mu1_trace_max", "wS_max", "m_max"], rows)
    if args.dump_fields:
        dump_fields(args.dump_fields, pl.norm, x, xhat, tg.slice_times,
                    [fields.compose(k) for k in tg.slice_steps])


def cmd_converge(pl, args):
    pl.require_solvable_dimension()
    pl.require_gkc()
    eps = pl.cfg.epsilons if args.eps is None else sorted(_parse_eps(args.eps), reverse=True)
    if len(eps) < 2 or len(set(eps)) != len(eps):
        raise ConfigError("--eps: a sweep needs at least two distinct values")
    u0, b = pl.data

    def progress(res):
        if not args.json:
            print(f"  eps {res['eps']:.3e}: nodes {res['nx']}, steps {res['n_steps']}, "
                  f"error {res['err_tmax']:.6e}", file=sys.stderr, flush=True)

    rep = ex.convergence_study(pl.norm, pl.sig, pl.layer, pl.reduced, b, u0, eps,
                               pl.cfg.grid_spec(), layer_source=pl.cfg.layer_source,
                               progress=progress)
    _emit(args, rep.format(), {"entries": rep.entries,
                               "fitted_slope": rep.fitted_slope if rep.slope_defined else None,
                               "monotone": rep.monotone, "passed": rep.passed})
    if args.dump_csv:
        write_csv(args.dump_csv, ["epsilon", "l2_error_tmax", "sup_l2_error"], rep.csv_rows())
    if not rep.passed:
        raise ConvergenceFailed("fitted slope outside range or errors not monotone")


HANDLERS = {"validate": cmd_validate, "gkc": cmd_gkc, "reduce": cmd_reduce,
            "expand": cmd_expand, "simulate": cmd_simulate, "converge": cmd_converge}


def build_parser():
    p = argparse.ArgumentParser(prog="relaxbc",
                                description="Relaxation systems with characteristic boundaries.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("config", help="configuration file (shipped fixtures are found by name)")
    p.add_argument("--grid", help="grid overrides, e.g. nx=4000,nz=3000")
    p.add_argument("--eps", help="epsilon value(s), comma separated")
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.add_argument("--dump-csv", metavar="PATH")
    p.add_argument("--dump-fields", metavar="PATH")
    p.add_argument("--layer-source", choices=ex.LAYER_SOURCES)
    p.add_argument("--print-config", action="store_true",
                   help="echo the fully defaulted configuration before running")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(resolve_config(args.config))
        if args.grid:
            apply_grid_overrides(cfg, args.grid)
        if args.layer_source:
            cfg.layer_source = args.layer_source
        if args.print_config:
            print(print_config(cfg))
        HANDLERS[args.command](Pipeline(cfg), args)
    except RelaxBCError as exc:
        print(exc.diagnosis(), file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
