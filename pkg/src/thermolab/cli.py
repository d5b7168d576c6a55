"""Command-line experiments writing CSV.

Every command writes one CSV: a '#' line with the full configuration as JSON, a
header row, then rows sorted canonically.  A short summary goes to stderr.
Exit codes: 0 all checks passed, 1 a check failed or the numerics gave up,
2 usage error (nothing is written).
"""
import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from . import _backend
from .kernels import KERNEL_NAMES, DoubleKernelSpec, KernelId, kernel_radial, kernel_spec
from .params import ModelParams, ParameterError, derive
from .quadrature import (ABS_TOL, REL_TOL, I_of_t, QuadratureError, RadialWindow,
                         gaussian_profile, kernel_l2_norm)
from .roots import ZONE_BY_CODE, discriminant, quartic_value, residual_scale, roots_array
from .solution import Model, Target, solution_arrays
from . import rates


class UsageError(Exception):
    pass


COMMON_DEFAULTS = {
    "b": 1.0, "kappa": 1.0, "gamma": 1.0, "delta": 1.0,
    "rel_tol": REL_TOL, "abs_tol": ABS_TOL, "threads": 1, "seed": 0,
}

TIME_GRID = {"t_min": 1e2, "t_max": 1e6, "points": 12}

COMMAND_DEFAULTS = {
    "roots": {"r": None, "random": 0},
    "simulate": {"model": "TypeIII", "r": None, "t": None, "data": "0,0,0,1"},
    "kernel": {"name": None, "t": None, "r_min": 1e-3, "r_max": 1.0, "r_points": 200},
    "kernel-norm": {"name": None, "dims": "3", "eps0": 0.1, **TIME_GRID},
    "i-of-t": {"l1": None, "l2": None, "beta1": None, "beta2": None, "c1": 0.0, "c2": 0.0,
               "sigma": 0.0, "dims": "3", "eps0": 0.1, **TIME_GRID},
    "rate-fit": {"input": None, "column": "value", "model": "auto", "expect": None,
                 "expect_log": None, "tolerance": 0.05},
    "blowup-probe": {"l1": 1.0, "l2": 2.0, "beta1": 1.0, "beta2": 1.0, "c1": None, "c2": None,
                     "dims": "1", "t": 1.0, "eps0": 0.1, "eps1_min": 1e-6, "eps1_max": 1e-3,
                     "points": 10},
    "pointwise-scan": {"bound": "small_zone", "target": "U", "data": "0,0,0,1",
                       "t_min": 1.0, "t_max": 1e3, "r_min": 1e-3, "r_max": 0.1,
                       "t_points": 64, "r_points": 64, "baseline": None},
    "profile-error": {"model": "TypeIII", "target": "U", "dims": "3", "eps0": 0.1,
                      "mu6": 0.05, "rho1": 2.0, "t_min": 1e2, "t_max": 1e6, "points": 9},
    "table1": {**TIME_GRID},
}

REQUIRED = {
    "roots": [], "simulate": ["r", "t"], "kernel": ["name", "t"], "kernel-norm": ["name"],
    "i-of-t": ["l1", "l2", "beta1", "beta2"], "rate-fit": ["input"],
}

HELP = {
    "roots": "characteristic roots at given frequencies, or a random Vieta sweep",
    "simulate": "solution amplitudes at given (r, t)",
    "kernel": "radial factor of a kernel over an r grid",
    "kernel-norm": "kernel L2 norms over the small window",
    "i-of-t": "radial integral I(t; n) of a double kernel",
    "rate-fit": "fit a power (or power times sqrt-log) law to a CSV column",
    "blowup-probe": "divergence rate of the singular kernel integral in eps1",
    "pointwise-scan": "sup of solution over pointwise template on a (t, r) grid",
    "profile-error": "distance to the large-time profile over the reference rate",
    "table1": "fitted norm exponents for every (row, n) of the optimal-rate table",
}


def _flag(name):
    return "--" + name.replace("_", "-")


def build_parser():
    parser = argparse.ArgumentParser(prog="thermolab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    S = argparse.SUPPRESS
    for cmd, defaults in COMMAND_DEFAULTS.items():
        p = sub.add_parser(cmd, help=HELP[cmd], argument_default=S)
        p.add_argument("--config", help="JSON file of flag values (flags override it)")
        p.add_argument("--out", help="CSV output path (stdout when omitted)")
        p.add_argument("--rel-tol", type=float)
        p.add_argument("--abs-tol", type=float)
        p.add_argument("--threads", type=int)
        p.add_argument("--seed", type=int)
        for name in ("b", "kappa", "gamma", "delta"):
            p.add_argument(_flag(name), type=float)
        for name, value in defaults.items():
            if name in ("data", "dims", "r", "t", "name", "input", "model", "target", "bound",
                        "column", "baseline", "expect_log"):
                p.add_argument(_flag(name), type=str)
            elif name in ("points", "r_points", "t_points", "random"):
                p.add_argument(_flag(name), type=int)
            else:
                p.add_argument(_flag(name), type=float)
    return parser


def resolve_config(args):
    """defaults < config file < explicit flags."""
    cmd = args.command
    config = {**COMMON_DEFAULTS, **COMMAND_DEFAULTS[cmd]}
    given = {k: v for k, v in vars(args).items() if k not in ("command", "config", "out")}
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                loaded = json.load(fh)
        except (OSError, ValueError) as exc:
            raise UsageError(f"--config: cannot read {args.config}: {exc}") from None
        if not isinstance(loaded, dict):
            raise UsageError("--config: expected a flat JSON object")
        unknown = sorted(set(loaded) - set(config))
        if unknown:
            raise UsageError(f"--config: unknown keys {unknown} for command {cmd}")
        config.update(loaded)
    config.update(given)
    for name in REQUIRED.get(cmd, []):
        if config.get(name) is None:
            raise UsageError(f"missing required flag {_flag(name)}")
    if "t_min" in config and not 0 < float(config["t_min"]) < float(config["t_max"]):
        raise UsageError("--t-min/--t-max: need 0 < t_min < t_max")
    if cmd in ("kernel-norm", "i-of-t", "table1", "profile-error") and int(config["points"]) < 8:
        raise UsageError("--points: rate fits need at least 8 points")
    if int(config["threads"]) < 1:
        raise UsageError("--threads must be >= 1")
    config["command"] = cmd
    return config


def _floats(text, flag):
    try:
        return [float(x) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"{flag}: expected comma-separated numbers, got {text!r}") from None


def _ints(text, flag):
    vals = _floats(text, flag)
    if not vals or any(v != int(v) or v < 1 for v in vals):
        raise UsageError(f"{flag}: expected positive integers, got {text!r}")
    return [int(v) for v in vals]


def _params(config):
    try:
        return ModelParams(config["b"], config["kappa"], config["gamma"], config["delta"])
    except ParameterError as exc:
        raise UsageError(str(exc)) from None


def _enum(cls, text, flag):
    try:
        return cls(text)
    except ValueError:
        raise UsageError(f"{flag}: expected one of {[x.value for x in cls]}, got {text!r}") from None


def _time_grid(config):
    return rates.log_grid(float(config["t_min"]), float(config["t_max"]), int(config["points"]))


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return str(v)


def render_csv(config, header, rows):
    buf = io.StringIO()
    meta = {k: config[k] for k in sorted(config)}
    buf.write("# " + json.dumps(meta, sort_keys=True) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in sorted(rows, key=_sort_key):
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _sort_key(row):
    return tuple((0, float(v), "") if isinstance(v, (int, float, np.integer, np.floating))
                 and not isinstance(v, bool) else (1, 0.0, str(v)) for v in row)


# ---------------------------------------------------------------- commands


def cmd_roots(config):
    params = _params(config)
    count = int(config["random"])
    if count > 0:
        return _roots_sweep(config, count)
    if config["r"] is None:
        raise UsageError("missing required flag --r (or --random COUNT)")
    rs = np.array(_floats(config["r"], "--r"))
    if np.any(rs < 0):
        raise UsageError("--r: frequencies must be >= 0")
    lam, zone = roots_array(params, rs)
    header = ["r"] + [f"{p}{j}" for j in range(1, 5) for p in ("re", "im")] + ["zone", "disc",
                                                                              "vieta_residual"]
    rows, ok = [], True
    for r, lr, z in zip(rs, lam, zone):
        res = _vieta_residual(params, r, lr)
        ok &= res <= 1e-9
        disc = discriminant(params, r)[0] if r > 0 else 0.0
        rows.append([r] + [x for v in lr for x in (v.real, v.imag)] + [ZONE_BY_CODE[z].value, disc, res])
    return header, rows, ok, f"{len(rows)} frequencies, max Vieta residual {max(x[-1] for x in rows):.3g}"


def _vieta_residual(params, r, lam):
    """Relative mismatch of the elementary symmetric functions with the quartic."""
    from .roots import quartic_coefficients
    coeffs = np.asarray(quartic_coefficients(params, r), dtype=float).ravel()
    rebuilt = np.poly(lam).real
    scale = np.abs(coeffs) + np.abs(np.poly(np.abs(lam)))
    return float(np.max(np.abs(rebuilt - coeffs) / np.maximum(scale, 1e-300)))


def _roots_sweep(config, count):
    rng = np.random.default_rng(int(config["seed"]))
    header = ["case", "b", "kappa", "gamma", "delta", "r", "vieta_residual", "quartic_residual", "stable"]
    rows, ok = [], True
    for k in range(count):
        b, kappa, gamma = np.exp(rng.uniform(np.log(0.1), np.log(10.0), 3))
        delta = float(np.exp(rng.uniform(np.log(0.01), np.log(10.0))))
        params = ModelParams(b, kappa, gamma, delta)
        r = float(10 ** rng.uniform(-6, 4))
        lam = roots_array(params, [r])[0][0]
        vres = _vieta_residual(params, r, lam)
        qres = float(np.max(np.abs(quartic_value(params, r, lam)) / residual_scale(params, r, lam)))
        stable = bool(np.max(lam.real) < 0)
        ok &= vres <= 1e-9 and qres <= 1e-9 and stable
        rows.append([k, params.b, params.kappa, params.gamma, params.delta, r, vres, qres, stable])
    worst = max(r[6] for r in rows), max(r[7] for r in rows)
    return header, rows, ok, f"{count} random cases, worst Vieta {worst[0]:.3g}, worst residual {worst[1]:.3g}"


def _data(config):
    vals = _floats(config["data"], "--data")
    if len(vals) != 4:
        raise UsageError("--data: expected four numbers a0,a1,theta0,theta1")
    return tuple(vals)


def cmd_simulate(config):
    params = _params(config)
    model = _enum(Model, config["model"], "--model")
    if (model == Model.TYPE_II) != (params.delta == 0):
        raise UsageError("--model TypeII needs --delta 0 and TypeIII needs --delta > 0")
    rs = np.array(_floats(config["r"], "--r"))
    ts = _floats(config["t"], "--t")
    if np.any(rs < 0) or any(t < 0 for t in ts):
        raise UsageError("--r and --t must be >= 0")
    data = _data(config)
    rows = []
    for t in ts:
        out = solution_arrays(params, rs, t, data, model)
        for r, u, th in zip(rs, out[Target.U], out[Target.THETA]):
            rows.append([t, r, u.real, u.imag, th.real, th.imag, model.value])
    return ["t", "r", "re_u", "im_u", "re_th", "im_th", "model"], rows, True, f"{len(rows)} solution values"


def cmd_kernel(config):
    params = _params(config)
    dp = derive(params)
    name = config["name"]
    if name not in KERNEL_NAMES or name == "M":
        raise UsageError(f"--name: expected one of {[k for k in KERNEL_NAMES if k != 'M']}")
    if name in ("G1", "G2") and params.delta == 0:
        raise UsageError("--name G1/G2 are the damped kernels; use G3/G4 for --delta 0")
    ts = _floats(config["t"], "--t")
    rs = np.geomspace(float(config["r_min"]), float(config["r_max"]), int(config["r_points"]))
    rows = [[t, r, v, name] for t in ts for r, v in zip(rs, kernel_radial(name, dp, t, rs))]
    return ["t", "r", "value", "kernel_id"], rows, True, f"{len(rows)} kernel values ({name})"


def _norm_rows(config, compute, sigma, ts, dims):
    def one(cell):
        n, t = cell
        res = compute(n, t)
        return [t, n, sigma, res.value, res.est_error, res.panels]
    cells = [(n, float(t)) for n in dims for t in ts]
    return rates.parallel_map(one, cells, int(config["threads"]))


def _fits_summary(rows):
    lines = []
    for n in sorted({r[1] for r in rows}):
        sub = sorted((r[0], r[3]) for r in rows if r[1] == n)
        t, v = map(np.array, zip(*sub))
        if np.all(v > 0) and t.size >= 8:
            fit = rates.fit_rate(t, v, min_decades=0)
            lines.append(f"n={n}: exponent {fit.exponent:.4f} ({fit.log_flag}), r2 {fit.r_squared:.5f}")
    return "; ".join(lines)


def cmd_kernel_norm(config):
    params = _params(config)
    dp = derive(params)
    try:
        kid = KernelId(config["name"])
    except ValueError as exc:
        raise UsageError(f"--name: {exc}") from None
    if kid.name in ("G0", "M"):
        raise UsageError("--name: kernel norms are defined for G1..G4")
    if kid.name in ("G1", "G2") and params.delta == 0:
        raise UsageError("--name G1/G2 need --delta > 0")
    use = dp if kid.name in ("G1", "G2") else derive(params.with_delta(0.0))
    dims = _ints(config["dims"], "--dims")
    window = RadialWindow.small(float(config["eps0"]))
    sigma = kernel_spec(kid, use).sigma
    rows = _norm_rows(config, lambda n, t: kernel_l2_norm(kid, use, n, t, window, config["rel_tol"],
                                                          config["abs_tol"]), sigma, _time_grid(config), dims)
    return ["t", "n", "sigma", "value", "est_error", "panels"], rows, True, _fits_summary(rows)


def _spec(config):
    try:
        return DoubleKernelSpec(config["l1"], config["l2"], config["beta1"], config["beta2"],
                                config["c1"], config["c2"], config["sigma"])
    except (TypeError, ValueError) as exc:
        raise UsageError(f"kernel specification: {exc}") from None


def cmd_i_of_t(config):
    spec = _spec(config)
    dims = _ints(config["dims"], "--dims")
    for n in dims:
        if n < 1 + 2 * spec.sigma and not spec.cancels:
            raise UsageError(f"I(t; {n}) diverges for l1 != l2 and sigma = {spec.sigma:g}; "
                             "use blowup-probe")
    eps0 = float(config["eps0"])
    rows = _norm_rows(config, lambda n, t: I_of_t(spec, n, t, eps0, config["rel_tol"], config["abs_tol"]),
                      spec.sigma, _time_grid(config), dims)
    return ["t", "n", "sigma", "value", "est_error", "panels"], rows, True, _fits_summary(rows)


def _read_series(path, column):
    try:
        with open(path) as fh:
            lines = [ln for ln in fh if not ln.startswith("#")]
    except OSError as exc:
        raise UsageError(f"--input: {exc}") from None
    reader = csv.DictReader(lines)
    if reader.fieldnames is None or "t" not in reader.fieldnames or column not in reader.fieldnames:
        raise UsageError(f"--input: need columns 't' and {column!r}")
    groups = {}
    for row in reader:
        key = row.get("n", "")
        try:
            groups.setdefault(key, []).append((float(row["t"]), float(row[column])))
        except (TypeError, ValueError):
            raise UsageError(f"--input: line {reader.line_num}: non-numeric t or {column}") from None
    return groups


def cmd_rate_fit(config):
    model = config["model"]
    if model not in ("auto", "power", "power_sqrt_log"):
        raise UsageError("--model: expected auto, power or power_sqrt_log")
    expect_log = config["expect_log"]
    if expect_log is not None and expect_log not in rates.LOG_FLAGS:
        raise UsageError(f"--expect-log: expected one of {rates.LOG_FLAGS}")
    rows, ok = [], True
    for key, series in sorted(_read_series(config["input"], config["column"]).items()):
        t, v = map(np.array, zip(*sorted(series)))
        try:
            fit = rates.fit_rate(t, v, None if model == "auto" else model)
        except ValueError as exc:
            raise UsageError(f"--input: {exc}") from None
        good = True
        if config["expect"] is not None:
            good &= abs(fit.exponent - float(config["expect"])) <= float(config["tolerance"])
        if expect_log is not None:
            good &= fit.log_flag == expect_log
        ok &= good
        rows.append([key, fit.exponent, fit.log_flag, fit.r_squared, fit.window[0], fit.window[1],
                     fit.rss, fit.rss_power, good])
    header = ["n", "exponent", "log_flag", "r_squared", "t_min", "t_max", "rss", "rss_power", "pass"]
    return header, rows, ok, "; ".join(f"{r[0] or '-'}: {r[1]:.4f} ({r[2]})" for r in rows)


def cmd_blowup_probe(config):
    params = _params(config)
    dp = derive(params)
    c1 = dp.c1 if config["c1"] is None else config["c1"]
    c2 = dp.c2 if config["c2"] is None else config["c2"]
    spec = _spec({**config, "c1": c1, "c2": c2, "sigma": 1.0})
    if spec.cancels:
        raise UsageError("l1 == l2 gives a convergent integral; use i-of-t")
    eps1 = np.geomspace(float(config["eps1_min"]), float(config["eps1_max"]), int(config["points"]))
    rows, ok, notes = [], True, []
    for n in _ints(config["dims"], "--dims"):
        if n not in (1, 2):
            raise UsageError("--dims: blow-up probes are defined for n = 1, 2")
        try:
            fit, vals = rates.blowup_probe(spec, n, float(config["t"]), eps1, float(config["eps0"]),
                                           config["rel_tol"], config["abs_tol"])
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        good = abs(fit.exponent + 1.0) <= 0.05 if n == 1 else fit.r_squared > 0.99
        ok &= good
        rows.extend([n, e, v, fit.exponent, fit.r_squared, good] for e, v in zip(eps1, vals))
        notes.append(f"n={n}: {'slope' if n == 1 else 'ln(1/eps1) coefficient'} {fit.exponent:.4f}, "
                     f"r2 {fit.r_squared:.5f}")
    return ["n", "eps1", "integral", "fit", "r_squared", "pass"], rows, ok, "; ".join(notes)


def cmd_pointwise_scan(config):
    params = _params(config)
    if params.delta <= 0:
        raise UsageError("pointwise scans need --delta > 0")
    if config["bound"] not in rates.POINTWISE_BOUNDS:
        raise UsageError(f"--bound: expected one of {rates.POINTWISE_BOUNDS}")
    target = _enum(Target, config["target"], "--target")
    rep = rates.pointwise_ratio_scan(params, derive(params), _data(config), target, config["bound"],
                                     (float(config["t_min"]), float(config["t_max"])),
                                     (float(config["r_min"]), float(config["r_max"])),
                                     (int(config["t_points"]), int(config["r_points"])))
    ok = rep.stable and rep.rhs_zeros == 0 and math.isfinite(rep.sup_ratio)
    note = ""
    if config["baseline"] != "none":
        key = rates.scan_key(params, _data(config), target, config["bound"],
                             (float(config["t_min"]), float(config["t_max"])),
                             (float(config["r_min"]), float(config["r_max"])),
                             (int(config["t_points"]), int(config["r_points"])))
        status, _ = rates.compare_baseline(config["baseline"] or rates.BASELINE_FILE, key,
                                           {"sup_ratio": rep.sup_ratio, "c": rep.c, "c_tilde": rep.c_tilde})
        ok &= status != "mismatch"
        note = f", baseline {status}"
    rows = [[c, ct, s] for c, ct, s in rep.candidates]
    summary = (f"{rep.bound}/{rep.target}: sup {rep.sup_ratio:.4g} (refined {rep.refined_sup:.4g}) at "
               f"c={rep.c:.4g}, c~={rep.c_tilde:.4g}; stable {rep.stable}, rhs zeros {rep.rhs_zeros}{note}")
    return ["c", "c_tilde", "sup_ratio"], rows, ok, summary


def cmd_profile_error(config):
    params = _params(config)
    model = _enum(Model, config["model"], "--model")
    if (model == Model.TYPE_II) != (params.delta == 0):
        raise UsageError("--model TypeII needs --delta 0 and TypeIII needs --delta > 0")
    target = _enum(Target, config["target"], "--target")
    dp = derive(params)
    ts = _time_grid(config)
    rows, ok, notes = [], True, []
    for n in _ints(config["dims"], "--dims"):
        series = rates.profile_error_experiment(params, dp, gaussian_profile(n), model, target, ts, n,
                                                float(config["eps0"]), float(config["mu6"]),
                                                float(config["rho1"]), config["rel_tol"],
                                                config["abs_tol"], int(config["threads"]))
        check = rates.trend_check(*zip(*series))
        ok &= check.passed
        rows.extend([n, t, v, check.passed] for t, v in series)
        notes.append(f"n={n}: drop {check.drop:.3g}, decreasing {check.decreasing}")
    return ["n", "t", "ratio", "pass"], rows, ok, "; ".join(notes)


def cmd_table1(config):
    params = _params(config)
    if params.delta <= 0:
        raise UsageError("table1 needs --delta > 0 (the undamped rows use delta = 0 internally)")
    try:
        cells = rates.table1(params, t_window=(float(config["t_min"]), float(config["t_max"])),
                             points=int(config["points"]), rel_tol=config["rel_tol"],
                             abs_tol=config["abs_tol"], threads=int(config["threads"]))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    order = {row: i for i, row in enumerate(rates.TABLE_ROWS)}
    rows = [[order[c.row], c.row, c.n, c.predicted, c.exponent, c.log_flag, c.r_squared, c.eps0,
             c.matches] for c in cells]
    ok = all(c.matches for c in cells)
    bad = [f"{c.row} n={c.n}" for c in cells if not c.matches]
    summary = f"{len(cells) - len(bad)}/{len(cells)} cells match" + (f"; mismatched: {', '.join(bad)}" if bad else "")
    header = ["row_index", "row", "n", "predicted", "exponent", "log_flag", "r_squared", "eps0", "match"]
    return header, rows, ok, summary


COMMANDS = {
    "roots": cmd_roots, "simulate": cmd_simulate, "kernel": cmd_kernel,
    "kernel-norm": cmd_kernel_norm, "i-of-t": cmd_i_of_t, "rate-fit": cmd_rate_fit,
    "blowup-probe": cmd_blowup_probe, "pointwise-scan": cmd_pointwise_scan,
    "profile-error": cmd_profile_error, "table1": cmd_table1,
}


def run(argv=None, stdout=None, stderr=None):
    """Run one command; returns the exit code."""
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        config = resolve_config(args)
        header, rows, ok, summary = COMMANDS[args.command](config)
    except UsageError as exc:
        print(f"thermolab {args.command}: error: {exc}", file=stderr)
        return 2
    except (QuadratureError, ArithmeticError) as exc:
        print(f"thermolab {args.command}: numerical failure in {type(exc).__module__}: {exc}", file=stderr)
        return 1
    text = render_csv(config, header, rows)
    out = getattr(args, "out", None)
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        stdout.write(text)
    print(f"{args.command} [{_backend.NAME} backend]: {summary} -> {'PASS' if ok else 'FAIL'}", file=stderr)
    return 0 if ok else 1


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
