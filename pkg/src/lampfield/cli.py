"""``lampfield`` command line: simulate, transform, verify, estimate, sumfield, scaletrans.

Options may also come from ``--config FILE`` (``key=value`` lines, ``#``
comments, keys spelled like the long options without dashes prefix).  Flags
given on the command line override the file.  Every output echoes the fully
resolved configuration as ``# config.<key>=<value>`` lines.

Exit codes: 0 pass, 1 verification failed, 2 usage or validation error,
3 numeric failure.
"""
from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import attraction, fields, lamperti, regvar, statcheck
from .errors import LampfieldError, NumericError
from .io import experiment_to_csv, field_to_csv, parse_field_csv, write_text_atomic

EXIT_PASS, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3

MODELS = ("white-noise", "levy-fbm", "fbm-sheet", "polar-stationary",
          "lattice-separable", "lattice-isotropic-lrd")
LATTICE_MODELS = ("white-noise", "lattice-separable", "lattice-isotropic-lrd")
DIRECTIONS = ("mss-fwd", "mss-inv", "polar-fwd", "polar-inv", "1d-fwd", "1d-inv")
CHECKS = ("self-similar", "stationary", "cocycle", "prop6", "wmss-shift")
_NOT_ECHOED = {"config", "out", "command", "func"}


class UsageError(LampfieldError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


# ---------------------------------------------------------------------------
# small parsers
# ---------------------------------------------------------------------------

def _floats(text, name="value") -> np.ndarray:
    try:
        return np.array([float(v) for v in str(text).split(",") if v.strip() != ""])
    except ValueError:
        raise UsageError(f"{name}: expected comma-separated numbers, got {text!r}") from None


def _matrix(text, name="matrix") -> np.ndarray:
    rows = [_floats(r, name) for r in str(text).split(";") if r.strip()]
    if not rows or len({r.size for r in rows}) != 1:
        raise UsageError(f"{name}: rows must have equal length, got {text!r}")
    return np.array(rows)


def _shape(text) -> tuple:
    try:
        shape = tuple(int(v) for v in str(text).lower().split("x"))
    except ValueError:
        raise UsageError(f"grid: expected NxM, got {text!r}") from None
    if any(n < 1 for n in shape):
        raise UsageError("grid sides must be positive")
    return shape


def parse_points(spec: str):
    """Point-set spec: ``grid:NxM``, ``circle:K``, ``box:a:b:k[:d]`` or ``list:x,y;x,y``."""
    kind, _, rest = str(spec).partition(":")
    if kind == "grid":
        return fields.LatticeGrid.integer(_shape(rest))
    if kind == "circle":
        k = int(rest)
        ang = 2.0 * np.pi * np.arange(k) / k
        return np.stack([np.cos(ang), np.sin(ang)], axis=1)
    if kind == "box":
        parts = rest.split(":")
        if len(parts) not in (3, 4):
            raise UsageError("box points: expected box:a:b:k[:d]")
        a, b, k = float(parts[0]), float(parts[1]), int(parts[2])
        d = int(parts[3]) if len(parts) == 4 else 2
        axis = np.linspace(a, b, k)
        mesh = np.meshgrid(*([axis] * d), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)
    if kind == "list":
        return _matrix(rest, "points")
    raise UsageError(f"unknown point spec {spec!r}")


def _require(args, *names):
    for n in names:
        if getattr(args, n, None) is None:
            raise UsageError(f"--{n.replace('_', '-')} is required")


def build_kernel(args) -> fields.CovarianceKernel:
    _require(args, "model")
    model = args.model
    if model in ("levy-fbm", "polar-stationary"):
        _require(args, "hurst")
        H = float(args.hurst)
        return fields.LevyFBM(H, args.dim) if model == "levy-fbm" else fields.PolarStationary(H)
    if model == "fbm-sheet":
        _require(args, "h")
        return fields.FBMSheet(_floats(args.h, "h"))
    if model == "white-noise":
        return fields.WhiteNoise(args.dim)
    if model == "lattice-separable":
        _require(args, "r1", "r2")
        return fields.LatticeSeparable(fields.Cov1D.parse(args.r1), fields.Cov1D.parse(args.r2))
    if model == "lattice-isotropic-lrd":
        _require(args, "q")
        return fields.LatticeIsotropicLRD(float(args.q))
    raise UsageError(f"unknown model {model!r}")


def _lattice_kernel(args):
    if args.model not in LATTICE_MODELS:
        raise UsageError(f"--model must be a lattice model: {', '.join(LATTICE_MODELS)}")
    return build_kernel(args)


def _config_meta(args) -> dict:
    meta = {}
    for k, v in sorted(vars(args).items()):
        if k in _NOT_ECHOED or v is None:
            continue
        meta[f"config.{k.replace('_', '-')}"] = v
    meta["config.command"] = args.command
    return meta


def _emit(text, args):
    write_text_atomic(text, args.out)


def _slow_factor(text) -> regvar.SlowFn:
    kind, _, val = text.partition(":")
    if kind == "constant":
        return regvar.SlowFn.constant(float(val or 1.0))
    if kind in ("log", "loglog"):
        return regvar.SlowFn(kind, power=float(val or 1.0))
    raise UsageError(f"unknown slow factor {text!r} (constant:c, log:p, loglog:p)")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    _require(args, "seed", "reps")
    kernel = build_kernel(args)
    if args.grid is not None and args.points is not None:
        raise UsageError("give either --grid or --points, not both")
    spec = f"grid:{args.grid}" if args.grid is not None else args.points
    if spec is None:
        raise UsageError("--grid or --points is required")
    pts = parse_points(spec)
    if isinstance(pts, fields.LatticeGrid) and hasattr(kernel, "lag"):
        sample = fields.sample_stationary_lattice(kernel, pts, args.reps, args.seed)
    else:
        if hasattr(kernel, "lag") and not isinstance(kernel, fields.WhiteNoise):
            raise UsageError(f"{args.model} needs an integer lattice (--grid NxM)")
        sample = fields.sample_gaussian_field(kernel, pts, args.reps, args.seed)
    _emit(field_to_csv(sample, _config_meta(args)), args)
    return EXIT_PASS


def _read_input(path):
    if path == "-":
        return parse_field_csv(sys.stdin.read())
    try:
        with open(path, newline="") as fh:
            return parse_field_csv(fh.read())
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None


def cmd_transform(args) -> int:
    _require(args, "direction", "input", "hurst")
    obj = _read_input(args.input)
    path = obj if isinstance(obj, lamperti.PathOnGrid) else lamperti.PathOnGrid.from_sample(obj)
    fam, _, way = args.direction.partition("-")
    want = "T" if way == "fwd" else "S"
    if path.frame != want:
        raise UsageError(f"{args.direction} expects a frame-{want} file, got frame {path.frame}")
    path = lamperti.PathOnGrid(path.points, np.asarray(path.values, dtype=np.longdouble),
                               path.frame, path.metadata)
    if fam == "mss":
        H = _matrix(args.hurst, "hurst")
        fn = lamperti.lamperti_forward_mss if way == "fwd" else lamperti.lamperti_inverse_mss
    else:
        H = float(args.hurst)
        fn = {("polar", "fwd"): lamperti.polar_forward_levy, ("polar", "inv"): lamperti.polar_inverse_levy,
              ("1d", "fwd"): lamperti.lamperti_forward_1d, ("1d", "inv"): lamperti.lamperti_inverse_1d}[(fam, way)]
    out = fn(path, H)
    if out.frame == "T":
        out = lamperti.PathOnGrid(out.points, np.asarray(out.values, dtype=float), "T", out.metadata)
    meta = {k: v for k, v in out.metadata.items() if not k.startswith("config.")}
    meta.pop("value_dtype", None)
    meta.pop("frame", None)
    meta.update(_config_meta(args))
    out = lamperti.PathOnGrid(out.points, out.values, out.frame, meta)
    _emit(field_to_csv(out), args)
    return EXIT_PASS


def _verify_points(args, d):
    pts = parse_points(args.points or f"box:0.5:2:4:{d}")
    return pts.points if isinstance(pts, fields.LatticeGrid) else pts


def _report_out(report: statcheck.TestReport, args) -> int:
    meta = _config_meta(args)
    if args.format == "csv":
        head = "".join(f"# {k}={v}\n" for k, v in meta.items())
        _emit(head + statcheck.reports_to_csv([report]), args)
    else:
        d = report.as_dict()
        d["config"] = {k[len("config."):]: v for k, v in meta.items()}
        _emit(json.dumps(d, sort_keys=True, default=statcheck._json_default) + "\n", args)
    return EXIT_PASS if report.passed else EXIT_FAIL


def cmd_verify(args) -> int:
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(args.seed)))
    check = args.check
    if check in ("self-similar", "stationary"):
        kernel = build_kernel(args)
        if check == "self-similar":
            _require(args, "scale")
            a = lamperti.DiagonalGroupElement(tuple(_floats(args.scale, "scale")))
            if args.model == "fbm-sheet":
                row = _floats(args.claim if args.claim is not None else args.h, "claim")
            elif args.model == "levy-fbm":
                H = float(args.claim if args.claim is not None else args.hurst)
                row = np.full(kernel.d, H / kernel.d)
            else:
                raise UsageError("self-similar checks support fbm-sheet and levy-fbm")
            C = lamperti.CocycleSpec(row[None, :])
            rep = statcheck.check_self_similarity(kernel, a, C, _verify_points(args, kernel.d))
        else:
            _require(args, "shift")
            if args.lamperti:
                if args.model == "fbm-sheet":
                    kernel = lamperti.MssPushforwardKernel(kernel, kernel.h[None, :])
                elif args.model == "levy-fbm":
                    kernel = lamperti.PolarPushforwardKernel(kernel, kernel.H)
                else:
                    raise UsageError("--lamperti applies to fbm-sheet and levy-fbm")
            rep = statcheck.check_stationarity(kernel, _floats(args.shift, "shift"),
                                               _verify_points(args, kernel.d))
        return _report_out(rep, args)
    trials = args.trials
    if check in ("cocycle", "prop6"):
        _require(args, "hurst_matrix")
        C = lamperti.CocycleSpec(_matrix(args.hurst_matrix, "hurst-matrix"))
        d = C.d
        worst = 0.0
        for _ in range(trials):
            if check == "cocycle":
                g1 = lamperti.DiagonalGroupElement(tuple(np.exp(rng.uniform(-1, 1, d))))
                g2 = lamperti.DiagonalGroupElement(tuple(np.exp(rng.uniform(-1, 1, d))))
                worst = max(worst, lamperti.check_cocycle(C, g1, g2))
            else:
                res = lamperti.check_prop6_conditions(C, lamperti.TimeChange("exp-orthant"),
                                                      rng.uniform(-1, 1, d), rng.uniform(-1, 1, d))
                worst = max(worst, res.cond1, res.cond2)
    else:
        _require(args, "hurst_row", "shift_d")
        row = _floats(args.hurst_row, "hurst-row")
        pairs = [(np.exp(rng.uniform(-0.7, 0.7, row.size)), np.exp(rng.uniform(-0.7, 0.7, row.size)))
                 for _ in range(trials)]
        worst = lamperti.check_wmss_shift_equation(row, float(args.shift_d), pairs)
    rep = statcheck.TestReport(check, float(worst), args.tol, "le", None, args.seed,
                               "", {"trials": trials})
    return _report_out(rep, args)


def cmd_estimate(args) -> int:
    rows = []
    if args.target == "crv":
        _require(args, "exponents")
        H = _floats(args.exponents, "exponents")
        slow = (regvar.SlowVaryingSpec.product([_slow_factor(s) for s in args.slow.split(",")])
                if args.slow else regvar.SlowVaryingSpec.constant())
        spec = regvar.CrvfSpec(tuple(H), slow)
        est = regvar.estimate_crv_exponents(spec.log, args.base, args.levels,
                                            np.full(H.size, args.anchor), log_values=True)
        for i, (h, r2) in enumerate(zip(est.H_hat, est.r_squared)):
            rows += [(f"H_hat_{i + 1}", h), (f"r_squared_{i + 1}", r2)]
        dev = float(np.max(np.abs(est.H_hat - H)))
    elif args.target == "radial":
        _require(args, "rho", "x")
        slow = (regvar.SlowVaryingSpec.radial(_slow_factor(args.slow)) if args.slow
                else regvar.SlowVaryingSpec.constant())
        spec = regvar.RrvfSpec(float(args.rho), slow)
        t_grid = args.anchor * args.base ** np.arange(-args.levels, 1)
        rep = regvar.check_radial_variation(spec.log, _floats(args.x, "x"), t_grid, log_values=True)
        rows += [("phi_hat", rep.phi_hat), ("rho_hat", rep.rho_hat), ("converged", int(rep.converged))]
        dev = abs(rep.rho_hat - float(args.rho))
    else:
        _require(args, "gamma", "n_list")
        kernel = _lattice_kernel(args)
        n_list = [int(v) for v in _floats(args.n_list, "n-list")]
        fit = attraction.fit_normalization_exponent(kernel, args.gamma, n_list)
        rows += [("h_hat", fit.h_hat), ("r_squared", fit.r_squared)]
        dev = None
    code = EXIT_PASS
    if args.expect is not None:
        target = _floats(args.expect, "expect")
        got = {"crv": est.H_hat if args.target == "crv" else None,
               "radial": rep.rho_hat if args.target == "radial" else None,
               "normalization": fit.h_hat if args.target == "normalization" else None}[args.target]
        dev = float(np.max(np.abs(np.asarray(got) - target)))
        rows.append(("deviation", dev))
        code = EXIT_PASS if dev <= args.tol_estimate else EXIT_FAIL
    elif dev is not None:
        rows.append(("deviation_from_spec", dev))
    head = "".join(f"# {k}={v}\n" for k, v in _config_meta(args).items())
    body = "quantity,value\n" + "".join(f"{k},{'%.17g' % v}\n" for k, v in rows)
    _emit(head + body, args)
    return code


def _norm_value(args, n):
    if args.normalize in (None, "none"):
        return 1.0
    if args.normalize == "sqrt":
        return math.sqrt(float(np.prod(n)))
    try:
        v = float(args.normalize)
    except ValueError:
        raise UsageError("--normalize is none, sqrt, or a positive number") from None
    return v


def cmd_sumfield(args) -> int:
    _require(args, "seed", "reps", "n", "t_grid")
    kernel = _lattice_kernel(args)
    n = [int(v) for v in _floats(args.n, "n")]
    if args.gamma is not None:
        if len(n) != 1:
            raise UsageError("with --gamma give a single n")
        n = [n[0], attraction._gamma_side(n[0], args.gamma)]
    if len(n) != 2:
        raise UsageError("sumfield works on planar lattices: --n N1,N2")
    cfg = attraction.SumProcessConfig(tuple(n), _matrix(args.t_grid, "t-grid"), args.gamma)
    t = np.asarray(cfg.t_grid)
    f = _norm_value(args, n)
    sums = attraction.simulate_partial_sums(kernel, tuple(n), n, t, args.reps, args.seed)
    vals = attraction.normalized_sum(sums, f)[:, :, 0]
    boxes = cfg.box_sizes()
    rows = []
    for j, (tt, box) in enumerate(zip(t, boxes)):
        prod = vals[:, j] ** 2
        base = dict(n="x".join(map(str, n)), gamma=args.gamma, t=tt[0], s=tt[1])
        rows.append(dict(base, statistic="variance", value=float(prod.mean()),
                         stderr=float(prod.std(ddof=1) / math.sqrt(len(prod)))))
        exact = (attraction.exact_sum_variance(kernel, *box) if np.all(box > 0) else 0.0) / f ** 2
        rows.append(dict(base, statistic="exact_variance", value=exact))
    meta = {"experiment": "sumfield", "n": "x".join(map(str, n)), "normalization": f}
    meta.update(_config_meta(args))
    _emit(experiment_to_csv(rows, meta), args)
    return EXIT_PASS


def cmd_scaletrans(args) -> int:
    _require(args, "gammas", "n_list")
    kernel = _lattice_kernel(args)
    gammas = _floats(args.gammas, "gammas")
    n_list = [int(v) for v in _floats(args.n_list, "n-list")]
    c, C = _floats(args.ratio_window, "ratio-window")
    window = attraction.RatioWindow(c, C)
    report = attraction.scaling_transition_curve(kernel, gammas, n_list)
    rows = []
    for g, h, r2 in zip(report.gammas, report.h_hat, report.r_squared):
        pairs = [(n, attraction._gamma_side(n, g)) for n in n_list]
        ok = attraction.check_ratio_condition(pairs, window)
        if not ok:
            sys.stderr.write(f"warning: ratio condition {c:g} <= m/n <= {C:g} fails for "
                             f"gamma={g:g} (schedule m = [n^{g:g}])\n")
        if h <= 0:
            sys.stderr.write(f"warning: fitted exponent {h:.4g} <= 0 at gamma={g:g}\n")
        rows.append(dict(gamma=g, statistic="h_hat", value=h))
        rows.append(dict(gamma=g, statistic="r_squared", value=r2))
        rows.append(dict(gamma=g, statistic="ratio_condition", value=int(ok)))
    bp = report.breakpoint
    for key in ("gamma_break", "slope_left", "slope_right", "sse_line", "sse_hinge", "sse_ratio"):
        if bp[key] is not None:
            rows.append(dict(statistic=f"breakpoint.{key}", value=float(bp[key])))
    meta = {"experiment": "scaletrans", "kernel": kernel.describe()}
    meta.update(_config_meta(args))
    _emit(experiment_to_csv(rows, meta), args)
    return EXIT_PASS


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _model_options(p):
    p.add_argument("--model", choices=MODELS)
    p.add_argument("--hurst", type=float, help="H for levy-fbm / polar-stationary")
    p.add_argument("--h", help="comma-separated exponents for fbm-sheet")
    p.add_argument("--dim", type=int, default=2, help="dimension for levy-fbm / white-noise")
    p.add_argument("--r1", help="1-D covariance along axis 1: geometric:rho, fgn:H, white")
    p.add_argument("--r2", help="1-D covariance along axis 2")
    p.add_argument("--q", type=float, help="decay exponent of lattice-isotropic-lrd")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lampfield", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="key=value file supplying defaults")
        p.add_argument("--out", default="-", help="output path ('-' for stdout)")
        p.set_defaults(func=func)
        return p

    p = add("simulate", cmd_simulate, "sample a Gaussian field to CSV")
    _model_options(p)
    p.add_argument("--grid", help="integer lattice NxM")
    p.add_argument("--points", help="grid:NxM | circle:K | box:a:b:k[:d] | list:x,y;x,y")
    p.add_argument("--reps", type=int)
    p.add_argument("--seed", type=int)

    p = add("transform", cmd_transform, "apply a Lamperti transform to a field CSV")
    p.add_argument("direction", nargs="?", choices=DIRECTIONS)
    p.add_argument("--in", dest="input", help="input CSV ('-' for stdin)")
    p.add_argument("--hurst", help="H (scalar) or Hurst matrix 'a,b;c,d' for mss")

    p = add("verify", cmd_verify, "run a kernel-level or algebraic check")
    p.add_argument("check", nargs="?", choices=CHECKS)
    _model_options(p)
    p.add_argument("--scale", help="group element a, comma-separated")
    p.add_argument("--claim", help="exponent(s) to test instead of the model's own")
    p.add_argument("--shift", help="shift h, comma-separated")
    p.add_argument("--lamperti", action="store_true", help="check the transformed (stationary) kernel")
    p.add_argument("--points", help="point spec (default box:0.5:2:4)")
    p.add_argument("--hurst-matrix", help="Hurst matrix 'a,b;c,d'")
    p.add_argument("--hurst-row", help="one row of a Hurst matrix")
    p.add_argument("--shift-d", type=float, help="D_j of the shift equation")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--tol", type=float, default=1e-12)
    p.add_argument("--seed", type=int, default=0, help="seed of the randomized trials")
    p.add_argument("--format", choices=("jsonl", "csv"), default="jsonl")

    p = add("estimate", cmd_estimate, "estimate exponents")
    p.add_argument("target", nargs="?", choices=("crv", "radial", "normalization"))
    _model_options(p)
    p.add_argument("--exponents", help="true exponents of the test function")
    p.add_argument("--slow", help="slow factors: constant:c, log:p, loglog:p (comma per axis)")
    p.add_argument("--rho", type=float)
    p.add_argument("--x", help="direction for the radial check")
    p.add_argument("--anchor", type=float, default=1e50)
    p.add_argument("--levels", type=int, default=16)
    p.add_argument("--base", type=float, default=2.0)
    p.add_argument("--gamma", type=float)
    p.add_argument("--n-list", help="comma-separated n values")
    p.add_argument("--expect", help="expected value(s); exit 1 when off by more than --tol-estimate")
    p.add_argument("--tol-estimate", type=float, default=0.02)

    p = add("sumfield", cmd_sumfield, "Monte Carlo partial sums of a lattice field")
    _model_options(p)
    p.add_argument("--n", help="lattice size N1,N2 (or N with --gamma)")
    p.add_argument("--gamma", type=float)
    p.add_argument("--t-grid", help="points 't,s;t,s'")
    p.add_argument("--normalize", default="none", help="none | sqrt | positive number")
    p.add_argument("--reps", type=int)
    p.add_argument("--seed", type=int)

    p = add("scaletrans", cmd_scaletrans, "sweep gamma and fit h_hat(gamma)")
    _model_options(p)
    p.add_argument("--gammas", default="0.5,1,2")
    p.add_argument("--n-list", default="16,32,64,128,256,512")
    p.add_argument("--ratio-window", default="0.5,2")
    return parser


def _load_config(path) -> dict:
    out = {}
    try:
        with open(path) as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    for num, line in enumerate(lines, 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, val = line.partition("=")
        if not sep:
            raise UsageError(f"{path}:{num}: expected key=value")
        out[key.strip()] = val.strip()
    return out


def _find_subparser(parser, name):
    for action in parser._subparsers._group_actions:
        if name in action.choices:
            return action.choices[name]
    return None


def _apply_config(parser, argv) -> list:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if known.config is None:
        return argv
    cfg = _load_config(known.config)
    command = cfg.pop("command", None)
    names = [a for a in argv if not a.startswith("-")]
    sub_name = names[0] if names and _find_subparser(parser, names[0]) else None
    if sub_name is None:
        if command is None:
            raise UsageError("no subcommand given on the command line or in the config")
        argv = [command] + list(argv)
        sub_name = command
    elif command is not None and command != sub_name:
        raise UsageError(f"config is for '{command}', not '{sub_name}'")
    sub = _find_subparser(parser, sub_name)
    if sub is None:
        raise UsageError(f"unknown command {sub_name!r}")
    dests = {a.dest: a for a in sub._actions}
    defaults = {}
    for key, val in cfg.items():
        dest = key.replace("-", "_")
        if key == "in":
            dest = "input"
        if dest not in dests or dest in ("help", "config"):
            raise UsageError(f"unknown config key {key!r} for '{sub_name}'")
        action = dests[dest]
        if isinstance(action, argparse._StoreTrueAction):
            defaults[dest] = val.lower() in ("1", "true", "yes")
        else:
            try:
                defaults[dest] = action.type(val) if action.type else val
            except ValueError:
                raise UsageError(f"config key {key!r}: bad value {val!r}") from None
            if action.choices is not None and defaults[dest] not in action.choices:
                raise UsageError(f"config key {key!r}: {val!r} not in {list(action.choices)}")
    sub.set_defaults(**defaults)
    return argv


def main(argv=None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        argv = _apply_config(parser, argv)
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help(sys.stderr)
            return EXIT_USAGE
        for pos in ("direction", "check", "target"):
            if hasattr(args, pos) and getattr(args, pos) is None:
                raise UsageError(f"missing {pos}")
        return args.func(args)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    except NumericError as exc:
        sys.stderr.write(f"lampfield: numeric failure: {exc}\n")
        return EXIT_NUMERIC
    except (LampfieldError, ValueError, IndexError) as exc:
        sys.stderr.write(f"lampfield: error: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
