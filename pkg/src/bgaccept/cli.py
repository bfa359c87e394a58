"""Batch command line: ``bgaccept <subcommand> [flags]``.

Tables go to stdout (or ``--out``) as CSV with a header row and floats in
17 significant digits. Exit status is 0 on success, 1 on invalid input and
2 on numerical failure. ``--config FILE`` reads ``key=value`` lines that
preset flags of the chosen subcommand; explicit flags win.
"""

import argparse
import csv
import io
import math
import sys

import numpy as np

from . import conic, distortion, lucas, manifold, regression
from .bg_core import GainLossMoments, params_from_moments
from .datasets import load_moments, load_risk_neutral, load_sample
from .errors import NumericalError, ValidationError

FIT_METHODS = ("quantile-linear", "quantile-gpr", "distorted-linear", "distorted-gpr")
RISK_FEATURES = ("sigma_p", "mu_n", "sigma_n")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(f"{self.prog}: {message}")


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return str(v)


def _write_table(out, header, rows):
    w = csv.writer(out, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])


# ---------------------------------------------------------------- subcommands


def _moment_matrix(records):
    x = np.array([[r.moments.sigma_p, r.moments.mu_n, r.moments.sigma_n] for r in records])
    y = np.array([r.moments.mu_p for r in records])
    return regression.Dataset(x, y)


def _cmd_fit_bounds(args, out):
    records = load_moments(args.data)
    data = _moment_matrix(records)
    if args.method.endswith("gpr") and args.seed is None:
        raise ValidationError("--seed is required for GPR fits (random restarts)")
    if args.method.startswith("quantile"):
        objective = regression.QuantileObjective(args.tau)
        if args.method == "quantile-linear":
            model = regression.fit_quantile_linear(data, args.tau)
        else:
            base = regression.fit_gpr(data, seed=args.seed)
            model = regression.adjust_gpr_coefficients(base, data, objective)
    else:
        dist = distortion.MinMaxVar(args.gamma)
        if args.method == "distorted-linear":
            model = regression.fit_distorted_ls(data, dist, args.side)
        else:
            base = regression.fit_gpr(data, seed=args.seed)
            model = regression.adjust_gpr_coefficients(
                base, data, regression.DistortedObjective(dist, args.side)
            )
    if isinstance(model, regression.LinearBoundary):
        rows = [("intercept", model.intercept)] + list(zip(RISK_FEATURES, model.coefficients))
        _write_table(out, ("term", "value"), rows)
        return
    rows = []
    for rec, x in zip(records, data.inputs):
        grad = regression.boundary_gradient(model, x)
        rows.append((rec.ticker, rec.date.isoformat(), regression.predict(model, x), *grad))
    _write_table(out, ("ticker", "date", "boundary", *(f"d_{f}" for f in RISK_FEATURES)), rows)


def _cmd_quantize(args, out):
    records = load_moments(args.data)
    data = np.array([r.moments.as_tuple() for r in records])
    q = manifold.quantize(data, k=args.k, seed=args.seed)
    rows = [(*pt, w) for pt, w in zip(q.points, q.weights)]
    _write_table(out, ("mu_p", "sigma_p", "mu_n", "sigma_n", "weight_pct"), rows)


def _cmd_spectrum(args, out):
    records = load_moments(args.data)
    data = np.array([r.moments.as_tuple() for r in records])
    standardize = not args.raw
    if args.method == "pca":
        rep = manifold.pca_spectrum(data, standardize=standardize)
    else:
        eps = args.epsilon if args.epsilon == "auto" else _positive_float(args.epsilon)
        rep = manifold.diffusion_spectrum(data, epsilon=eps, standardize=standardize)
    rows = [(i + 1, ev, cw) for i, (ev, cw) in enumerate(zip(rep.eigenvalues, rep.cumulative_weights))]
    _write_table(out, ("index", "eigenvalue", "cumulative_weight_pct"), rows)


def _parse_grid(text):
    parts = text.split(":")
    if len(parts) != 3:
        raise ValidationError("--grid must look like a:b:n")
    try:
        a, b, n = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise ValidationError(f"cannot parse --grid {text!r}") from None
    if n < 1:
        raise ValidationError("--grid needs n >= 1")
    return np.linspace(a, b, n)


def _cmd_lucas(args, out):
    m = GainLossMoments(args.mu_p, args.sigma_p, args.mu_n, args.sigma_n)
    cfg = lucas.LucasConfig(m, args.rho, args.beta, args.s0, args.paths, args.seed)
    if args.sweep is None:
        if args.grid is not None:
            raise ValidationError("--grid only makes sense with --sweep")
        est = lucas.equilibrium_rate(cfg)
        _write_table(out, ("rate", "standard_error", "clipped_paths"), [(est.rate, est.rate_se, est.n_clipped)])
        return
    if args.grid is None:
        raise ValidationError("--sweep needs --grid a:b:n")
    rows = lucas.equilibrium_sweep(cfg, args.sweep, _parse_grid(args.grid))
    _write_table(out, ("parameter_value", "rate", "standard_error"), rows)


def _split_interval(b_hat, ratio, c_p, split):
    """Place ``b_hat`` inside an interval whose valuation spread equals ``ratio``.

    The lower end carries ``ratio^split`` of the spread and the upper end
    the rest, so ``split = 0.5`` divides it symmetrically on the log scale.
    """
    if not 0 <= split <= 1:
        raise ValidationError("--split must lie in [0, 1]")
    if ratio == 1.0:
        return b_hat, b_hat
    b_low = 1.0 - (1.0 - b_hat) * ratio ** (-split / c_p)
    if not b_low > 0:
        raise ValidationError(f"ratio {ratio} pushes b_low to {b_low:.6g}")
    b_high = conic.solve_upper_scale(b_low, ratio, c_p)
    # rounding can push the ends a hair past b_hat when a side gets no spread
    return min(b_low, b_hat), max(b_high, b_hat)


def _cmd_conic_check(args, out):
    records = load_risk_neutral(args.data)
    if args.ticker:
        records = [r for r in records if r.ticker in set(args.ticker)]
    if args.date_from:
        records = [r for r in records if r.date.isoformat() >= args.date_from]
    if args.date_to:
        records = [r for r in records if r.date.isoformat() <= args.date_to]
    d = conic.LevyDistortionPair(args.c, args.gamma)
    rows = []
    nan = float("nan")
    for rec in records:
        p = rec.params
        row = {"b_low": nan, "b_high": nan, "gamma_tilde": nan, "c_tilde": nan, "kappa_p": nan,
               "member_low": "", "member_high": "", "note": ""}
        try:
            if p.b_p >= 1:
                raise ValidationError("b_p >= 1")
            b_low, b_high = _split_interval(p.b_p, args.ratio, p.c_p, args.split)
            iv = conic.ScaleInterval(p.b_p, b_low, b_high, p.c_p)
            row.update(b_low=b_low, b_high=b_high, gamma_tilde=conic.gamma_tilde(iv))
            row.update(member_low=conic.check_membership(iv, b_low, d),
                       member_high=conic.check_membership(iv, b_high, d))
            row["c_tilde"] = conic.c_tilde(iv)
            if args.gamma > row["gamma_tilde"]:
                row["kappa_p"] = conic.kappa_p(iv, args.gamma)
            else:
                row["note"] = "gamma <= gamma_tilde"
        except ValidationError as exc:
            row["note"] = str(exc).replace(",", ";")
        rows.append((rec.ticker, rec.date.isoformat(), p.b_p, row["b_low"], row["b_high"], row["gamma_tilde"],
                     row["c_tilde"], row["kappa_p"], row["member_low"], row["member_high"], row["note"]))
    header = ("ticker", "date", "b_hat", "b_low", "b_high", "gamma_tilde", "c_tilde", "kappa_p",
              "member_low", "member_high", "note")
    _write_table(out, header, rows)


def _cmd_bg_stats(args, out):
    if (args.data is None) == (args.sample is None):
        raise ValidationError("give exactly one of --data (moments) or --sample (returns)")
    if args.data is not None:
        rows = []
        for rec in load_moments(args.data):
            p = params_from_moments(rec.moments)
            rows.append((rec.ticker, rec.date.isoformat(), *p.as_tuple(),
                         distortion.sharpe_ratio(rec.moments, args.horizon)))
        _write_table(out, ("ticker", "date", "b_p", "c_p", "b_n", "c_n", "sharpe"), rows)
        return
    x = np.asarray(load_sample(args.sample))
    d = distortion.MinMaxVar(args.gamma)
    rows = [(
        x.size, float(np.mean(x)),
        distortion.distorted_expectation(x, d, "lower"),
        distortion.distorted_expectation(x, d, "upper"),
        distortion.acceptability_index(x, "long"),
        distortion.acceptability_index(x, "short"),
    )]
    header = ("n", "mean", "lower_distorted", "upper_distorted", "acceptability_long", "acceptability_short")
    _write_table(out, header, rows)


# ---------------------------------------------------------------- parser


def _positive_float(text):
    try:
        v = float(text)
    except ValueError:
        raise ValidationError(f"not a number: {text!r}") from None
    if not (v > 0 and math.isfinite(v)):
        raise ValidationError(f"expected a positive number, got {text!r}")
    return v


def build_parser():
    parser = _Parser(prog="bgaccept", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(func=func)
        p.add_argument("--config", help="key=value file presetting flags")
        p.add_argument("--out", help="write the table here instead of stdout")
        return p

    p = add("fit-bounds", _cmd_fit_bounds, "fit compensation boundaries on a moments file")
    p.add_argument("--data", required=True)
    p.add_argument("--method", choices=FIT_METHODS, required=True)
    p.add_argument("--tau", type=float, default=0.95)
    p.add_argument("--gamma", type=float, default=0.5)
    p.add_argument("--side", choices=distortion.SIDES, default="lower")
    p.add_argument("--seed", type=int)

    p = add("quantize", _cmd_quantize, "representative points of a moments file")
    p.add_argument("--data", required=True)
    p.add_argument("--k", type=int, default=manifold.DEFAULT_K)
    p.add_argument("--seed", type=int, required=True)

    p = add("spectrum", _cmd_spectrum, "PCA or diffusion-map eigenvalue weights")
    p.add_argument("--data", required=True)
    p.add_argument("--method", choices=("pca", "diffusion"), default="pca")
    p.add_argument("--epsilon", default="auto")
    p.add_argument("--raw", action="store_true", help="skip standardisation of the moments")

    p = add("lucas", _cmd_lucas, "Monte-Carlo equilibrium rate and parameter sweeps")
    p.add_argument("--mu-p", type=float, default=0.03)
    p.add_argument("--sigma-p", type=float, default=0.01)
    p.add_argument("--mu-n", type=float, default=0.03)
    p.add_argument("--sigma-n", type=float, default=0.01)
    p.add_argument("--rho", type=float, default=0.1)
    p.add_argument("--beta", type=float, default=0.01)
    p.add_argument("--s0", type=float, default=1.0)
    p.add_argument("--paths", type=int, default=100_000)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--sweep", choices=lucas.SWEEP_PARAMETERS)
    p.add_argument("--grid")

    p = add("conic-check", _cmd_conic_check, "acceptance conditions on a risk-neutral file")
    p.add_argument("--data", required=True)
    p.add_argument("--ratio", type=float, required=True)
    p.add_argument("--c", type=float, required=True)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--split", type=float, default=0.5)
    p.add_argument("--ticker", action="append")
    p.add_argument("--date-from")
    p.add_argument("--date-to")

    p = add("bg-stats", _cmd_bg_stats, "moment maps, Sharpe ratios, acceptability indices")
    p.add_argument("--data")
    p.add_argument("--sample")
    p.add_argument("--gamma", type=float, default=0.5)
    p.add_argument("--horizon", type=float, default=250.0)
    return parser


def _read_config(path):
    pairs = []
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise ValidationError(f"cannot open config {path}: {exc.strerror}") from exc
    with fh:
        for n, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValidationError(f"{path}, line {n}: expected key=value")
            key, value = (s.strip() for s in line.split("=", 1))
            pairs.append((n, key.replace("_", "-"), value))
    return pairs


def _config_tokens(subparser, pairs, path):
    # turn config pairs into argv tokens placed before the explicit flags
    actions = {opt: a for a in subparser._actions for opt in a.option_strings}
    tokens = []
    for n, key, value in pairs:
        action = actions.get(f"--{key}")
        if action is None or key in ("config", "help"):
            raise ValidationError(f"{path}, line {n}: unknown key {key!r}")
        if isinstance(action, argparse._StoreTrueAction):
            if value.lower() in ("1", "true", "yes"):
                tokens.append(f"--{key}")
            elif value.lower() not in ("0", "false", "no"):
                raise ValidationError(f"{path}, line {n}: {key} expects true/false")
        else:
            tokens.extend([f"--{key}", value])
    return tokens


def _config_path(argv):
    for i, tok in enumerate(argv):
        if tok == "--config" and i + 1 < len(argv):
            return argv[i + 1]
        if tok.startswith("--config="):
            return tok.split("=", 1)[1]
    return None


def parse_args(argv):
    parser = build_parser()
    path = _config_path(argv)
    choices = parser._subparsers._group_actions[0].choices
    if path is not None and argv and argv[0] in choices:
        tokens = _config_tokens(choices[argv[0]], _read_config(path), path)
        argv = [argv[0], *tokens, *argv[1:]]
    return parser.parse_args(argv)


def run_subcommand(argv) -> int:
    """Run one invocation; returns the process exit code."""
    try:
        args = parse_args(list(argv))
        buf = io.StringIO()
        args.func(args, buf)
        if args.out:
            with open(args.out, "w", encoding="utf-8", newline="") as fh:
                fh.write(buf.getvalue())
        else:
            sys.stdout.write(buf.getvalue())
        return 0
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (NumericalError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main():
    sys.exit(run_subcommand(sys.argv[1:]))


if __name__ == "__main__":
    main()
