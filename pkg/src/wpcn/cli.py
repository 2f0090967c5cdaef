"""Command-line front end.

Exit codes: 0 on success, 1 for usage, config and I/O errors, 2 when a
solver does not converge (or an oracle check fails).
"""

import argparse
import io
import math
import sys

from . import experiments
from .config import ConfigError, build_config, load_config, override_pairs, parse_pairs
from .model import ChannelState

EXIT_OK, EXIT_USAGE, EXIT_SOLVER = 0, 1, 2
VERIFY_TOL = 1e-2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def fmt(x):
    """Nine significant digits, locale independent."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".9g")


def _csv(header, rows, trailer=()):
    buf = io.StringIO(newline="")
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(v if isinstance(v, str) else fmt(v) for v in row) + "\n")
    for line in trailer:
        buf.write(line + "\n")
    return buf.getvalue()


def _emit(text, out, summary):
    """CSV to ``out`` (or stdout); the summary goes to stdout only with ``out``."""
    if out is None:
        sys.stdout.write(text)
        return
    try:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise ConfigError(f"cannot write output file {out}: {exc.strerror}") from None
    if summary:
        print(summary)


def _floats(text, name):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"--{name} expects comma-separated numbers") from None


def _config(args):
    if args.config is None:
        return build_config(parse_pairs(override_pairs(args.set), "--set"))
    return load_config(args.config, args.set)


def _add_common(p):
    p.add_argument("--config", help="key = value configuration file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override one configuration key (repeatable)")
    p.add_argument("--out", help="write the CSV here instead of stdout")


def build_parser():
    parser = _Parser(prog="wpcn", description="FD/HD WPCN time and power allocation")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("solve", help="solve one instance")
    _add_common(p)
    p.add_argument("--mode", default="fd-perfect", choices=experiments.MODES)
    p.add_argument("--realization", type=int, default=0, help="index of the channel draw")
    p.add_argument("--gains", help="inline combined gains H_1,...,H_K")
    p.add_argument("--alpha", help="inline normalized gains alpha_1,...,alpha_K")

    p = sub.add_parser("rate-region", help="two-user rate region by weight sweep")
    _add_common(p)
    p.add_argument("--mode", default="fd-perfect", choices=experiments.MODES)
    p.add_argument("--points", type=int, help="number of weights (default from config)")
    p.add_argument("--realization", type=int, default=0)
    p.add_argument("--no-filter", action="store_true", help="keep dominated points")

    p = sub.add_parser("monte-carlo", help="average sum-rate curves")
    _add_common(p)
    p.add_argument("--modes", help="comma-separated modes (default from config)")

    p = sub.add_parser("verify", help="compare solvers with the grid oracles")
    p.add_argument("--instances", type=int, default=10)
    p.add_argument("--grid", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    return parser


def _channels(args, cfg, params):
    if args.gains and args.alpha:
        raise UsageError("give either --gains or --alpha, not both")
    if args.gains:
        h = _floats(args.gains, "gains")
        if len(h) != params.num_users:
            raise UsageError(f"--gains lists {len(h)} values for {params.num_users} users")
        return ChannelState.from_gains(h, params)
    if args.alpha:
        a = _floats(args.alpha, "alpha")
        if len(a) != params.num_users:
            raise UsageError(f"--alpha lists {len(a)} values for {params.num_users} users")
        return ChannelState.from_alpha(a, params)
    return ChannelState.from_gains(experiments.draw_gains(cfg, args.realization), params)


def cmd_solve(args):
    cfg = _config(args)
    params = cfg.system_params()
    ch = _channels(args, cfg, params)
    res = experiments.solve_mode(args.mode, params, ch)
    alloc = res.allocation
    rows = [[str(i), t, p, e] for i, (t, p, e) in
            enumerate(zip(alloc.tau, alloc.power, alloc.energy))]
    text = _csv(["slot", "tau", "power", "energy"], rows, [f"# wsr={fmt(res.wsr)}"])
    summary = f"{args.mode}: wsr={fmt(res.wsr)} converged={res.converged}"
    if args.mode == "hd":
        summary += f" P*={fmt(alloc.power[0])}"
    _emit(text, args.out, summary)
    return EXIT_OK if res.converged else EXIT_SOLVER


def cmd_rate_region(args):
    cfg = _config(args)
    if cfg.num_users != 2:
        raise UsageError("rate-region needs num_users = 2")
    params = cfg.system_params()
    ch = ChannelState.from_gains(experiments.draw_gains(cfg, args.realization), params)
    m = args.points or cfg.rate_region_points
    if m < 2:
        raise UsageError("--points must be at least 2")
    pts = experiments.rate_region(params, ch, args.mode, m)
    if not args.no_filter:
        pts = experiments.pareto_filter(pts)
    text = _csv(["w1", "r1_bps_hz", "r2_bps_hz"], [[p.w1, p.r1, p.r2] for p in pts])
    _emit(text, args.out, f"{args.mode}: {len(pts)} points")
    return EXIT_OK


def cmd_monte_carlo(args):
    cfg = _config(args)
    modes = tuple(m.strip() for m in args.modes.split(",")) if args.modes else cfg.modes
    bad = [m for m in modes if m not in experiments.MODES]
    if bad:
        raise UsageError(f"unknown mode(s) {', '.join(bad)}")
    rows = experiments.monte_carlo_sweep(cfg, modes)
    axes = [name for name, _ in experiments.sweep_axes(cfg)]
    header = ["p_avg_dbm", "mode", "mean_sumrate_bps_hz", "stderr", "realizations"] + axes
    body = [[r.p_avg_dbm, r.mode, r.mean, r.stderr, str(r.realizations)]
            + [r.extra[a] if not isinstance(r.extra[a], int) else str(r.extra[a]) for a in axes]
            for r in rows]
    text = _csv(header, body)
    n_cells = len(modes) * max(1, len(cfg.sweep_p_avg_dbm))
    for _, values in experiments.sweep_axes(cfg):
        n_cells *= len(values)
    _emit(text, args.out, f"{len(rows)} of {n_cells} cells, {cfg.realizations} realizations")
    if len(rows) < n_cells:
        print(f"warning: {n_cells - len(rows)} cells dropped (fewer than 95% of solves "
              "succeeded)", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


def cmd_verify(args):
    if args.instances < 1:
        raise UsageError("--instances must be positive")
    if args.grid < 10:
        raise UsageError("--grid must be at least 10")
    checks = experiments.oracle_comparison(args.instances, args.grid, args.seed)
    ok = [abs(c.difference) <= VERIFY_TOL for c in checks]
    body = [[str(c.instance), c.mode, c.solver_wsr, c.oracle_wsr, c.difference,
             "pass" if good else "fail"] for c, good in zip(checks, ok)]
    text = _csv(["instance", "mode", "solver_wsr", "oracle_wsr", "difference", "status"], body)
    _emit(text, args.out, f"{sum(ok)} of {len(ok)} checks within {fmt(VERIFY_TOL)}")
    return EXIT_OK if all(ok) else EXIT_SOLVER


COMMANDS = {
    "solve": cmd_solve,
    "rate-region": cmd_rate_region,
    "monte-carlo": cmd_monte_carlo,
    "verify": cmd_verify,
}


def run(argv=None):
    """Parse ``argv`` and run one subcommand; returns the exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("wpcn: a subcommand is required (solve, rate-region, "
                             "monte-carlo, verify)")
        return COMMANDS[args.command](args)
    except SystemExit as exc:
        # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ArithmeticError, RuntimeError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ValueError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
