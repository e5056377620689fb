"""Command-line front end: ``patchhopf <subcommand> [options]``.

Every subcommand is a thin adapter over a library call and the library's own
writer, so files produced here match those written from Python byte for byte.
Exit codes: 0 success, 1 domain error, 2 usage error. Errors are printed as
one line, ``error: <code>: <detail>``.
"""

from __future__ import annotations

import argparse
import os
import sys
from contextlib import contextmanager
from dataclasses import replace

import numpy as np

from . import charroots, dde, equilibrium, network, spectral
from ._io import csv_writer, fmt, open_text, write_json
from .errors import PatchHopfError

FIGURES = ("1", "2L", "2R", "3", "4", "5")

# Settings for the figure recipes: (d, r, t_end). The 100-patch pattern runs
# give d only; their delay defaults to 10% above the computed first Hopf delay.
FIGURE_RUNS = {
    "2L": (0.5, 0.087, 50.0),
    "2R": (10.0, 0.15, 50.0),
    "3": (0.5, 0.09, 50.0),
    "4": (10.0, None, 50.0),
    "5": (15.0, None, 50.0),
}
PATTERN_DELAY_FACTOR = 1.1


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _positive_int(text):
    value = int(text)
    if value <= 0:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--net", default="paper9", help="network JSON path, 'paper9' or 'grid:RxC:coupling'")
    common.add_argument("--m-file", help="growth rates for grid networks")
    common.add_argument("--d", type=float, help="dispersal rate")
    common.add_argument("--r", type=float, help="delay")
    common.add_argument("--d-min", type=float, default=1e-3)
    common.add_argument("--d-max", type=float, default=1e3)
    common.add_argument("--d-steps", type=_positive_int, default=61, help="log-spaced grid size")
    common.add_argument("--t-end", type=float, default=50.0)
    common.add_argument("--steps-per-delay", type=int, default=dde.DEFAULT_STEPS_PER_DELAY)
    common.add_argument("--grid-size", type=int, default=512, help="initial theta grid for root scans")
    common.add_argument("--history-file", help="constant history vector (JSON list or text)")
    common.add_argument("--out", help="output file (default: stdout)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--jobs", type=_positive_int, default=os.cpu_count() or 1)
    common.add_argument("--seed", type=int, default=0, help="seed for randomized probes")
    common.add_argument("--patch", type=_positive_int, default=1, help="1-based patch for period estimates")
    common.add_argument("--t-skip", type=float, help="transient to discard (default: t_end / 2)")
    common.add_argument("--lambda-max", type=float, default=2.0, help="spectral curve upper end")
    common.add_argument("--lambda-steps", type=_positive_int, default=101)
    common.add_argument("--pattern", action="store_true", help="simulate: write the pattern matrix only")

    parser = _Parser(prog="patchhopf", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, helptext in (
        ("validate", "check a network and print its summary"),
        ("spectral", "spectral bound s(lambda) on a lambda grid"),
        ("lambda-star", "extinction threshold lambda_* and d_* (needs sum(m) < 0)"),
        ("equilibrium", "positive equilibrium at --d"),
        ("equilibrium-sweep", "equilibrium branch over the d grid"),
        ("hopf", "all purely imaginary roots at --d with their first delays"),
        ("hopf-sweep", "Hopf curves over the d grid"),
        ("transversality", "crossing speed at the first Hopf point at --d"),
        ("simulate", "integrate the delayed model at (--d, --r)"),
        ("verdict", "converges / oscillates / undecided at (--d, --r)"),
        ("period", "period and amplitude of a simulated run"),
        ("probe", "random-network spectral derivative probe (uses --seed)"),
    ):
        sub.add_parser(name, parents=[common], help=helptext)
    fig = sub.add_parser("reproduce-fig", parents=[common], help="bundled figure recipes")
    fig.add_argument("figure", choices=FIGURES)
    return parser


@contextmanager
def _output(args):
    if args.out:
        with open_text(args.out) as fh:
            yield fh
    else:
        yield sys.stdout


def _need(args, *names):
    for name in names:
        if getattr(args, name) is None:
            raise UsageError(f"--{name.replace('_', '-')} is required for {args.command}")


def _d_grid(args):
    if not 0 < args.d_min < args.d_max:
        raise UsageError("need 0 < --d-min < --d-max")
    return np.geomspace(args.d_min, args.d_max, args.d_steps)


def _history(args):
    return None if args.history_file is None else network.read_vector(args.history_file)


def _emit_table(args, header, rows, json_obj):
    with _output(args) as fh:
        if args.format == "json":
            write_json(json_obj, fh)
        else:
            w = csv_writer(fh)
            w.writerow(header)
            for row in rows:
                w.writerow([fmt(x) if isinstance(x, float) else x for x in row])


def cmd_validate(args, net):
    report = network.validate(net)
    obj = {"ok": report.ok, "n": net.n, "delta": net.delta, "edges": len(net.edges)}
    _emit_table(args, ["ok", "n", "delta", "edges"], [[report.ok, net.n, net.delta, len(net.edges)]], obj)


def cmd_spectral(args, net):
    grid = np.linspace(0.0, args.lambda_max, args.lambda_steps)
    points = spectral.spectral_curve(net, grid)
    with _output(args) as fh:
        if args.format == "json":
            write_json(spectral.spectral_to_json(points), fh)
        else:
            spectral.write_spectral_csv(points, fh)


def cmd_lambda_star(args, net):
    th = spectral.lambda_star(net)
    obj = {
        "lambda_star": th.lambda_star, "d_star": th.d_star,
        "s_prime": th.s_prime_at_star, "eta_hat": th.eta_hat.tolist(),
    }
    _emit_table(
        args, ["lambda_star", "d_star", "s_prime"],
        [[th.lambda_star, th.d_star, th.s_prime_at_star]], obj,
    )


def _write_branch(args, states):
    with _output(args) as fh:
        if args.format == "json":
            write_json(equilibrium.branch_to_json(states), fh)
        else:
            equilibrium.write_branch_csv(states, fh)


def cmd_equilibrium(args, net):
    _need(args, "d")
    _write_branch(args, [equilibrium.equilibrium(net, args.d)])


def cmd_equilibrium_sweep(args, net):
    _write_branch(args, equilibrium.branch_sweep(net, _d_grid(args)))


def _write_points(args, points):
    with _output(args) as fh:
        if args.format == "json":
            write_json(charroots.hopf_to_json(points), fh)
        else:
            charroots.write_hopf_csv(points, fh)


def cmd_hopf(args, net):
    _need(args, "d")
    _write_points(args, charroots.hopf_scan(net, args.d, args.grid_size))


def cmd_hopf_sweep(args, net):
    curves = charroots.hopf_curves_sweep(net, _d_grid(args), args.grid_size, jobs=args.jobs)
    with _output(args) as fh:
        if args.format == "json":
            charroots.write_curves_json(curves, fh)
        else:
            points = [
                replace(hp, branch=c.branch) for c in curves for _, hp in c.samples
            ]
            charroots.write_hopf_csv(points, fh)


def cmd_transversality(args, net):
    _need(args, "d")
    hp = charroots.first_hopf(net, args.d, args.grid_size)
    fd, closed = charroots.crossing_speed(net, args.d, hp)
    fd_out = float("nan") if fd is None else fd
    obj = {"d": hp.d, "r": hp.r, "theta": hp.theta, "nu": hp.nu,
           "finite_difference": fd, "closed_form": closed, "transversal": hp.transversal}
    _emit_table(
        args, ["d", "r", "theta", "nu", "finite_difference", "closed_form", "transversal"],
        [[hp.d, hp.r, hp.theta, hp.nu, fd_out, closed, hp.transversal]], obj,
    )


def _simulate(args, net):
    _need(args, "d", "r")
    return dde.simulate(net, args.d, args.r, _history(args), args.t_end, args.steps_per_delay)


def _write_trajectory(args, traj):
    with _output(args) as fh:
        if args.pattern:
            dde.pattern_export(traj, fh)
        elif args.format == "json":
            write_json(dde.trajectory_to_json(traj), fh)
        else:
            dde.write_trajectory_csv(traj, fh)


def cmd_simulate(args, net):
    _write_trajectory(args, _simulate(args, net))


def cmd_verdict(args, net):
    _need(args, "d", "r")
    verdict = dde.stability_verdict(net, args.d, args.r, args.t_end, args.steps_per_delay)
    _emit_table(args, ["d", "r", "horizon", "verdict"], [[args.d, args.r, args.t_end, verdict]],
                {"d": args.d, "r": args.r, "horizon": args.t_end, "verdict": verdict})


def _write_period(args, est):
    obj = {"period": est.period, "amplitude": est.amplitude, "n_peaks": est.n_peaks,
           "peak_spacing_cv": est.peak_spacing_cv}
    _emit_table(args, list(obj), [list(obj.values())], obj)


def cmd_period(args, net):
    traj = _simulate(args, net)
    t_skip = args.t_end / 2 if args.t_skip is None else args.t_skip
    _write_period(args, dde.estimate_period(traj, args.patch, t_skip))


def cmd_probe(args, net):
    rng = np.random.default_rng(args.seed)
    rows, obj = [], []
    for i in range(20):
        rnet = network.random_network(int(rng.integers(2, 7)), rng)
        lam = float(rng.uniform(0.1, 2.0))
        h = 1e-5 * max(1.0, lam)
        pt = spectral.spectral_bound(rnet, lam)
        fd = (spectral.spectral_bound(rnet, lam + h).s - spectral.spectral_bound(rnet, lam - h).s) / (2 * h)
        rows.append([i, rnet.n, lam, pt.s_prime, fd])
        obj.append({"index": i, "n": rnet.n, "lambda": lam, "s_prime": pt.s_prime, "finite_difference": fd})
    _emit_table(args, ["index", "n", "lambda", "s_prime", "finite_difference"], rows, obj)


def cmd_reproduce_fig(args, net):
    fig = args.figure
    if fig == "1":
        with _output(args) as fh:
            network.save(network.paper_network_9(), fh)
        return
    d, r, t_end = FIGURE_RUNS[fig]
    if fig in ("4", "5"):
        if args.net == "paper9":
            raise UsageError(f"figure {fig} needs --net grid:10x10:<coupling> (or a file) and --m-file")
        r = args.r
        if r is None:
            r = PATTERN_DELAY_FACTOR * charroots.first_hopf(net, d, args.grid_size).r
        traj = dde.simulate(net, d, r, _history(args), args.t_end, args.steps_per_delay)
        with _output(args) as fh:
            dde.pattern_export(traj, fh)
        return
    traj = dde.simulate(
        network.paper_network_9(), d, r, _history(args), t_end, args.steps_per_delay
    )
    _write_trajectory(args, traj)


COMMANDS = {
    "validate": cmd_validate,
    "spectral": cmd_spectral,
    "lambda-star": cmd_lambda_star,
    "equilibrium": cmd_equilibrium,
    "equilibrium-sweep": cmd_equilibrium_sweep,
    "hopf": cmd_hopf,
    "hopf-sweep": cmd_hopf_sweep,
    "transversality": cmd_transversality,
    "simulate": cmd_simulate,
    "verdict": cmd_verdict,
    "period": cmd_period,
    "probe": cmd_probe,
    "reproduce-fig": cmd_reproduce_fig,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "reproduce-fig" and args.figure in ("1", "2L", "2R", "3"):
            net = None
        else:
            net = network.resolve(args.net, args.m_file)
        COMMANDS[args.command](args, net)
    except UsageError as exc:
        print(f"error: usage: {exc}", file=sys.stderr)
        return 2
    except PatchHopfError as exc:
        print(f"error: {exc.code}: {exc.detail}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: io: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: usage: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
