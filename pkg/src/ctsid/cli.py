"""Command-line front end.

Subcommands::

    ctsid generate   simulate a noisy dataset from a system and multisine input
    ctsid estimate   run SRIVC or SRIVC-c on a dataset
    ctsid reproduce  run a Monte Carlo preset (fig1, fig2, table1, fig3)
    ctsid diagnose   numerical checks (psi, power, phistar, condsweep)

Any flag may also come from an INI file given with ``--config``. Keys are
flag names with dashes or underscores (``max_iter = 20``). Values are read
from the section named after the subcommand, falling back to ``[DEFAULT]``.
Flags on the command line win over the file.

Exit codes: 0 ok, 2 usage or invalid input, 3 no convergence, 4 numerical
failure, 5 diagnostic failure.
"""

from __future__ import annotations

import argparse
import configparser
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from .diagnostics import (
    analytic_average_power,
    empirical_average_power,
    empirical_psi,
    normal_matrix_condition_sweep,
    phi_star_matrix,
    write_condition_sweep,
    write_moment,
)
from .errors import AssumptionA3Violated, CtsidError
from .estimator import EstimatorConfig, ModelOrder, initialize, param_names, srivc, srivc_c
from .harness import (
    PRESETS,
    MonteCarloSummary,
    export_plot_csv,
    export_runs,
    export_summary,
    run_experiment,
    with_overrides,
)
from .lti import Hold, TransferFunction
from .polynomial import Polynomial
from .signals import (
    IrregularUniform,
    Multisine,
    NoiseModel,
    Regular,
    generate_dataset,
    generate_grid,
    read_dataset,
    read_multisine,
    rng_stream,
    sample,
    write_dataset,
    write_multisine,
)

EXIT_OK, EXIT_USAGE, EXIT_NO_CONVERGENCE, EXIT_NUMERICAL, EXIT_DIAGNOSTIC = 0, 2, 3, 4, 5

log = logging.getLogger("ctsid")


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.replace(";", ",").split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _ints(text: str) -> tuple[int, ...]:
    vals = _floats(text)
    if any(v != int(v) for v in vals):
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    return tuple(int(v) for v in vals)


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def _tf_from_descending(num, den) -> TransferFunction:
    return TransferFunction(Polynomial(list(num)[::-1]), Polynomial(list(den)[::-1]))


# --------------------------------------------------------------------------
# parser


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", type=Path, help="INI file with default values for any flag")
    p.add_argument("--seed", type=int, default=0, help="master random seed (default 0)")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")


def _add_system(p: argparse.ArgumentParser):
    g = p.add_argument_group("system and input")
    g.add_argument("--num", type=_floats, default=(1.25,), help="numerator coefficients, highest power first (default 1.25)")
    g.add_argument("--den", type=_floats, default=(0.25, 0.7, 1.0), help="denominator coefficients, highest power first (default 0.25,0.7,1)")
    g.add_argument("--amplitudes", type=_floats, default=(1.0, 1.0, 1.0), help="sine amplitudes (default 1,1,1)")
    g.add_argument("--frequencies", type=_floats, default=(0.714, 1.428, 2.142), help="sine frequencies in rad/s (default 0.714,1.428,2.142)")
    g.add_argument("--offset", type=float, default=0.0, help="input offset (default 0)")
    g.add_argument("--input-file", type=Path, help="multisine definition file; overrides --amplitudes/--frequencies/--offset")


def _add_grid(p: argparse.ArgumentParser, N_default: int):
    g = p.add_argument_group("sampling")
    g.add_argument("--N", type=int, default=N_default, help=f"number of samples (default {N_default})")
    g.add_argument("--h", type=float, help="regular sampling period (default 0.3 if no bounds given)")
    g.add_argument("--h-lb", type=float, help="lower bound of irregular sampling gaps")
    g.add_argument("--h-hb", type=float, help="upper bound of irregular sampling gaps")


def _add_order_and_config(p: argparse.ArgumentParser):
    g = p.add_argument_group("estimator")
    g.add_argument("--n", type=int, default=2, help="denominator degree (default 2)")
    g.add_argument("--m", type=int, default=0, help="numerator degree (default 0)")
    g.add_argument("--epsilon", type=float, default=1e-4, help="relative-step stopping tolerance (default 1e-4)")
    g.add_argument("--max-iter", type=int, default=50, help="iteration cap (default 50)")
    g.add_argument("--input-hold", choices=["zoh", "foh"], default="foh", help="intersample assumption for u in srivc (default foh)")
    g.add_argument("--output-hold", choices=["zoh", "foh"], default="foh", help="intersample assumption for y (default foh)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ctsid", description="Continuous-time system identification from sampled data.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("generate", help="simulate a noisy dataset", description="Simulate noisy output samples of a system driven by a multisine.")
    _add_common(p)
    p.add_argument("-o", "--output", type=Path, required=True, help="dataset CSV to write (columns t,u,y)")
    p.add_argument("--input-out", type=Path, help="multisine definition file to write (default <output>.input.csv)")
    _add_system(p)
    _add_grid(p, 2000)
    p.add_argument("--variance", type=float, default=0.1, help="output noise variance (default 0.1)")

    p = sub.add_parser("estimate", help="estimate a model from a dataset", description="Run SRIVC or SRIVC-c on a dataset.")
    _add_common(p)
    p.add_argument("--data", type=Path, required=True, help="dataset CSV (columns t,u,y)")
    p.add_argument("--input-def", type=Path, help="multisine definition file (required for srivc-c)")
    p.add_argument("--estimator", choices=["srivc", "srivc-c"], default="srivc-c", help="estimator (default srivc-c)")
    p.add_argument("--report", type=Path, help="report file to write (default <data>.report.txt)")
    p.add_argument("--cutoff", type=float, help="initialisation filter cutoff in rad/s (default: highest input frequency)")
    _add_order_and_config(p)

    p = sub.add_parser("reproduce", help="run a Monte Carlo preset", description="Run one of the Monte Carlo presets and write summary CSVs.")
    _add_common(p)
    p.add_argument("preset", choices=sorted(PRESETS), help="experiment preset")
    p.add_argument("--runs", type=int, help="Monte Carlo runs per condition (default 300)")
    p.add_argument("--n-list", type=_ints, help="override the sample sizes, comma-separated")
    p.add_argument("--h-list", type=_floats, help="override regular sampling periods, comma-separated")
    p.add_argument("--hb-list", type=_floats, help="override irregular upper bounds, comma-separated (lower bound from --h-lb)")
    p.add_argument("--h-lb", type=float, default=0.05, help="irregular lower bound used with --hb-list (default 0.05)")
    p.add_argument("--variance", type=float, help="output noise variance (default 0.1)")
    p.add_argument("--estimators", type=lambda s: tuple(x.strip() for x in s.split(",")), help="subset of srivc,srivc-c")
    p.add_argument("--epsilon", type=float, help="relative-step stopping tolerance")
    p.add_argument("--max-iter", type=int, help="iteration cap")
    p.add_argument("--jobs", type=int, help="worker processes (default: all cores)")
    p.add_argument("--out-dir", type=Path, default=Path("."), help="directory for CSV outputs (default .)")

    p = sub.add_parser("diagnose", help="numerical checks of the exact-input estimator", description="Run a diagnostic check and report PASS or FAIL.")
    _add_common(p)
    p.add_argument("kind", choices=["psi", "power", "phistar", "condsweep"], help="which check")
    _add_system(p)
    _add_grid(p, 100_000)
    p.add_argument("--variance", type=float, default=0.1, help="noise variance for psi (default 0.1)")
    p.add_argument("--seeds", type=int, default=5, help="number of seeds for psi (default 5)")
    p.add_argument("--tolerance", type=float, help="threshold: stderr multiple for psi (4), relative error for power (0.01), condition for condsweep (1e10)")
    p.add_argument("--h-list", type=_floats, default=(0.06, 0.2, 0.6), help="sampling periods for condsweep (default 0.06,0.2,0.6)")
    p.add_argument("--n", type=int, default=2, help="denominator degree (default 2)")
    p.add_argument("--m", type=int, default=0, help="numerator degree (default 0)")
    p.add_argument("-o", "--output", type=Path, help="CSV to write the raw diagnostic values to")
    return parser


def _subparser(parser: argparse.ArgumentParser, name: str) -> argparse.ArgumentParser:
    return parser._subparsers._group_actions[0].choices[name]


def _apply_config(parser: argparse.ArgumentParser, argv) -> argparse.Namespace:
    """Parse ``argv`` after loading defaults from the ``--config`` file, if any."""
    argv = list(sys.argv[1:] if argv is None else argv)
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", type=Path)
    known, _ = pre.parse_known_args(argv)
    command = next((a for a in argv if a in COMMANDS), None)
    if known.config is None or command is None:
        return parser.parse_args(argv)
    sub = _subparser(parser, command)
    cp = configparser.ConfigParser()
    try:
        with open(known.config) as fh:
            cp.read_file(fh)
    except (OSError, configparser.Error) as exc:
        sub.error(f"cannot read config {known.config}: {exc}")
    values = dict(cp[command]) if cp.has_section(command) else dict(cp.defaults())
    actions = {a.dest: a for a in sub._actions}
    defaults = {}
    for key, raw in values.items():
        dest = key.replace("-", "_")
        if dest not in actions or dest in ("config", "help"):
            sub.error(f"unknown config key {key!r}")
        act = actions[dest]
        try:
            if act.type is not None:
                val = act.type(raw)
            elif isinstance(act, argparse._StoreTrueAction):
                val = _bool(raw)
            else:
                val = raw
        except (argparse.ArgumentTypeError, ValueError) as exc:
            sub.error(f"config key {key!r}: {exc}")
        if act.choices is not None and val not in act.choices:
            sub.error(f"config key {key!r}: {val!r} not in {sorted(act.choices)}")
        defaults[dest] = val
    sub.set_defaults(**defaults)
    for a in sub._actions:
        if a.dest in defaults:
            a.required = False
    return parser.parse_args(argv)


# --------------------------------------------------------------------------
# helpers


def _system(args) -> TransferFunction:
    return _tf_from_descending(args.num, args.den)


def _input(args) -> Multisine:
    if args.input_file is not None:
        return read_multisine(args.input_file)
    return Multisine.from_sines(args.amplitudes, args.frequencies, args.offset)


def _grid_kind(args, parser):
    irregular = args.h_lb is not None or args.h_hb is not None
    if irregular and args.h is not None:
        parser.error("--h and --h-lb/--h-hb are mutually exclusive")
    if irregular:
        if args.h_lb is None or args.h_hb is None:
            parser.error("irregular sampling needs both --h-lb and --h-hb")
        return IrregularUniform(args.h_lb, args.h_hb)
    return Regular(0.3 if args.h is None else args.h)


def _estimator_config(args) -> EstimatorConfig:
    return EstimatorConfig(
        epsilon=args.epsilon,
        max_iter=args.max_iter,
        input_hold=Hold.parse(args.input_hold),
        output_hold=Hold.parse(args.output_hold),
    )


def _verdict(ok: bool) -> int:
    print("PASS" if ok else "FAIL")
    return EXIT_OK if ok else EXIT_DIAGNOSTIC


# --------------------------------------------------------------------------
# subcommands


def cmd_generate(args, parser) -> int:
    kind = _grid_kind(args, parser)
    system, ms = _system(args), _input(args)
    rng = rng_stream(args.seed)
    grid = generate_grid(kind, args.N, rng=rng)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        _, y = generate_dataset(system, ms, grid, NoiseModel(args.variance), rng=rng)
    out = args.output
    input_out = args.input_out or out.with_name(out.stem + ".input.csv")
    write_dataset(out, sample(ms, grid.times), y)
    write_multisine(input_out, ms)
    print(f"seed = {args.seed}")
    print(f"wrote {out} ({args.N} samples) and {input_out}")
    return EXIT_OK


def cmd_estimate(args, parser) -> int:
    u, y = read_dataset(args.data)
    order = ModelOrder(args.n, args.m)
    cfg = _estimator_config(args)
    ms = read_multisine(args.input_def) if args.input_def is not None else None
    if args.estimator == "srivc-c" and ms is None:
        parser.error("srivc-c needs --input-def")
    cutoff = args.cutoff
    if cutoff is None and ms is not None and ms.n_components:
        cutoff = ms.max_frequency
    try:
        theta1 = initialize(u, y, order, cutoff=cutoff, cfg=cfg)
        if args.estimator == "srivc":
            res = srivc(u, y, order, theta1, cfg)
        else:
            res = srivc_c(ms, y, order, theta1, cfg)
    except (CtsidError, np.linalg.LinAlgError) as exc:
        # inputs are validated by now; anything raised here is numerical
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    for name, v in zip(param_names(order), res.theta):
        print(f"{name} = {v:.10g}")
    print(f"converged = {str(res.converged).lower()}")
    print(f"iterations = {res.n_iterations}")
    report = args.report or args.data.with_name(args.data.stem + ".report.txt")
    Path(report).write_text(f"estimator = {args.estimator}\n" + res.report())
    return EXIT_OK if res.converged else EXIT_NO_CONVERGENCE


def format_table(summary: MonteCarloSummary) -> str:
    """Text table with one block per estimator: rows are parameters, columns conditions."""
    conds = list(dict.fromkeys(r.condition for r in summary.rows))
    ests = list(dict.fromkeys(r.estimator for r in summary.rows))
    params = list(dict.fromkeys(r.param for r in summary.rows))
    width = max([14] + [len(c) + 2 for c in conds])
    head = f"{'estimator':<10}{'param':<16}{'':<6}" + "".join(f"{c:>{width}}" for c in conds)
    lines = [head, "-" * len(head)]
    for est in ests:
        for p in params:
            rows = [summary.get(est, c, p) for c in conds]
            label = f"{p} ({rows[0].true_value:g})"
            lines.append(f"{est:<10}{label:<16}{'mean':<6}" + "".join(f"{r.mean:>{width}.4f}" for r in rows))
            lines.append(f"{'':<10}{'':<16}{'MSE':<6}" + "".join(f"{r.mse:>{width}.2e}" for r in rows))
        div = [sum(1 for r in summary.rows if r.estimator == est and r.condition == c and r.param == params[0] and r.divergences) for c in conds]
        if any(div):
            lines.append(f"{'':<10}divergences   " + "".join(f"{summary.get(est, c, params[0]).divergences:>{width}d}" for c in conds))
    return "\n".join(lines)


def cmd_reproduce(args, parser) -> int:
    spec = PRESETS[args.preset](master_seed=args.seed)
    grids = None
    if args.h_list is not None:
        grids = tuple(Regular(h) for h in args.h_list)
    if args.hb_list is not None:
        if grids is not None:
            parser.error("--h-list and --hb-list are mutually exclusive")
        grids = tuple(IrregularUniform(args.h_lb, hb) for hb in args.hb_list)
    cfg = spec.config
    if args.epsilon is not None or args.max_iter is not None:
        cfg = EstimatorConfig(
            epsilon=cfg.epsilon if args.epsilon is None else args.epsilon,
            max_iter=cfg.max_iter if args.max_iter is None else args.max_iter,
        )
    spec = with_overrides(
        spec,
        runs=args.runs,
        n_values=args.n_list,
        grids=grids,
        noise_variance=args.variance,
        estimators=args.estimators,
        config=cfg,
        name=args.preset,
    )
    summary = run_experiment(spec, jobs=args.jobs)
    out = args.out_dir
    out.mkdir(parents=True, exist_ok=True)
    export_summary(summary, out / f"{args.preset}_summary.csv")
    export_runs(summary, spec, out / f"{args.preset}_runs.csv")
    export_plot_csv(summary, spec, out / f"{args.preset}_plot.csv")
    if len(spec.conditions) <= 8:
        print(format_table(summary))
    else:
        print(f"{len(spec.conditions)} conditions x {spec.runs} runs")
    print(f"wrote {out / (args.preset + '_summary.csv')}")
    return EXIT_OK


def cmd_diagnose(args, parser) -> int:
    system, ms = _system(args), _input(args)
    order = ModelOrder(args.n, args.m)
    A = system.den / system.den.coeffs[0]
    kind = args.kind
    if kind == "psi":
        tol = 4.0 if args.tolerance is None else args.tolerance
        grid_kind = _grid_kind(args, parser)
        bad = 0
        for s in range(args.seeds):
            rng = rng_stream(args.seed, s)
            grid = generate_grid(grid_kind, args.N, rng=rng)
            mom = empirical_psi(A, ms, NoiseModel(args.variance), grid, order, rng=rng)
            z = mom.z_scores()
            nb = int(np.count_nonzero(z > tol))
            bad += nb
            print(f"seed {s}: max |psi|/stderr = {np.max(z):.3f}, entries over {tol:g} = {nb}")
            if args.output is not None and s == 0:
                write_moment(args.output, mom)
        return _verdict(bad <= 1)
    if kind == "power":
        tol = 0.01 if args.tolerance is None else args.tolerance
        grid = generate_grid(_grid_kind(args, parser), args.N, rng=rng_stream(args.seed))
        exact = analytic_average_power(system, ms)
        emp = empirical_average_power(system, ms, grid)
        rel = abs(emp.value - exact) / abs(exact)
        print(f"analytic = {exact:.10g}\nempirical = {emp.value:.10g} (stderr {emp.stderr_estimate:.3g})\nrelative error = {rel:.3e}")
        return _verdict(rel <= tol)
    if kind == "phistar":
        try:
            P = phi_star_matrix(system, ms, order)
        except AssumptionA3Violated as exc:
            print(f"AssumptionA3Violated: {exc}")
            return _verdict(False)
        eig = np.linalg.eigvalsh(0.5 * (P + P.T))
        print("eigenvalues = " + ", ".join(f"{v:.6e}" for v in eig))
        return _verdict(eig[0] > 1e-10 * np.trace(P))
    tol = 1e10 if args.tolerance is None else args.tolerance
    rows = normal_matrix_condition_sweep(system, ms, order, args.h_list, N=args.N)
    for h, c in rows:
        print(f"h = {h:g}: condition = {c:.4e}")
    if args.output is not None:
        write_condition_sweep(args.output, rows)
    return _verdict(all(c < tol for _, c in rows))


COMMANDS = {
    "generate": cmd_generate,
    "estimate": cmd_estimate,
    "reproduce": cmd_reproduce,
    "diagnose": cmd_diagnose,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = _apply_config(parser, argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args, _subparser(parser, args.command))
    except CtsidError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
