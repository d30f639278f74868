"""Command-line entry point: train / bound / sweep / report.

Exit codes: 0 success, 1 usage error, 2 runtime error, 3 partial sweep failure.
Precedence of settings: command-line flags > config-file values (plain
``key = value`` lines, '#' comments) > BLOWUP_PINN_* environment variables >
built-in defaults. The effective configuration is echoed into the output
directory of every command that writes one.
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys

import numpy as np

from . import bounds, harness
from .network import load_checkpoint
from .problems import NetworkSurrogate, make_problem
from .sampling import CollocationCounts, sample_collocation

ENV_PREFIX = "BLOWUP_PINN_"

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2
EXIT_PARTIAL = 3


def _parse_config_file(path) -> dict[str, str]:
    values = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path} line {lineno}: expected 'key = value', "
                                 f"got {raw!r}")
            key, _, val = line.partition("=")
            values[key.strip()] = val.strip()
    return values


def _coerce(key: str, raw: str):
    list_keys = {"deltas", "widths", "seeds"}
    int_keys = {"width", "depth", "seed", "iters", "iterations", "n_int", "n_tb",
                "n_sb", "grid_n", "sup_res", "workers", "res"}
    float_keys = {"delta", "lr", "margin"}
    if key in list_keys:
        return tuple(float(v) if key == "deltas" else int(v)
                     for v in raw.replace(",", " ").split())
    if key in int_keys:
        return int(raw)
    if key in float_keys:
        return float(raw)
    return raw


def _apply_overlays(parser: argparse.ArgumentParser, argv: list[str]):
    """Fold env vars and an optional --config file into the parser defaults."""
    known = {a.dest for a in parser._actions}
    env_defaults = {}
    for key, val in os.environ.items():
        if key.startswith(ENV_PREFIX):
            dest = key[len(ENV_PREFIX):].lower()
            if dest in known:
                env_defaults[dest] = _coerce(dest, val)
    parser.set_defaults(**env_defaults)
    if "--config" in argv:
        path = argv[argv.index("--config") + 1]
        file_values = _parse_config_file(path)
        overlay = {}
        for key, val in file_values.items():
            if key not in known:
                raise ValueError(f"{path}: unknown config key '{key}'")
            overlay[key] = _coerce(key, val)
        parser.set_defaults(**overlay)


def _echo_config(args: argparse.Namespace, out_dir: str) -> None:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "effective-config.txt"), "w") as fh:
        for key in sorted(vars(args)):
            if key == "func":
                continue
            fh.write(f"{key} = {getattr(args, key)}\n")


def _add_problem_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--problem", choices=["burgers1d", "burgers2d"], default="burgers1d",
                   help="PDE instance (default: %(default)s)")
    p.add_argument("--delta", type=float, default=0.5,
                   help="proximity parameter, dimensionless; admissible (0,1) in 1D, "
                        "(0, 1/sqrt(2)) in 2D (default: %(default)s)")
    p.add_argument("--margin", type=float, default=1e-6,
                   help="singularity guard on the admissible delta interval "
                        "(default: %(default)s)")


def _add_collocation_flags(p: argparse.ArgumentParser, n_int=4096, n_tb=256, n_sb=256):
    p.add_argument("--n-int", dest="n_int", type=int, default=n_int,
                   help="interior collocation points (default: %(default)s)")
    p.add_argument("--n-tb", dest="n_tb", type=int, default=n_tb,
                   help="initial-time collocation points (default: %(default)s)")
    p.add_argument("--n-sb", dest="n_sb", type=int, default=n_sb,
                   help="boundary collocation points per face (default: %(default)s)")
    p.add_argument("--scheme", choices=["random", "grid", "gauss-legendre"],
                   default="random", help="collocation scheme (default: %(default)s)")


def cmd_train(args) -> int:
    try:
        problem = make_problem(args.problem, args.delta, args.margin)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    _echo_config(args, args.out_dir)
    spec = harness.SweepSpec(problem=args.problem, deltas=(args.delta,),
                             widths=(args.width,), depth=args.depth, seeds=(args.seed,),
                             iterations=args.iters, lr=args.lr, n_int=args.n_int,
                             n_tb=args.n_tb, n_sb=args.n_sb, scheme=args.scheme,
                             margin=args.margin, out_dir=args.out_dir,
                             compute_bounds=False)
    record = harness.run_single(spec, args.delta, args.width, args.seed)
    if record.failed:
        print("error: training diverged (non-finite loss)", file=sys.stderr)
        return EXIT_RUNTIME
    harness.persist_records([record], os.path.join(args.out_dir, "runs.csv"))
    print(f"run_id {record.run_id}")
    print(f"checkpoint {record.checkpoint}")
    print(f"loss_final {record.loss_final!r}")
    print(f"loss_best {record.loss_best!r}")
    print(f"train_seconds {record.train_seconds:.3f}")
    return EXIT_OK


def cmd_bound(args) -> int:
    try:
        problem = make_problem(args.problem, args.delta, args.margin)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.surrogate == "exact":
        surrogate = problem.exact_surrogate()
        tag = "exact"
    else:
        if not args.checkpoint:
            print("error: need --checkpoint PATH or --surrogate exact", file=sys.stderr)
            return EXIT_USAGE
        try:
            params, _, _ = load_checkpoint(args.checkpoint)
        except (OSError, ValueError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_RUNTIME
        if params.layer_sizes[0] != problem.spatial_dim + 1 \
                or params.layer_sizes[-1] != problem.spatial_dim:
            print(f"error: checkpoint network {params.layer_sizes} does not match "
                  f"problem '{args.problem}' (needs {problem.spatial_dim + 1} inputs, "
                  f"{problem.spatial_dim} outputs)", file=sys.stderr)
            return EXIT_RUNTIME
        surrogate = NetworkSurrogate(params)
        tag = os.path.splitext(os.path.basename(args.checkpoint))[0]
    _echo_config(args, args.out_dir)

    try:
        if args.theorem == "1":
            report = bounds.theorem1_bound(problem, surrogate, args.grid_n, args.sup_res)
        elif args.theorem == "2":
            report = bounds.theorem2_bound(problem, surrogate, args.grid_n, args.sup_res,
                                           squared_tb=not args.unsquared_tb)
        else:
            if args.scheme != "gauss-legendre":
                print("error: the quadrature-explicit bound needs quadrature weights; "
                      "use --scheme gauss-legendre", file=sys.stderr)
                return EXIT_USAGE
            colloc = sample_collocation(
                problem, CollocationCounts(args.n_int, args.n_tb, args.n_sb),
                "gauss-legendre", args.seed)
            cfg = bounds.QuadratureErrorConfig(
                alpha_tb=args.alpha_tb, alpha_int=args.alpha_int, alpha_sb=args.alpha_sb,
                cquad_tb=args.cquad_tb, cquad_int=args.cquad_int,
                cquad_sb_minus=args.cquad_sb, cquad_sb_plus=args.cquad_sb)
            report = bounds.theoremB1_bound(problem, surrogate, colloc, cfg, args.sup_res)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    base = os.path.join(args.out_dir, f"bound-t{args.theorem}-{tag}-delta{args.delta:g}")
    with open(base + ".csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(bounds.report_csv_header(report))
        writer.writerow(bounds.report_csv_row(report))
    with open(base + ".txt", "w") as fh:
        fh.write(bounds.report_text(report))
    lhs = getattr(report, "lhs", None)
    print(f"rhs {report.rhs!r}")
    if lhs is not None:
        print(f"lhs {lhs!r}")
        print(f"margin {report.rhs - lhs!r}")
    print(f"report {base}.csv")
    return EXIT_OK


def cmd_sweep(args) -> int:
    try:
        spec_values = _parse_config_file(args.spec)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    kind = spec_values.pop("kind", "delta")
    allowed = {"problem", "deltas", "widths", "depth", "seeds", "iterations", "lr",
               "n_int", "n_tb", "n_sb", "scheme", "grid_n", "sup_res", "margin",
               "out_dir", "workers"}
    unknown = set(spec_values) - allowed
    if unknown:
        print(f"error: unknown spec key(s) {sorted(unknown)} in {args.spec}",
              file=sys.stderr)
        return EXIT_USAGE
    kwargs = {k: _coerce(k, v) for k, v in spec_values.items()}
    if args.out_dir is not None:
        kwargs["out_dir"] = args.out_dir
    if args.workers is not None:
        kwargs["workers"] = args.workers
    try:
        spec = harness.SweepSpec(**kwargs)
        spec.validate()
    except (TypeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    os.makedirs(spec.out_dir, exist_ok=True)
    _echo_config(args, spec.out_dir)

    if kind == "delta":
        records, summary, n_failed = harness.delta_sweep(spec)
    elif kind == "width":
        records, summary, n_failed = harness.width_sweep(spec)
    elif kind == "timing":
        records, summary, n_failed = harness.timing_study(spec)
    else:
        print(f"error: unknown sweep kind '{kind}' (delta | width | timing)",
              file=sys.stderr)
        return EXIT_USAGE

    harness.persist_records(records, os.path.join(spec.out_dir, "runs.csv"))
    harness.write_summary(summary, os.path.join(spec.out_dir, "summary.csv"))
    print(f"runs {len(records)} (failed {n_failed})")
    for row in summary:
        print(f"{row['metric']} width={row['width']} {row['value']!r}")
    if n_failed == len(records):
        return EXIT_RUNTIME
    return EXIT_PARTIAL if n_failed else EXIT_OK


def _render_figure(path, draw) -> int:
    """Render a figure via a soft matplotlib import; the library never needs it."""
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        print("error: --figure needs matplotlib installed", file=sys.stderr)
        return EXIT_RUNTIME
    fig = plt.figure(figsize=(9, 4))
    draw(fig)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    print(f"figure {path}")
    return EXIT_OK


def cmd_report(args) -> int:
    if args.export_grid:
        if not args.checkpoint:
            print("error: --export-grid needs --checkpoint", file=sys.stderr)
            return EXIT_USAGE
        try:
            problem = make_problem(args.problem, args.delta, args.margin)
            params, _, _ = load_checkpoint(args.checkpoint)
        except ValueError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_USAGE
        surrogate = NetworkSurrogate(params)
        exact = problem.exact_surrogate()
        axes = [np.linspace(lo, hi, args.res) for lo, hi in problem.spatial_box]
        axes.append(np.linspace(problem.t0, problem.t1, args.res))
        grids = np.meshgrid(*axes, indexing="ij")
        points = np.stack([g.ravel() for g in grids], axis=1)
        pred, _ = surrogate.eval_jet(points)
        truth, _ = exact.eval_jet(points)
        d = problem.spatial_dim
        coord_names = [f"x{k + 1}" for k in range(d)] if d > 1 else ["x"]
        header = coord_names + ["t"] \
            + [f"u{k + 1}_exact" for k in range(d)] + [f"u{k + 1}_pred" for k in range(d)]
        out = args.out or "grid.csv"
        with open(out, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for p, ue, up in zip(points, truth, pred):
                writer.writerow([repr(float(v)) for v in (*p, *ue, *up)])
        print(f"grid {out} ({points.shape[0]} rows)")
        if args.figure:
            shape = (args.res,) * (d + 1)

            def draw(fig):
                t_axis = points[:, d].reshape(shape)
                if d == 1:
                    x_axis = points[:, 0].reshape(shape)
                    for k, (surf, title) in enumerate(
                            ((truth[:, 0], "exact"), (pred[:, 0], "predicted"))):
                        ax = fig.add_subplot(1, 2, k + 1)
                        m = ax.pcolormesh(x_axis, t_axis, surf.reshape(shape),
                                          shading="auto")
                        fig.colorbar(m, ax=ax)
                        ax.set_xlabel("x")
                        ax.set_ylabel("t")
                        ax.set_title(title)
                else:
                    # mid-time slice of the first velocity component
                    mid = args.res // 2
                    for k, (surf, title) in enumerate(
                            ((truth[:, 0], "exact u1"), (pred[:, 0], "predicted u1"))):
                        ax = fig.add_subplot(1, 2, k + 1)
                        m = ax.pcolormesh(points[:, 0].reshape(shape)[:, :, mid],
                                          points[:, 1].reshape(shape)[:, :, mid],
                                          surf.reshape(shape)[:, :, mid],
                                          shading="auto")
                        fig.colorbar(m, ax=ax)
                        ax.set_xlabel("x1")
                        ax.set_ylabel("x2")
                        ax.set_title(f"{title} (t mid-window)")

            return _render_figure(args.figure, draw)
        return EXIT_OK
    try:
        records = harness.load_records(args.runs)
        summary = harness.summarize_delta_records(records)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    out = args.out or "summary.csv"
    harness.write_summary(summary, out)
    print(f"records {len(records)}, summary rows {len(summary)} -> {out}")
    if args.figure:
        pairs = [(r.delta, r.lhs_t2 if r.lhs_t2 is not None else r.lhs_t1,
                  r.rhs_t2 if r.rhs_t2 is not None else r.rhs_t1)
                 for r in records]
        pairs = [(d_, l, r) for d_, l, r in pairs
                 if l is not None and r is not None
                 and math.isfinite(l) and math.isfinite(r)]
        if not pairs:
            print("error: no finite bound values to plot", file=sys.stderr)
            return EXIT_RUNTIME

        def draw(fig):
            ax = fig.add_subplot(1, 1, 1)
            for d_, lhs, rhs in pairs:
                ax.scatter(lhs, rhs)
                ax.annotate(f"{d_:g}", (lhs, rhs))
            if all(l > 0 and r > 0 for _, l, r in pairs):
                ax.set_xscale("log")
                ax.set_yscale("log")
            ax.set_xlabel("measured risk (lhs)")
            ax.set_ylabel("bound (rhs)")
            ax.set_title("bound vs measured risk per run")

        return _render_figure(args.figure, draw)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="blowup-pinn",
        description="Train PINNs on blow-up Burgers instances and evaluate "
                    "generalization bounds.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train one model and write its checkpoint")
    _add_problem_flags(p_train)
    p_train.add_argument("--width", type=int, default=30, help="hidden width, neurons")
    p_train.add_argument("--depth", type=int, default=6,
                         help="affine layers; hidden tanh layers = depth-1 "
                              "(default: %(default)s)")
    p_train.add_argument("--iters", type=int, default=20000,
                         help="Adam iterations (default: %(default)s)")
    p_train.add_argument("--lr", type=float, default=1e-4,
                         help="learning rate, 1/iteration (default: %(default)s)")
    p_train.add_argument("--seed", type=int, default=0, help="RNG seed")
    _add_collocation_flags(p_train)
    p_train.add_argument("--out-dir", default="out", help="output directory")
    p_train.add_argument("--config", help="key=value config file overlay")
    p_train.set_defaults(func=cmd_train)

    p_bound = sub.add_parser("bound", help="evaluate a bound for a checkpoint")
    _add_problem_flags(p_bound)
    p_bound.add_argument("--checkpoint", help="checkpoint path")
    p_bound.add_argument("--surrogate", choices=["exact"],
                         help="'exact' evaluates the bound on the closed-form solution")
    p_bound.add_argument("--theorem", choices=["1", "2", "b1"], default="2",
                         help="which bound to evaluate (default: %(default)s)")
    p_bound.add_argument("--grid-n", dest="grid_n", type=int,
                         help="quadrature order per axis (default: 64 in 1D, 32 in 2D)")
    p_bound.add_argument("--sup-res", dest="sup_res", type=int,
                         help="sup-norm grid points per axis (default: 512 / 128)")
    p_bound.add_argument("--unsquared-tb", action="store_true",
                         help="use the unsquared initial-time term (exact-replication "
                              "mode; can break dominance)")
    p_bound.add_argument("--seed", type=int, default=0, help="collocation seed (b1)")
    _add_collocation_flags(p_bound)
    for name in ("alpha-tb", "alpha-int", "alpha-sb"):
        p_bound.add_argument(f"--{name}", dest=name.replace("-", "_"), type=float,
                             default=2.0, help=f"quadrature exponent {name} (b1)")
    for name in ("cquad-tb", "cquad-int", "cquad-sb"):
        p_bound.add_argument(f"--{name}", dest=name.replace("-", "_"), type=float,
                             default=0.0, help=f"quadrature constant {name} (b1)")
    p_bound.add_argument("--out-dir", default="out", help="output directory")
    p_bound.add_argument("--config", help="key=value config file overlay")
    p_bound.set_defaults(func=cmd_bound)

    p_sweep = sub.add_parser("sweep", help="run a sweep campaign from a spec file")
    p_sweep.add_argument("--spec", required=True,
                         help="key=value spec file; keys mirror the sweep "
                              "configuration plus 'kind = delta|width|timing'")
    p_sweep.add_argument("--out-dir", help="override the spec's output directory")
    p_sweep.add_argument("--workers", type=int,
                         help="parallel training runs (default: spec value or 1)")
    p_sweep.set_defaults(func=cmd_sweep)

    p_report = sub.add_parser("report",
                              help="re-summarize persisted runs or export surface grids")
    p_report.add_argument("--runs", default="runs.csv",
                          help="runs.csv file or directory of them")
    p_report.add_argument("--out", help="output path")
    p_report.add_argument("--export-grid", action="store_true",
                          help="export exact-vs-predicted surface samples for plotting")
    p_report.add_argument("--checkpoint", help="checkpoint for --export-grid")
    p_report.add_argument("--res", type=int, default=64,
                          help="grid resolution per axis for --export-grid")
    p_report.add_argument("--figure",
                          help="also render a figure (PNG) next to the CSV output")
    _add_problem_flags(p_report)
    p_report.set_defaults(func=cmd_report)
    parser._command_parsers = {"train": p_train, "bound": p_bound,
                               "sweep": p_sweep, "report": p_report}
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        # overlays attach to the subcommand's parser, where the flags live
        target = parser._command_parsers.get(argv[0]) if argv else None
        _apply_overlays(target or parser, argv)
        args = parser.parse_args(argv)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
