"""Command-line entry point: ``kartel <subcommand> ...``.

Exit codes: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import dataio, svg
from .errors import DataError, KartelError, NotFound
from .evaluation import DEFAULT_GRID, evaluate, train_and_evaluate
from .features import DEFAULT_LENGTH, feature_matrix, to_features
from .generators import HonestGenConfig, gen_dataset
from .shapley import exact_shapley, global_summary, waterfall
from .simulation import run_experiment

log = logging.getLogger("kartel")


class UsageError(KartelError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("KARTEL_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"KARTEL_SEED must be an integer, got {env!r}") from None


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def cmd_simulate(args) -> int:
    run = run_experiment(args.mix, args.auctions, args.sample_every, _seed(args), fixed_costs=args.fixed_costs)
    dataio.write_trajectory(run, args.out)
    if args.svg:
        shares = run.shares
        Path(args.svg).write_text(svg.line_chart(
            run.auction_index.tolist(),
            {"aggressive": shares[:, 0], "passive": shares[:, 1], "random": shares[:, 2]},
            title="Strategy shares", xlabel="auction", ylabel="share", ylim=(0.0, 1.0)))
    a, p, r = run.final_shares
    print(f"final shares after {run.n_auctions} auctions: aggressive={a:.2f} passive={p:.2f} random={r:.2f}")
    return 0


def cmd_generate(args) -> int:
    honest = HonestGenConfig(n_bidders=args.bidders, jitter=args.jitter)
    series = gen_dataset(args.honest, args.cartel, honest=honest, seed=_seed(args))
    dataio.write_auctions(args.out, series)
    print(f"wrote {len(series)} auctions to {args.out}")
    return 0


def cmd_featurize(args) -> int:
    series, warns = dataio.read_auctions(args.data)
    for w in warns:
        print(f"warning: {w}", file=sys.stderr)
    usable = [s for s in series if len(s)]
    for s in series:
        if not len(s):
            print(f"warning: auction {s.auction_id} has no bids, skipped", file=sys.stderr)
    X, y, ids = feature_matrix(usable, args.length, args.channel)
    dataio.write_features(args.out, X, y, ids)
    print(f"wrote {len(ids)} feature rows to {args.out}")
    return 0


def cmd_train(args) -> int:
    if not 0 < args.split < 1:
        raise UsageError("--split must lie strictly between 0 and 1")
    X, y, ids = dataio.read_features(args.data)
    if (y < 0).any():
        raise DataError("training data has unlabeled rows")
    seed = _seed(args)
    res = train_and_evaluate(X, y, args.split, args.folds, DEFAULT_GRID, seed)
    dataio.save_model(res.model, args.model)
    extra = {
        "seed": seed,
        "split": args.split,
        "folds": args.folds,
        "best_params": res.cv.best.__dict__,
        "cv_fold_scores": res.cv.best_scores,
        "test_ids": [ids[i] for i in res.test_idx],
    }
    if args.report:
        dataio.write_report(res.report, args.report, **extra)
    if args.report_txt:
        dataio.write_report(res.report, args.report_txt)
    sys.stdout.write(res.report.table())
    return 0


def cmd_evaluate(args) -> int:
    model = dataio.load_model(args.model)
    X, y, _ = dataio.read_features(args.data)
    if len(y) == 0 or (y < 0).any():
        raise DataError("evaluation needs a nonempty, fully labeled features file")
    report = evaluate(model, X, y)
    if args.report:
        dataio.write_report(report, args.report)
    sys.stdout.write(report.table())
    return 0


def _background(args, X):
    if args.background:
        bg, _, _ = dataio.read_features(args.background)
        return bg
    return X


def cmd_explain(args) -> int:
    model = dataio.load_model(args.model)
    X, _, ids = dataio.read_features(args.data)
    if args.id not in ids:
        raise NotFound(f"auction {args.id!r} not in {args.data}")
    k = ids.index(args.id)
    exp = exact_shapley(model, X[k], _background(args, X), args.id)
    dataio.write_explanation(exp, args.out)
    rows = waterfall(exp)
    for r in rows:
        print(f"{r.label:>5}  {r.phi:+.4f}  {r.start:.4f} -> {r.end:.4f}")
    gap = exp.efficiency_gap
    print(f"predicted={exp.predicted:.4f} base={exp.base_value:.4f} efficiency |base+sum(phi)-p|={gap:.2e} "
          + ("OK" if gap < 1e-9 else "FAIL"))
    if args.svg:
        Path(args.svg).write_text(svg.waterfall_chart([r.label for r in rows], [r.start for r in rows],
                                                      [r.end for r in rows], title=f"Auction {args.id}"))
    return 0


def cmd_summarize(args) -> int:
    model = dataio.load_model(args.model)
    X, _, ids = dataio.read_features(args.data)
    if len(X) == 0:
        raise DataError(f"{args.data} has no rows")
    summary = global_summary(model, X, _background(args, X), ids)
    dataio.write_summary(summary, args.out, args.scatter)
    for i, v in enumerate(summary.mean_abs_phi, start=1):
        print(f"bid {i:>2}: mean |phi| = {v:.4f}")
    if args.svg:
        Path(args.svg).write_text(svg.strip_chart([(i, a) for _, i, _, a in summary.scatter()],
                                                  list(summary.mean_abs_phi), title="Mean |phi| by bid"))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="kartel", description="Collusion screening for descending-price procurement auctions.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="evolutionary strategy experiment")
    s.add_argument("--mix", type=_floats, default=[0.34, 0.33, 0.33],
                   help="aggressive,passive,random shares over 100 agents")
    s.add_argument("--auctions", type=int, default=20000)
    s.add_argument("--sample-every", type=int, default=100)
    s.add_argument("--seed", type=int)
    s.add_argument("--out", required=True)
    s.add_argument("--svg")
    s.add_argument("--fixed-costs", action="store_true", help="keep one cost per agent for the whole run")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("generate", help="synthetic labeled auctions")
    s.add_argument("--honest", type=int, default=20)
    s.add_argument("--cartel", type=int, default=20)
    s.add_argument("--bidders", type=int, default=2, help="bidders per honest auction")
    s.add_argument("--jitter", type=float, default=0.0, help="extra honest decrement, fraction of start")
    s.add_argument("--seed", type=int)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_generate)

    s = sub.add_parser("featurize", help="auctions.csv -> features.csv")
    s.add_argument("--data", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--length", type=int, default=DEFAULT_LENGTH)
    s.add_argument("--channel", choices=["price", "decrement"], default="price")
    s.set_defaults(func=cmd_featurize)

    s = sub.add_parser("train", help="split, tune by k-fold CV, fit and evaluate")
    s.add_argument("--data", required=True)
    s.add_argument("--split", type=float, default=0.7)
    s.add_argument("--folds", type=int, default=5)
    s.add_argument("--seed", type=int)
    s.add_argument("--model", required=True)
    s.add_argument("--report")
    s.add_argument("--report-txt")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("evaluate", help="score a saved model on labeled features")
    s.add_argument("--model", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--report")
    s.set_defaults(func=cmd_evaluate)

    for name, func, helptext in (("explain", cmd_explain, "Shapley waterfall for one auction"),
                                 ("summarize", cmd_summarize, "mean |phi| per bid over a dataset")):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("--model", required=True)
        s.add_argument("--data", required=True)
        s.add_argument("--background", help="features file for the expectation (default: --data)")
        s.add_argument("--out", required=True)
        s.add_argument("--svg")
        if name == "explain":
            s.add_argument("--id", required=True)
        else:
            s.add_argument("--scatter", help="per-point CSV for the scatter plot")
        s.set_defaults(func=func)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.ERROR, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (DataError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"kartel: data error: {exc}", file=sys.stderr)
        return 2
    except (KartelError, ValueError) as exc:
        print(f"kartel: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
