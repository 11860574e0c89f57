"""Acceptance criteria, one check per criterion at its stated tolerance.

Each ``check_*`` returns ``(ok, detail)``. Under pytest every criterion is a
test that prints one PASS/FAIL line; ``python tests/test_acceptance.py``
prints the same lines without pytest.
"""

from __future__ import annotations

import math
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

from kartel import dataio
from kartel.auction import AuctionConfig, BidSeries, play
from kartel.evaluation import EvalReport, train_and_evaluate
from kartel.features import feature_matrix, to_features
from kartel.gbdt import GbdtModel, Hyperparams, Tree, fit, logistic_loss, logistic_loss_grad_hess, predict_proba
from kartel.generators import HonestGenConfig, gen_dataset, gen_honest
from kartel.shapley import exact_shapley, sampled_shapley
from kartel.simulation import run_experiment

SEEDS = range(1, 11)
MIXES = [
    ("equal thirds", (0.34, 0.33, 0.33), 20000),
    ("passive 10%", (0.45, 0.10, 0.45), 20000),
    ("passive 3%", (0.87, 0.03, 0.10), 50000),
]


def check_simulation_convergence():
    t0 = time.perf_counter()
    ok, parts = True, []
    for name, mix, n in MIXES:
        runs = [run_experiment(mix, n, seed=s) for s in SEEDS]
        finals = np.array([r.final_shares[1] for r in runs])
        rising = sum(r.shares[-1, 1] > r.shares[0, 1] for r in runs)
        med = float(np.median(finals))
        ok &= med >= 0.95 and rising == len(runs)
        parts.append(f"{name}@{n}: median passive {med:.2f}, rising {rising}/{len(runs)}")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 30
    return ok, "; ".join(parts) + f"; {elapsed:.1f}s"


def _playout(start, c_self, c_opp, step_self, lo_opp, hi_opp, first, uniforms, prices, who):
    n = play(start, c_self, c_opp, step_self, step_self, lo_opp, hi_opp, first, uniforms, len(prices) - 1, prices, who)
    if n <= 0 or who[n - 1] != 0:
        return None
    return prices[n - 1] - c_self, prices[n - 1]


def check_minimal_decrement_dominance():
    """Pointwise: for every cost pair, first mover and opponent, passive profit >= alternative profit
    whenever both policies win."""
    t0 = time.perf_counter()
    cfg = AuctionConfig()
    grid = (np.arange(50) + 0.5) / 50
    alternatives = np.round(np.arange(0.0075, 0.05 + 1e-9, 0.0025), 6)
    opponents = {"passive": (0.005, 0.005), "aggressive": (0.05, 0.05), "random": (0.005, 0.05)}
    uniforms = np.random.default_rng(0).random(cfg.uniform_budget)
    prices = np.empty(cfg.uniform_budget)
    who = np.empty(cfg.uniform_budget, dtype=np.int64)
    both = violations = bad_ties = 0
    agg_p = agg_a = 0.0
    for lo_o, hi_o in opponents.values():
        for c_self in grid:
            for c_opp in grid:
                for first in (0, 1):
                    ref = _playout(1.0, c_self, c_opp, 0.005, lo_o, hi_o, first, uniforms, prices, who)
                    if ref is None:
                        continue
                    for step in alternatives:
                        alt = _playout(1.0, c_self, c_opp, step, lo_o, hi_o, first, uniforms, prices, who)
                        if alt is None:
                            continue
                        both += 1
                        agg_p += ref[0]
                        agg_a += alt[0]
                        if ref[0] < alt[0] - 1e-12:
                            violations += 1
                        elif abs(ref[0] - alt[0]) <= 1e-12 and abs(ref[1] - alt[1]) > 1e-12:
                            bad_ties += 1
    elapsed = time.perf_counter() - t0
    ok = violations == 0 and bad_ties == 0 and elapsed < 10
    detail = (f"{violations}/{both} comparisons where a fixed larger step out-earns passive "
              f"(aggregate mean profit passive {agg_p / both:.4f} vs alternative {agg_a / both:.4f}); {elapsed:.1f}s")
    return ok, detail


def check_synthetic_accuracy():
    t0 = time.perf_counter()
    accs = []
    for seed in SEEDS:
        X, y, _ = feature_matrix(gen_dataset(20, 20, seed=seed))
        accs.append(train_and_evaluate(X, y, 0.7, 5, seed=seed).report.accuracy)
    elapsed = time.perf_counter() - t0
    med = float(np.median(accs))
    ok = med >= 0.90 and min(accs) > 0.5 and elapsed < 60
    return ok, f"median accuracy {med:.3f}, min {min(accs):.3f}, runs {[round(a, 3) for a in accs]}; {elapsed:.1f}s"


def check_grad_hess():
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(1000):
        y = int(rng.integers(2))
        p = rng.uniform(1e-4, 1 - 1e-4)
        z = math.log(p / (1 - p))
        g, h = logistic_loss_grad_hess(y, p)
        loss = lambda t: logistic_loss([y], [t])
        e1, e2 = 1e-5, 1e-4
        fd_g = (loss(z + e1) - loss(z - e1)) / (2 * e1)
        fd_h = (loss(z + e2) - 2 * loss(z) + loss(z - e2)) / e2**2
        worst = max(worst, abs(g - fd_g), abs(h - fd_h))
    return worst < 1e-6, f"max |analytic - finite difference| = {worst:.2e} over 1000 (y, p) pairs"


def _mirror(model: GbdtModel, i: int, j: int, n_features: int) -> GbdtModel:
    """Model symmetric in columns ``i`` and ``j``: every tree plus its i<->j swapped copy."""
    trees = []
    for t in model.trees:
        swapped = t.feature.copy()
        swapped[t.feature == i], swapped[t.feature == j] = j, i
        trees.append(t)
        trees.append(Tree(swapped, t.threshold, t.left, t.right, t.value))
    return GbdtModel(model.base_score, trees, model.learning_rate / 2, n_features, model.params)


def check_shapley_axioms():
    data = gen_dataset(20, 20, seed=11)
    X, y, ids = feature_matrix(data)
    model = fit(X, y, Hyperparams(n_trees=25, max_depth=3, learning_rate=0.3))
    L = X.shape[1]

    gaps = [exact_shapley(model, x, X, aid).efficiency_gap for x, aid in zip(X, ids)]
    efficiency = max(gaps) < 1e-9

    unused = sorted(set(range(L)) - model.used_features())
    null_ok = bool(unused)
    for x in X:
        null_ok &= bool(np.all(exact_shapley(model, x, X).phis[unused] == 0.0))

    Xd = np.c_[X, X[:, 2]]
    sym = _mirror(fit(Xd, y, Hyperparams(n_trees=25, max_depth=3, learning_rate=0.3)), 2, L, L + 1)
    sym_gap = max(abs(e.phis[2] - e.phis[L]) for e in (exact_shapley(sym, x, Xd) for x in Xd))
    symmetry = sym_gap < 1e-9

    # a noisy target on all 11 inputs keeps many features live for the sampling check
    rng = np.random.default_rng(5)
    Xr = rng.uniform(size=(60, L))
    yr = (Xr @ rng.normal(size=L) + 0.3 * rng.normal(size=60) > 0).astype(int)
    dense = fit(Xr, yr, Hyperparams(n_trees=25, max_depth=3, learning_rate=0.3))
    worst_z, worst_diff, mc_ok, live_count = 0.0, 0.0, True, 0
    for m, data in ((model, X), (dense, Xr)):
        for k in rng.choice(len(data), 5, replace=False):
            exact = exact_shapley(m, data[k], data).phis
            est, se = sampled_shapley(m, data[k], data, n_permutations=20000, seed=int(k))
            diff = np.abs(est - exact)
            # a zero standard error means every sampled marginal was identical, hence exact
            mc_ok &= bool(np.all(diff <= 3 * se + 1e-12))
            live = se > 1e-9
            live_count += int(live.sum())
            if live.any():
                worst_z = max(worst_z, float((diff[live] / se[live]).max()))
            worst_diff = max(worst_diff, float(diff.max()))
    ok = efficiency and null_ok and symmetry and mc_ok
    detail = (f"efficiency max gap {max(gaps):.1e} over {len(X)} points; null features {unused} exact zero: {null_ok}; "
              f"symmetry gap {sym_gap:.1e}; sampling worst |diff|/se {worst_z:.2f} over {live_count} live features (limit 3), max |diff| {worst_diff:.1e}")
    return ok, detail


def check_feature_goldens():
    padded = to_features(BidSeries.from_prices("g", 1.0, [0.995, 0.990, 0.985])).values.tolist()
    golden = padded == [0.995, 0.990, 0.985] + [0.985] * 8
    long = BidSeries.from_prices("l", 1.0, 1.0 - 0.004 * np.arange(1, 235))
    trunc = to_features(long).values
    truncation = len(trunc) == 11 and np.array_equal(trunc, long.normalized()[:11])
    honest_ok = True
    for seed in range(50):
        s = gen_honest(HonestGenConfig(), seed=seed)
        m = min(len(s), 11)
        v = to_features(s).values
        honest_ok &= bool(np.allclose(v[:m], 1 - 0.005 * np.arange(1, m + 1), atol=1e-12, rtol=0)
                          and np.all(v[m:] == v[m - 1]))
    ok = golden and truncation and honest_ok
    return ok, f"padding golden {golden}; truncation to 11 {truncation}; honest 1-0.005k over 50 seeds {honest_ok}"


TARAN_CSV = """auction_id,start_price,bid_index,bidder_id,price,label
31908675706,14080717.05,0,cover-1,13939909.88,cartel
31908675706,14080717.05,1,ram-1,2675336.24,cartel
31908675706,14080717.05,2,ram-2,642080.70,cartel
31908675706,14080717.05,3,cover-2,571677.11,cartel
"""


def check_persistence():
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        X, y, _ = feature_matrix(gen_dataset(20, 20, seed=1))
        model = fit(X, y, Hyperparams(n_trees=50, max_depth=3, learning_rate=0.3))
        dataio.save_model(model, tmp / "m.json")
        probe = np.r_[X, np.random.default_rng(0).uniform(size=(500, 11))]
        model_ok = bool(np.array_equal(predict_proba(model, probe), predict_proba(dataio.load_model(tmp / "m.json"), probe)))

        (tmp / "taran.csv").write_text(TARAN_CSV, encoding="utf-8")
        series, warns = dataio.read_auctions(tmp / "taran.csv")
        taran_ok = [w.bid_index for w in warns] == [1, 2] and bool(np.all(np.diff(series[0].normalized()) < 0))

        dataio.write_report(EvalReport(0.41, 0.0, 0.09, 0.50), tmp / "r.txt")
        table = (tmp / "r.txt").read_text(encoding="utf-8")
        table_ok = table == ("True \\ Predicted    Honest  Cartel\n"
                             "Honest                 41%      0%\n"
                             "Cartel                  9%     50%\n"
                             "Accuracy: 91%\n")
    ok = model_ok and taran_ok and table_ok
    return ok, (f"model round-trip bit-identical {model_ok}; taran warnings at bids {[w.bid_index for w in warns]}; "
                f"report table layout {table_ok}")


CRITERIA = [
    (1, "simulation convergence", check_simulation_convergence),
    (2, "minimal-decrement dominance", check_minimal_decrement_dominance),
    (3, "synthetic classification accuracy", check_synthetic_accuracy),
    (4, "logistic gradient/hessian", check_grad_hess),
    (5, "Shapley axioms and sampling agreement", check_shapley_axioms),
    (6, "feature pipeline goldens", check_feature_goldens),
    (7, "persistence round-trips", check_persistence),
]


def _line(num, name, ok, detail):
    return f"[{'PASS' if ok else 'FAIL'}] criterion {num} {name}: {detail}"


def _run(num, capsys):
    _, name, check = CRITERIA[num - 1]
    ok, detail = check()
    with capsys.disabled():
        print("\n" + _line(num, name, ok, detail))
    assert ok, detail


def test_criterion_1_simulation_convergence(capsys):
    _run(1, capsys)


def test_criterion_2_minimal_decrement_dominance(capsys):
    _run(2, capsys)


def test_criterion_3_synthetic_classification(capsys):
    _run(3, capsys)


def test_criterion_4_grad_hess(capsys):
    _run(4, capsys)


def test_criterion_5_shapley(capsys):
    _run(5, capsys)


def test_criterion_6_feature_goldens(capsys):
    _run(6, capsys)


def test_criterion_7_persistence(capsys):
    _run(7, capsys)


if __name__ == "__main__":
    failed = 0
    for num, name, check in CRITERIA:
        ok, detail = check()
        failed += not ok
        print(_line(num, name, ok, detail), flush=True)
    sys.exit(1 if failed else 0)
