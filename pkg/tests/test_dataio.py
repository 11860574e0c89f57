import csv
import json
import random

import numpy as np
import pytest

from kartel import dataio
from kartel.auction import BidSeries, Label, Source
from kartel.errors import NonMonotonePrices, ParseError, SchemaVersionMismatch
from kartel.evaluation import EvalReport
from kartel.features import feature_matrix
from kartel.gbdt import Hyperparams, fit, predict_proba
from kartel.generators import gen_dataset
from kartel.shapley import exact_shapley, global_summary
from kartel.simulation import run_experiment

HEADER = "auction_id,start_price,bid_index,bidder_id,price,label\n"

# ram-scheme case: a -1% cover bid, a crash to 2 675 336.24 (19% of start),
# a further 76% cut of the standing price, then a -0.5% step
TARAN_ROWS = [
    "31908675706,14080717.05,0,cover-1,13939909.88,cartel",
    "31908675706,14080717.05,1,ram-1,2675336.24,cartel",
    "31908675706,14080717.05,2,ram-2,642080.70,cartel",
    "31908675706,14080717.05,3,cover-2,571677.11,cartel",
]


def _write(path, rows):
    path.write_text(HEADER + "".join(r + "\n" for r in rows), encoding="utf-8")
    return path


def test_taran_case_ingestion(tmp_path):
    series, warns = dataio.read_auctions(_write(tmp_path / "a.csv", TARAN_ROWS))
    assert len(series) == 1
    s = series[0]
    assert s.label is Label.CARTEL and s.source is Source.INGESTED
    assert s.start_price == 14080717.05
    assert [w.bid_index for w in warns] == [1, 2]
    assert warns[0].decrement_frac == pytest.approx(0.80, abs=1e-9)
    p = s.normalized()
    assert np.all(np.diff(p) < 0) and p[0] < 1.0
    assert p[1] == pytest.approx(0.19, abs=1e-9)
    assert [b.bidder_id for b in s.bids] == [0, 1, 2, 3]


def test_empty_and_header_only_files(tmp_path):
    (tmp_path / "e.csv").write_text("", encoding="utf-8")
    assert dataio.read_auctions(tmp_path / "e.csv") == ([], [])
    assert dataio.read_auctions(_write(tmp_path / "h.csv", [])) == ([], [])


def test_shuffled_rows_give_identical_result(tmp_path):
    rows = TARAN_ROWS + [
        "B2,100.00,0,7,99.50,honest",
        "B2,100.00,1,8,99.00,honest",
        "B2,100.00,2,7,98.50,honest",
        "C3,50.00,0,x,49.75,",
    ]
    ref = dataio.read_auctions(_write(tmp_path / "a.csv", rows))
    for k in range(5):
        shuffled = rows[:]
        random.Random(k).shuffle(shuffled)
        got = dataio.read_auctions(_write(tmp_path / f"s{k}.csv", shuffled))
        assert got == ref
    assert [s.auction_id for s in ref[0]] == ["31908675706", "B2", "C3"]
    assert ref[0][2].label is None


@pytest.mark.parametrize("rows", [
    ["A,100.00,0,1,99.505,honest"],                        # three decimals
    ["A,100.00,0,1,abc,honest"],                           # not a number
    ["A,100.00,0,1,99.50"],                                # missing field
    ["A,100.00,0,1,99.50,honest,extra"],                   # extra field
    ["A,100.00,x,1,99.50,honest"],                         # bad index
    ["A,100.00,0,1,99.50,honest", "A,100.00,2,2,99.00,honest"],   # gap in bid_index
    ["A,100.00,0,1,99.50,honest", "A,101.00,1,2,99.00,honest"],   # two start prices
    ["A,100.00,0,1,99.50,honest", "A,100.00,1,2,99.00,cartel"],   # two labels
    ["A,100.00,0,1,99.50,suspicious"],                     # unknown label
    ["A,0.00,0,1,0.00,honest"],                            # nonpositive start
])
def test_malformed_rows(tmp_path, rows):
    with pytest.raises(ParseError):
        dataio.read_auctions(_write(tmp_path / "bad.csv", rows))


def test_bad_header(tmp_path):
    (tmp_path / "b.csv").write_text("id,start,idx,who,price,label\nA,1,0,1,0.99,\n", encoding="utf-8")
    with pytest.raises(ParseError):
        dataio.read_auctions(tmp_path / "b.csv")


@pytest.mark.parametrize("rows", [
    ["A,100.00,0,1,99.50,", "A,100.00,1,2,99.50,"],
    ["A,100.00,0,1,100.00,"],
    ["A,100.00,0,1,99.00,", "A,100.00,1,2,99.50,"],
])
def test_prices_must_fall(tmp_path, rows):
    with pytest.raises(NonMonotonePrices):
        dataio.read_auctions(_write(tmp_path / "m.csv", rows))


def test_parse_kopecks():
    assert dataio.parse_kopecks("14080717.05") == 1408071705
    assert dataio.parse_kopecks("7") == 700
    assert dataio.parse_kopecks(" 0.5 ") == 50
    for bad in ("1.001", "nan", "inf", ""):
        with pytest.raises(ParseError):
            dataio.parse_kopecks(bad)


def test_auction_csv_round_trip(tmp_path):
    real, _ = dataio.read_auctions(_write(tmp_path / "a.csv", TARAN_ROWS))
    dataio.write_auctions(tmp_path / "b.csv", real)
    again, _ = dataio.read_auctions(tmp_path / "b.csv")
    assert [b.price for b in again[0].bids] == [b.price for b in real[0].bids]
    assert again[0].start_price == real[0].start_price

    data = gen_dataset(10, 10, seed=3)
    dataio.write_auctions(tmp_path / "g.csv", data)
    back, _ = dataio.read_auctions(tmp_path / "g.csv")
    by_id = {s.auction_id: s for s in back}
    for s in data:
        r = by_id[s.auction_id]
        assert r.label is s.label
        assert np.allclose(r.normalized(), s.normalized(), atol=1e-8, rtol=0)
    X1, _, _ = feature_matrix(data)
    X2, _, _ = feature_matrix(sorted(back, key=lambda s: [x.auction_id for x in data].index(s.auction_id)))
    assert np.allclose(X1, X2, atol=1e-8, rtol=0)


def test_features_round_trip_is_exact(tmp_path):
    rng = np.random.default_rng(0)
    X = rng.uniform(size=(7, 11))
    y = np.array([0, 1, -1, 1, 0, 0, 1])
    ids = [f"id{k}" for k in range(7)]
    dataio.write_features(tmp_path / "f.csv", X, y, ids)
    X2, y2, ids2 = dataio.read_features(tmp_path / "f.csv")
    assert np.array_equal(X, X2) and np.array_equal(y, y2) and ids == ids2
    with open(tmp_path / "f.csv", newline="") as fh:
        assert next(csv.reader(fh)) == ["auction_id"] + [f"f{i}" for i in range(1, 12)] + ["label"]


def test_features_header_checked(tmp_path):
    (tmp_path / "f.csv").write_text("auction_id,x1,label\nA,0.9,honest\n", encoding="utf-8")
    with pytest.raises(ParseError):
        dataio.read_features(tmp_path / "f.csv")


def test_model_round_trip_is_bit_identical(tmp_path):
    X, y, _ = feature_matrix(gen_dataset(20, 20, seed=5))
    m = fit(X, y, Hyperparams(n_trees=30, max_depth=3, learning_rate=0.3))
    dataio.save_model(m, tmp_path / "m.json")
    m2 = dataio.load_model(tmp_path / "m.json")
    probe = np.random.default_rng(1).uniform(size=(200, 11))
    assert np.array_equal(predict_proba(m, probe), predict_proba(m2, probe))
    assert np.array_equal(predict_proba(m, X), predict_proba(m2, X))


def test_model_schema(tmp_path):
    X, y, _ = feature_matrix(gen_dataset(10, 10, seed=5))
    dataio.save_model(fit(X, y, Hyperparams(n_trees=2, max_depth=1)), tmp_path / "m.json")
    doc = json.loads((tmp_path / "m.json").read_text())
    assert set(doc) == {"format", "version", "n_features", "base_score", "learning_rate", "params", "trees"}
    assert doc["format"] == "kartel-gbdt" and doc["version"] == 1 and len(doc["trees"]) == 2
    doc["version"] = 2
    (tmp_path / "v2.json").write_text(json.dumps(doc))
    with pytest.raises(SchemaVersionMismatch):
        dataio.load_model(tmp_path / "v2.json")
    (tmp_path / "junk.json").write_text("{not json")
    with pytest.raises(ParseError):
        dataio.load_model(tmp_path / "junk.json")


def test_report_writers(tmp_path):
    report = EvalReport(0.41, 0.0, 0.09, 0.50, n=12)
    dataio.write_report(report, tmp_path / "r.txt")
    assert (tmp_path / "r.txt").read_text() == (
        "True \\ Predicted    Honest  Cartel\n"
        "Honest                 41%      0%\n"
        "Cartel                  9%     50%\n"
        "Accuracy: 91%\n"
    )
    dataio.write_report(report, tmp_path / "r.json", seed=1)
    doc = json.loads((tmp_path / "r.json").read_text())
    assert doc["format"] == "kartel-report" and doc["version"] == 1 and doc["seed"] == 1
    assert doc["accuracy"] == pytest.approx(0.91)
    assert set(doc["confusion"]) == {"honest_honest", "honest_cartel", "cartel_honest", "cartel_cartel"}
    assert dataio.read_report(tmp_path / "r.json") == report


def test_trajectory_round_trip(tmp_path):
    run = run_experiment((0.34, 0.33, 0.33), 1000, sample_every=100, seed=0)
    dataio.write_trajectory(run, tmp_path / "t.csv")
    index, shares = dataio.read_trajectory(tmp_path / "t.csv")
    assert np.array_equal(index, run.auction_index) and np.array_equal(shares, run.shares)
    assert (tmp_path / "t.csv").read_text().splitlines()[0] == \
        "auction_index,share_aggressive,share_passive,share_random"


def test_explanation_and_summary_files(tmp_path):
    X, y, ids = feature_matrix(gen_dataset(10, 10, seed=6))
    m = fit(X, y, Hyperparams(n_trees=5, max_depth=2))
    e = exact_shapley(m, X[0], X, ids[0])
    dataio.write_explanation(e, tmp_path / "e.json")
    back = dataio.read_explanation(tmp_path / "e.json")
    assert np.array_equal(back.phis, e.phis) and back.predicted == e.predicted
    assert set(json.loads((tmp_path / "e.json").read_text())) == {"auction_id", "base_value", "phis", "predicted"}
    summary = global_summary(m, X[:3], X, ids[:3])
    dataio.write_summary(summary, tmp_path / "s.csv", tmp_path / "sc.csv")
    rows = list(csv.reader(open(tmp_path / "s.csv")))
    assert rows[0] == ["bid_index", "mean_abs_phi"] and len(rows) == 12
    assert [float(r[1]) for r in rows[1:]] == summary.mean_abs_phi.tolist()
    scatter = list(csv.reader(open(tmp_path / "sc.csv")))
    assert scatter[0] == ["auction_id", "bid_index", "phi", "abs_phi"] and len(scatter) == 1 + 3 * 11
