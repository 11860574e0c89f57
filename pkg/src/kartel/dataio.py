"""CSV/JSON persistence for auctions, features, models, reports and plots.

File layouts (UTF-8, comma separated, dot decimals):

``auctions.csv``
    ``auction_id,start_price,bid_index,bidder_id,price,label`` with money in
    rubles to at most two decimals and ``label`` one of ``honest``,
    ``cartel`` or empty.
``features.csv``
    ``auction_id,f1..fL,label``.
``trajectory.csv``
    ``auction_index,share_aggressive,share_passive,share_random``.
``summary.csv``
    ``bid_index,mean_abs_phi``; the companion scatter file has
    ``auction_id,bid_index,phi,abs_phi``.
"""

from __future__ import annotations

import csv
import json
import logging
from collections import defaultdict
from dataclasses import dataclass
from decimal import ROUND_HALF_EVEN, Decimal, InvalidOperation
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .auction import AuctionConfig, Bid, BidSeries, Label, Source, out_of_bounds_decrements
from .errors import NonMonotonePrices, ParseError, SchemaVersionMismatch
from .evaluation import EvalReport
from .gbdt import MODEL_VERSION, GbdtModel, model_from_dict, model_to_dict
from .shapley import GlobalSummary, ShapleyExplanation

log = logging.getLogger(__name__)

AUCTION_COLUMNS = ["auction_id", "start_price", "bid_index", "bidder_id", "price", "label"]
TRAJECTORY_COLUMNS = ["auction_index", "share_aggressive", "share_passive", "share_random"]
REPORT_VERSION = 1
# Notional start price used when writing normalized (start = 1) series.
NOTIONAL_START = Decimal("1000000.00")


@dataclass(frozen=True)
class IngestWarning:
    auction_id: str
    bid_index: int
    decrement_frac: float

    def __str__(self) -> str:
        return (f"auction {self.auction_id}: bid {self.bid_index} drops {100 * self.decrement_frac:.4g}% "
                f"of the start price, outside the legal step range")


def parse_kopecks(text: str) -> int:
    """Money string to integer kopecks; more than two decimals is an error."""
    try:
        value = Decimal(text.strip())
    except (InvalidOperation, AttributeError):
        raise ParseError(f"not a money amount: {text!r}") from None
    scaled = value * 100
    if not value.is_finite() or scaled != scaled.to_integral_value():
        raise ParseError(f"money amount {text!r} has more than two decimals")
    return int(scaled)


def _format_kopecks(k: int) -> str:
    sign = "-" if k < 0 else ""
    k = abs(k)
    return f"{sign}{k // 100}.{k % 100:02d}"


def _money(value: float, scale: Decimal = Decimal(1)) -> str:
    kopecks = (Decimal(repr(float(value))) * scale * 100).quantize(Decimal(1), ROUND_HALF_EVEN)
    return _format_kopecks(int(kopecks))


def read_auctions(path, config: AuctionConfig = AuctionConfig()) -> tuple[list[BidSeries], list[IngestWarning]]:
    """Group rows into bid histories, sorted by auction id.

    Decrements outside ``config``'s legal range only produce warnings;
    real cartel data breaks them on purpose.
    """
    text = Path(path).read_text(encoding="utf-8")
    if not text.strip():
        return [], []
    reader = csv.DictReader(text.splitlines())
    if reader.fieldnames is None or [c.strip() for c in reader.fieldnames] != AUCTION_COLUMNS:
        raise ParseError(f"{path}: header must be {','.join(AUCTION_COLUMNS)}, got {reader.fieldnames}")
    rows = defaultdict(list)
    for lineno, row in enumerate(reader, start=2):
        if None in row or any(v is None for v in row.values()):
            raise ParseError(f"{path}:{lineno}: wrong number of fields")
        aid = row["auction_id"].strip()
        if not aid:
            raise ParseError(f"{path}:{lineno}: empty auction_id")
        try:
            index = int(row["bid_index"])
        except ValueError:
            raise ParseError(f"{path}:{lineno}: bad bid_index {row['bid_index']!r}") from None
        label_text = row["label"].strip()
        try:
            label = Label.parse(label_text) if label_text else None
        except ValueError as exc:
            raise ParseError(f"{path}:{lineno}: {exc}") from None
        rows[aid].append((index, parse_kopecks(row["start_price"]), row["bidder_id"].strip(),
                          parse_kopecks(row["price"]), label, lineno))

    series, warns = [], []
    for aid in sorted(rows):
        group = sorted(rows[aid], key=lambda r: r[0])
        starts = {r[1] for r in group}
        labels = {r[4] for r in group}
        if len(starts) != 1:
            raise ParseError(f"auction {aid}: inconsistent start_price")
        if len(labels) != 1:
            raise ParseError(f"auction {aid}: inconsistent label")
        if [r[0] for r in group] != list(range(len(group))):
            raise ParseError(f"auction {aid}: bid_index must run 0..{len(group) - 1} without gaps")
        start_k = starts.pop()
        if start_k <= 0:
            raise ParseError(f"auction {aid}: start_price must be positive")
        ids: dict[str, int] = {}
        bids = []
        for index, _, who, price_k, _, lineno in group:
            if who.lstrip("-").isdigit():
                bidder = int(who)
            else:
                bidder = ids.setdefault(who, len(ids))
            if price_k < 0:
                raise ParseError(f"line {lineno}: negative price")
            bids.append(Bid(bidder, price_k / 100, index))
        prev = start_k
        for index, _, _, price_k, _, _ in group:
            if price_k >= prev:
                raise NonMonotonePrices(f"auction {aid}: bid {index} does not lower the price")
            prev = price_k
        s = BidSeries(aid, start_k / 100, bids, labels.pop(), Source.INGESTED)
        for index, frac in out_of_bounds_decrements(s, config):
            w = IngestWarning(aid, index, frac)
            log.warning("%s", w)
            warns.append(w)
        series.append(s)
    return series, warns


def write_auctions(path, series: Iterable[BidSeries]) -> None:
    """Write bid histories; series with ``start_price == 1`` are scaled to a notional lot."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(AUCTION_COLUMNS)
        for s in series:
            # normalized series are written against a notional lot
            scale = NOTIONAL_START if s.start_price == 1.0 else Decimal(1)
            start_text = _money(s.start_price, scale)
            label = "" if s.label is None else str(s.label)
            for b in s.bids:
                w.writerow([s.auction_id, start_text, b.index, b.bidder_id, _money(b.price, scale), label])


def write_features(path, X, y=None, ids: Optional[Sequence[str]] = None) -> None:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    L = X.shape[1]
    ids = list(ids) if ids is not None else [str(i) for i in range(len(X))]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["auction_id"] + [f"f{i + 1}" for i in range(L)] + ["label"])
        for k, row in enumerate(X):
            lab = "" if y is None or y[k] < 0 else str(Label(int(y[k])))
            w.writerow([ids[k]] + [repr(float(v)) for v in row] + [lab])


def read_features(path):
    """``(X, y, ids)``; ``y`` holds -1 for unlabeled rows."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ParseError(f"{path}: empty features file")
        L = len(header) - 2
        if L < 1 or header[0] != "auction_id" or header[-1] != "label" or header[1:-1] != [f"f{i + 1}" for i in range(L)]:
            raise ParseError(f"{path}: header must be auction_id,f1..fL,label")
        X, y, ids = [], [], []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != L + 2:
                raise ParseError(f"{path}:{lineno}: expected {L + 2} fields")
            try:
                X.append([float(v) for v in row[1:-1]])
                y.append(int(Label.parse(row[-1])) if row[-1].strip() else -1)
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from None
            ids.append(row[0])
    return np.array(X, dtype=float).reshape(len(X), L), np.array(y, dtype=int), ids


def save_model(model: GbdtModel, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=1), encoding="utf-8")


def load_model(path) -> GbdtModel:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from None
    if doc.get("format") != "kartel-gbdt" or doc.get("version") != MODEL_VERSION:
        raise SchemaVersionMismatch(
            f"{path}: expected kartel-gbdt version {MODEL_VERSION}, got {doc.get('format')!r} version {doc.get('version')!r}"
        )
    return model_from_dict(doc)


def report_to_dict(report: EvalReport, **extra) -> dict:
    doc = {
        "format": "kartel-report",
        "version": REPORT_VERSION,
        "confusion": {
            "honest_honest": report.honest_honest,
            "honest_cartel": report.honest_cartel,
            "cartel_honest": report.cartel_honest,
            "cartel_cartel": report.cartel_cartel,
        },
        "accuracy": report.accuracy,
        "n_test": report.n,
    }
    doc.update(extra)
    return doc


def write_report(report: EvalReport, path, **extra) -> None:
    """JSON report for ``*.json`` paths, the 2x2 text table otherwise."""
    path = Path(path)
    if path.suffix.lower() == ".json":
        path.write_text(json.dumps(report_to_dict(report, **extra), indent=2), encoding="utf-8")
    else:
        path.write_text(report.table(), encoding="utf-8")


def read_report(path) -> EvalReport:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format") != "kartel-report" or doc.get("version") != REPORT_VERSION:
        raise SchemaVersionMismatch(f"{path}: not a kartel-report version {REPORT_VERSION}")
    return EvalReport.from_dict({**doc["confusion"], "n": doc.get("n_test", 0)})


def write_trajectory(run, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(TRAJECTORY_COLUMNS)
        for t, shares in zip(run.auction_index, run.shares):
            w.writerow([int(t)] + [repr(float(s)) for s in shares])


def read_trajectory(path) -> tuple[np.ndarray, np.ndarray]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        if next(reader, None) != TRAJECTORY_COLUMNS:
            raise ParseError(f"{path}: header must be {','.join(TRAJECTORY_COLUMNS)}")
        rows = list(reader)
    index = np.array([int(r[0]) for r in rows], dtype=np.int64)
    shares = np.array([[float(v) for v in r[1:]] for r in rows], dtype=float).reshape(len(rows), 3)
    return index, shares


def write_explanation(explanation: ShapleyExplanation, path) -> None:
    Path(path).write_text(json.dumps(explanation.to_dict(), indent=2), encoding="utf-8")


def read_explanation(path) -> ShapleyExplanation:
    return ShapleyExplanation.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def write_summary(summary: GlobalSummary, path, scatter_path=None) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["bid_index", "mean_abs_phi"])
        for i, v in enumerate(summary.mean_abs_phi):
            w.writerow([i + 1, repr(float(v))])
    if scatter_path is not None:
        with open(scatter_path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["auction_id", "bid_index", "phi", "abs_phi"])
            for aid, i, phi, a in summary.scatter():
                w.writerow([aid, i, repr(phi), repr(a)])
