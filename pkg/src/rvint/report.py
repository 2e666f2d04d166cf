"""Pass/fail rows shared by diagnostics and the experiment harness."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

CSV_HEADER = ("quantity", "estimate", "standard_error", "tolerance", "pass")


def fmt(x) -> str:
    """17 significant digits, which round-trips any float64."""
    if isinstance(x, bool):
        return "true" if x else "false"
    if x is None:
        return ""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.17g}"


@dataclass
class CheckRow:
    quantity: str
    estimate: float
    standard_error: float
    tolerance: float
    passed: bool
    note: str = ""

    def csv_fields(self):
        return [self.quantity, fmt(self.estimate), fmt(self.standard_error), fmt(self.tolerance), fmt(bool(self.passed))]


@dataclass
class CheckReport:
    name: str
    rows: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def row(self, quantity: str) -> CheckRow:
        for r in self.rows:
            if r.quantity == quantity:
                return r
        raise KeyError(quantity)

    def add(self, quantity, estimate, standard_error, tolerance, passed, note="") -> CheckRow:
        r = CheckRow(quantity, float(estimate), float(standard_error), float(tolerance), bool(passed), note)
        self.rows.append(r)
        return r

    def extend(self, other: "CheckReport", prefix: str = "") -> None:
        for r in other.rows:
            self.rows.append(CheckRow(prefix + r.quantity, r.estimate, r.standard_error, r.tolerance, r.passed, r.note))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in self.rows:
            w.writerow(r.csv_fields())
        return buf.getvalue()
