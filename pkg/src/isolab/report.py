"""Tabular experiment reports with deterministic CSV serialization.

Schema: header `label,<value columns...>,tolerance,pass`, metadata rows
first (label `meta:key=value`, empty value cells), then one row per
measurement. Floats print with 17 significant digits so identical runs
produce byte-identical files.
"""
from __future__ import annotations

from dataclasses import dataclass, field

PASS = "pass"
FAIL = "fail"
INFO = "info"
INCONCLUSIVE = "inconclusive"

_STATUSES = (PASS, FAIL, INFO, INCONCLUSIVE)


def format_float(x) -> str:
    return "%.17g" % float(x)


@dataclass
class ReportRow:
    label: str
    values: dict
    tolerance: float
    status: str

    def __post_init__(self):
        if self.status not in _STATUSES:
            raise ValueError(f"unknown row status {self.status!r}")


@dataclass
class ExperimentReport:
    name: str
    columns: list
    rows: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def add(self, label: str, values: dict, tolerance: float, status) -> ReportRow:
        if isinstance(status, bool):
            status = PASS if status else FAIL
        missing = [c for c in self.columns if c not in values]
        extra = [c for c in values if c not in self.columns]
        if missing or extra:
            raise ValueError(
                f"row columns mismatch (missing {missing}, extra {extra})"
            )
        row = ReportRow(label, dict(values), float(tolerance), status)
        self.rows.append(row)
        return row

    def add_info(self, label: str, values: dict) -> ReportRow:
        return self.add(label, values, float("inf"), INFO)

    @property
    def status(self) -> str:
        states = {r.status for r in self.rows}
        if FAIL in states:
            return FAIL
        if INCONCLUSIVE in states:
            return INCONCLUSIVE
        return PASS

    @property
    def passed(self) -> bool:
        return self.status == PASS

    def to_csv(self) -> str:
        lines = ["label," + ",".join(self.columns) + ",tolerance,pass"]
        blank = "," * len(self.columns)
        for key in self.metadata:
            lines.append(f"meta:{key}={self.metadata[key]}{blank},inf,{INFO}")
        for row in self.rows:
            cells = [row.label]
            cells += [format_float(row.values[c]) for c in self.columns]
            cells.append(format_float(row.tolerance))
            cells.append(row.status)
            lines.append(",".join(cells))
        return "\n".join(lines) + "\n"

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv())
