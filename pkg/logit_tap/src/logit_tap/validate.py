"""Check dump files against the wire-format invariants.

The validator reports, it never raises: unreadable files, bad JSON, wrong
schema versions, out-of-order probabilities, and broken mass bookkeeping all
come back as violations with line numbers and stable codes.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .errors import WireError
from .wire import MASS_TOLERANCE, parse_header, parse_record

IO = "io"
PARSE = "parse"
SCHEMA = "schema"
ORDERING = "ordering"
MASS = "mass"
TRUNCATION = "truncation"


@dataclass(frozen=True)
class Violation:
    line: int
    code: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    path: str
    records: int
    violations: tuple[Violation, ...]

    @property
    def ok(self) -> bool:
        return not self.violations

    def codes(self) -> set[str]:
        return {v.code for v in self.violations}


def _classify(err: WireError) -> str:
    return SCHEMA if "schema version" in err.message else PARSE


def _check_record(record, header, line: int, out: list[Violation]) -> None:
    probs = [p for _, _, p in record.topk]
    if any(p < 0 for p in probs) or record.rest < 0:
        out.append(Violation(line, MASS, "negative probability mass"))
        return
    if len(record.topk) > header.k:
        out.append(
            Violation(line, TRUNCATION, f"{len(record.topk)} entries but header says k={header.k}")
        )
    for i in range(1, len(probs)):
        if probs[i] > probs[i - 1]:
            out.append(
                Violation(line, ORDERING, f"probabilities not descending at entry {i}")
            )
            break
    total = sum(probs) + record.rest
    if abs(total - 1.0) > MASS_TOLERANCE:
        out.append(Violation(line, MASS, f"top-k mass plus residual is {total!r}, not 1"))


def validate_dump(path: str | Path) -> ValidationReport:
    violations: list[Violation] = []
    records = 0
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        return ValidationReport(str(path), 0, (Violation(0, IO, str(exc)),))
    if not lines:
        return ValidationReport(str(path), 0, (Violation(1, PARSE, "empty dump file"),))
    try:
        header = parse_header(lines[0], 1)
    except WireError as exc:
        violations.append(Violation(exc.line or 1, _classify(exc), exc.message))
        header = None
    for line_no, raw in enumerate(lines[1:], start=2):
        if not raw.strip():
            continue
        try:
            record = parse_record(raw, line_no)
        except WireError as exc:
            violations.append(Violation(exc.line or line_no, _classify(exc), exc.message))
            continue
        records += 1
        if header is not None:
            _check_record(record, header, line_no, violations)
    return ValidationReport(str(path), records, tuple(violations))
