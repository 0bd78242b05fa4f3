"""The replay wire format, writer side.

Two file kinds travel between a dumper and a fusion engine, and they are the
ONLY contract between the two; nothing else is shared.

Vocabulary file: a header line `#vocab v1 <fingerprint>` followed by one
token per line, line order defining token ids. The fingerprint is the first
16 hex digits of a SHA-256 over the token list, each token hashed as a
4-byte big-endian length prefix plus its UTF-8 bytes (length prefixing keeps
token boundaries unambiguous without a separator).

Dump file: JSONL. First line `{"v": 1, "k": K, "vocab_fp": "..."}`, then one
line per recorded step:
`{"v": 1, "model": "...", "step": n, "ctx": "<hash>", "topk":
[["tok", id, p], ...], "rest": r}`. `ctx` is the first 16 hex digits of the
SHA-256 of the UTF-8 context text. `topk` is sorted by descending
probability; `rest` is the truncated-away residual mass, so the top-k plus
`rest` sum to 1 within 1e-6.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .errors import WireError

SCHEMA_VERSION = 1
HASH_HEX_LEN = 16
MASS_TOLERANCE = 1e-6


def context_hash(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:HASH_HEX_LEN]


def vocab_fingerprint(tokens: Sequence[str]) -> str:
    h = hashlib.sha256()
    for tok in tokens:
        raw = tok.encode("utf-8")
        h.update(len(raw).to_bytes(4, "big"))
        h.update(raw)
    return h.hexdigest()[:HASH_HEX_LEN]


def write_vocab(path: str | Path, tokens: Sequence[str]) -> str:
    """Write a vocabulary file; returns the fingerprint it was stamped with."""
    for tok in tokens:
        if not tok or "\n" in tok or "\r" in tok:
            raise WireError(f"token {tok!r} is not representable in a vocabulary file")
    if len(set(tokens)) != len(tokens):
        raise WireError("vocabulary tokens must be unique")
    fp = vocab_fingerprint(tokens)
    lines = [f"#vocab v1 {fp}"]
    lines.extend(tokens)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return fp


@dataclass(frozen=True)
class DumpHeader:
    k: int
    vocab_fp: str


@dataclass(frozen=True)
class StepDump:
    """One recorded step: where the model was and what it predicted."""

    model: str
    step: int
    ctx: str
    topk: tuple[tuple[str, int, float], ...]
    rest: float


def _dump_json(obj) -> str:
    return json.dumps(obj, separators=(",", ":"), ensure_ascii=False)


def header_line(header: DumpHeader) -> str:
    return _dump_json({"v": SCHEMA_VERSION, "k": header.k, "vocab_fp": header.vocab_fp})


def record_line(record: StepDump) -> str:
    return _dump_json(
        {
            "v": SCHEMA_VERSION,
            "model": record.model,
            "step": record.step,
            "ctx": record.ctx,
            "topk": [[tok, tok_id, prob] for tok, tok_id, prob in record.topk],
            "rest": record.rest,
        }
    )


def write_dump_file(
    path: str | Path, header: DumpHeader, records: Iterable[StepDump]
) -> int:
    lines = [header_line(header)]
    lines.extend(record_line(r) for r in records)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return len(lines)


def _load_object(raw: str, line: int) -> dict:
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise WireError(f"not valid JSON: {exc.msg}", line=line) from exc
    if not isinstance(obj, dict):
        raise WireError("expected a JSON object", line=line)
    if obj.get("v") != SCHEMA_VERSION:
        raise WireError(
            f"schema version {obj.get('v')!r}, this reader speaks {SCHEMA_VERSION}", line=line
        )
    return obj


def parse_header(raw: str, line: int = 1) -> DumpHeader:
    obj = _load_object(raw, line)
    try:
        header = DumpHeader(k=int(obj["k"]), vocab_fp=str(obj["vocab_fp"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise WireError(f"malformed header: {exc}", line=line) from exc
    if header.k < 1:
        raise WireError(f"k must be >= 1, got {header.k}", line=line)
    return header


def parse_record(raw: str, line: int) -> StepDump:
    obj = _load_object(raw, line)
    try:
        record = StepDump(
            model=str(obj["model"]),
            step=int(obj["step"]),
            ctx=str(obj["ctx"]),
            topk=tuple((str(t), int(i), float(p)) for t, i, p in obj["topk"]),
            rest=float(obj["rest"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise WireError(f"malformed step record: {exc}", line=line) from exc
    return record


def read_dump_file(path: str | Path) -> tuple[DumpHeader, list[StepDump]]:
    """Strict reader: raises WireError at the first malformed line."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines:
        raise WireError("empty dump file", line=1)
    header = parse_header(lines[0], 1)
    records = []
    for line_no, raw in enumerate(lines[1:], start=2):
        if not raw.strip():
            continue
        records.append(parse_record(raw, line_no))
    return header, records
