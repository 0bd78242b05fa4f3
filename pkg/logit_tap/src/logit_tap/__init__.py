"""Dump per-step top-k token distributions into a replayable wire format."""

from .dump import DumpResult, dump_contexts, dump_run
from .errors import LogitTapError, ModelLoadError, TokenizationError, WireError
from .providers import TinyModel, resolve
from .validate import ValidationReport, Violation, validate_dump
from .wire import (
    DumpHeader,
    StepDump,
    context_hash,
    read_dump_file,
    vocab_fingerprint,
    write_dump_file,
    write_vocab,
)

__all__ = [
    "DumpHeader",
    "DumpResult",
    "LogitTapError",
    "ModelLoadError",
    "StepDump",
    "TinyModel",
    "TokenizationError",
    "ValidationReport",
    "Violation",
    "WireError",
    "context_hash",
    "dump_contexts",
    "dump_run",
    "read_dump_file",
    "resolve",
    "validate_dump",
    "vocab_fingerprint",
    "write_dump_file",
    "write_vocab",
]
