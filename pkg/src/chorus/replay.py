"""Fuse distributions recorded by an external dumper instead of live models.

Wire format (one file per model run): a JSONL header
`{"v": 1, "k": K, "vocab_fp": "..."}` followed by one line per recorded
step, `{"v": 1, "model": "...", "step": n, "ctx": "<hash>", "topk":
[["tok", id, p], ...], "rest": r}`. `ctx` is the first 16 hex digits of
the SHA-256 of the UTF-8 context text; `rest` is the probability mass the
dumper truncated away, which replay drops and renormalizes over the top-k.

Vocabularies arrive as separate `#vocab v1` files and are matched to dumps
by fingerprint. Replay then rebuilds ordinary decode sessions whose step
functions look up the recorded distribution for the current context, so the
whole fusion stack runs unchanged.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .alignment import align_exact, align_min_edit, align_prefix
from .decoding import ASSISTANT, MAIN, DecodeSession, ModelEndpoint, decode
from .errors import (
    EndpointFailure,
    FingerprintMismatch,
    MainEndpointFailure,
    ParseError,
    SchemaVersionMismatch,
)
from .experiment import MetricsRow
from .fusion import CORE, ConsistencyKernel, Distribution, EnsembleConfig
from .tasks import TaskInstance, score
from .vocab import Vocabulary, load_vocabulary

SCHEMA_VERSION = 1

_ALIGN_FNS = {"exact": align_exact, "prefix": align_prefix, "min_edit": align_min_edit}


def context_hash(text: str) -> str:
    """The wire format's context key: 16 hex digits of SHA-256."""
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class DumpHeader:
    k: int
    vocab_fp: str


@dataclass(frozen=True)
class StepRecord:
    model: str
    step: int
    ctx: str
    topk: tuple[tuple[str, int, float], ...]
    rest: float


def _parse_line(raw: str, line_no: int) -> dict:
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ParseError(f"not valid JSON: {exc.msg}", line=line_no) from exc
    if not isinstance(obj, dict):
        raise ParseError("expected a JSON object", line=line_no)
    version = obj.get("v")
    if version != SCHEMA_VERSION:
        raise SchemaVersionMismatch(
            f"schema version {version!r}, this reader speaks {SCHEMA_VERSION}", line=line_no
        )
    return obj


def _parse_record(obj: dict, line_no: int) -> StepRecord:
    try:
        topk_raw = obj["topk"]
        record = StepRecord(
            model=str(obj["model"]),
            step=int(obj["step"]),
            ctx=str(obj["ctx"]),
            topk=tuple((str(t), int(i), float(p)) for t, i, p in topk_raw),
            rest=float(obj["rest"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed step record: {exc}", line=line_no) from exc
    for _, token_id, prob in record.topk:
        if prob < 0:
            raise ParseError(f"negative probability {prob} for id {token_id}", line=line_no)
    return record


def read_dump(path: str | Path) -> tuple[DumpHeader, list[StepRecord]]:
    """Parse one dump file; parse errors carry the offending line number."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines:
        raise ParseError("empty dump file", line=1)
    head = _parse_line(lines[0], 1)
    try:
        header = DumpHeader(k=int(head["k"]), vocab_fp=str(head["vocab_fp"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed header: {exc}", line=1) from exc
    records = []
    for line_no, raw in enumerate(lines[1:], start=2):
        if not raw.strip():
            continue
        records.append(_parse_record(_parse_line(raw, line_no), line_no))
    return header, records


def write_dump(
    path: str | Path,
    model_id: str,
    vocabulary: Vocabulary,
    step_fn,
    contexts: Iterable[str],
    k: int | None = None,
) -> int:
    """Record a model's distributions at the given contexts; returns line count.

    Duplicate contexts are recorded once (the models are deterministic, so
    repeats carry no information). k=None keeps the full vocabulary.
    """
    keep = len(vocabulary) if k is None else k
    if keep < 1:
        raise ValueError("k must be >= 1")
    header = {"v": SCHEMA_VERSION, "k": keep, "vocab_fp": vocabulary.fingerprint}
    lines = [json.dumps(header, separators=(",", ":"))]
    seen = set()
    step = 0
    for context in contexts:
        ctx = context_hash(context)
        if ctx in seen:
            continue
        seen.add(ctx)
        probs = step_fn(context).probs
        order = np.argsort(-probs, kind="stable")[:keep]
        topk = [[vocabulary.tokens[int(j)], int(j), float(probs[j])] for j in order]
        rest = max(0.0, 1.0 - float(probs[order].sum()))
        record = {
            "v": SCHEMA_VERSION,
            "model": model_id,
            "step": step,
            "ctx": ctx,
            "topk": topk,
            "rest": rest,
        }
        lines.append(json.dumps(record, separators=(",", ":"), ensure_ascii=False))
        step += 1
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return len(lines)


def visited_contexts(prompt: str, transcript: list[dict]) -> list[str]:
    """Every context a session queried its endpoints with while decoding."""
    contexts = [prompt]
    for entry in transcript[:-1]:
        contexts.append(prompt + entry["text"])
    return contexts


@dataclass(frozen=True)
class RecordedTokenizer:
    """Just enough of the tokenizer contract for a session to type-check."""

    vocabulary: Vocabulary
    scheme: str = "recorded"


@dataclass
class RecordedModel:
    """A model reconstructed from its dump: context hash -> distribution."""

    model_id: str
    vocabulary: Vocabulary
    table: dict[str, StepRecord] = field(default_factory=dict)

    def add(self, record: StepRecord) -> None:
        size = len(self.vocabulary)
        for token, token_id, _ in record.topk:
            if not 0 <= token_id < size:
                raise ParseError(
                    f"token id {token_id} outside vocabulary of size {size} (model {self.model_id})"
                )
            if self.vocabulary.tokens[token_id] != token:
                raise FingerprintMismatch(
                    f"dump names id {token_id} {token!r} but the vocabulary says "
                    f"{self.vocabulary.tokens[token_id]!r} (model {self.model_id})"
                )
        self.table.setdefault(record.ctx, record)

    def step(self, context: str) -> Distribution:
        key = context_hash(context)
        record = self.table.get(key)
        if record is None:
            raise EndpointFailure(
                self.model_id, KeyError(f"no recorded distribution for context hash {key}")
            )
        probs = np.zeros(len(self.vocabulary))
        for _, token_id, prob in record.topk:
            probs[token_id] += prob
        total = probs.sum()
        if total <= 0:
            raise EndpointFailure(
                self.model_id, ValueError(f"recorded step {key} carries zero probability mass")
            )
        # Truncated (residual) mass is dropped and the top-k renormalized.
        return Distribution(self.vocabulary.fingerprint, probs / total)


@dataclass(frozen=True)
class ReplaySpec:
    """Session shape for replays: who anchors, how to align, what to run.

    joiners maps model id -> string inserted before each emitted token when
    that model's vocabulary anchors a session (word vocabularies need " ").
    The ensemble session uses the main model's entry.
    """

    main: str
    modes: tuple[str, ...] = (CORE,)
    kernel: ConsistencyKernel = field(default_factory=ConsistencyKernel)
    aligner: str = "prefix"
    main_weight_floor: float = 0.5
    entropy_floor: float = 1e-3
    stop_token: str | None = ";"
    max_steps: int = 12
    joiners: dict[str, str] = field(default_factory=dict)

    def joiner(self, model_id: str) -> str:
        return self.joiners.get(model_id, "")


def load_recorded_models(
    dump_paths: Sequence[str | Path], vocab_paths: Sequence[str | Path]
) -> dict[str, RecordedModel]:
    """Read all dumps, resolve their vocabularies by fingerprint."""
    by_fingerprint = {}
    for path in vocab_paths:
        vocab = load_vocabulary(path)
        by_fingerprint[vocab.fingerprint] = vocab
    models: dict[str, RecordedModel] = {}
    for path in dump_paths:
        header, records = read_dump(path)
        vocab = by_fingerprint.get(header.vocab_fp)
        if vocab is None:
            raise FingerprintMismatch(
                f"{path}: no vocabulary file with fingerprint {header.vocab_fp}"
            )
        for record in records:
            model = models.get(record.model)
            if model is None:
                model = models.setdefault(record.model, RecordedModel(record.model, vocab))
            if model.vocabulary.fingerprint != header.vocab_fp:
                raise FingerprintMismatch(
                    f"model {record.model} appears under two vocabulary fingerprints"
                )
            model.add(record)
    return models


def _session(
    recorded: dict[str, RecordedModel], spec: ReplaySpec, mode: str
) -> DecodeSession:
    main = recorded[spec.main]
    assistants = [recorded[mid] for mid in sorted(recorded) if mid != spec.main]
    maps = {
        a.model_id: _ALIGN_FNS[spec.aligner](a.vocabulary, main.vocabulary)
        for a in assistants
    }
    return DecodeSession(
        config=EnsembleConfig(
            spec.kernel,
            mode=mode,
            main_weight_floor=spec.main_weight_floor,
            entropy_floor=spec.entropy_floor,
        ),
        main=ModelEndpoint(main.model_id, RecordedTokenizer(main.vocabulary), main.step, MAIN),
        assistants=[
            ModelEndpoint(a.model_id, RecordedTokenizer(a.vocabulary), a.step, ASSISTANT)
            for a in assistants
        ],
        maps=maps,
        stop_token=spec.stop_token,
        max_steps=spec.max_steps,
        record=True,
        token_joiner=spec.joiner(main.model_id),
    )


def replay_transcript(
    recorded: dict[str, RecordedModel], spec: ReplaySpec, prompt: str, mode: str | None = None
) -> tuple[str, list[dict]]:
    """Decode one prompt from recordings; same return shape as a live decode."""
    session = _session(recorded, spec, mode or spec.modes[0])
    return decode(session, prompt)


def _accuracy(session: DecodeSession, suite: Sequence[TaskInstance]) -> float:
    hits = 0
    for instance in suite:
        generated, _ = decode(session, instance.prompt)
        hits += score(generated, instance)
    return hits / len(suite)


def _solo_accuracy(
    model: RecordedModel, spec: ReplaySpec, suite: Sequence[TaskInstance]
) -> float | None:
    """Replay one model alone; None when its dump lacks the needed contexts."""
    session = DecodeSession(
        config=EnsembleConfig(spec.kernel, mode="vanilla"),
        main=ModelEndpoint(model.model_id, RecordedTokenizer(model.vocabulary), model.step, MAIN),
        stop_token=spec.stop_token,
        max_steps=spec.max_steps,
        record=False,
        token_joiner=spec.joiner(model.model_id),
    )
    try:
        return _accuracy(session, suite)
    except (EndpointFailure, MainEndpointFailure):
        return None


def replay(
    dump_paths: Sequence[str | Path],
    vocab_paths: Sequence[str | Path],
    suite: Sequence[TaskInstance],
    spec: ReplaySpec,
) -> list[MetricsRow]:
    """Score recorded runs: baseline rows per replayable model, then one per mode.

    An empty dump set yields an empty metrics list. Single-model baselines
    are emitted only for models whose dumps cover their own solo decode
    paths; ensembles are compared against the best baseline that exists.
    """
    recorded = load_recorded_models(dump_paths, vocab_paths)
    if not recorded:
        return []
    if spec.main not in recorded:
        raise FingerprintMismatch(f"no dump provides the main model {spec.main!r}")
    rows: list[MetricsRow] = []
    singles = {}
    for model_id in sorted(recorded):
        accuracy = _solo_accuracy(recorded[model_id], spec, suite)
        if accuracy is not None:
            singles[model_id] = accuracy
    best_single = max(singles.values()) if singles else None
    for model_id, accuracy in singles.items():
        rows.append(
            MetricsRow(
                method=f"single:{model_id}",
                mode="-",
                kernel="-",
                rho=0.0,
                noise_std=0.0,
                seed=0,
                accuracy=accuracy,
                delta_vs_best_single=accuracy - best_single,
                negative_ensemble=accuracy < best_single,
            )
        )
    for mode in spec.modes:
        accuracy = _accuracy(_session(recorded, spec, mode), suite)
        rows.append(
            MetricsRow(
                method="replay",
                mode=mode,
                kernel=spec.kernel.kind,
                rho=0.0,
                noise_std=0.0,
                seed=0,
                accuracy=accuracy,
                delta_vs_best_single=0.0 if best_single is None else accuracy - best_single,
                negative_ensemble=False if best_single is None else accuracy < best_single,
            )
        )
    return rows
