"""Run a model and capture its per-step distributions as dump files."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .providers import PROBS, resolve
from .wire import (
    DumpHeader,
    StepDump,
    context_hash,
    vocab_fingerprint,
    write_dump_file,
    write_vocab,
)


@dataclass(frozen=True)
class DumpResult:
    model_id: str
    vocab_path: Path
    dump_paths: tuple[Path, ...]


def _provider(model) -> object:
    return resolve(model) if isinstance(model, str) else model


def _step_probs(provider, context: str) -> np.ndarray:
    scores = np.asarray(provider.scores(context), dtype=float)
    if getattr(provider, "emits", "logits") == PROBS:
        return scores / scores.sum()
    # Softmax before any truncation; shift by the max for stability.
    shifted = np.exp(scores - scores.max())
    return shifted / shifted.sum()


def _record(provider, vocab: tuple[str, ...], context: str, step: int, k: int) -> tuple[StepDump, int]:
    """Dump one context; returns the record and the argmax token id."""
    probs = _step_probs(provider, context)
    order = np.argsort(-probs, kind="stable")
    kept = order[:k]
    topk = tuple((vocab[int(j)], int(j), float(probs[j])) for j in kept)
    rest = max(0.0, 1.0 - float(probs[kept].sum()))
    record = StepDump(
        model=provider.model_id,
        step=step,
        ctx=context_hash(context),
        topk=topk,
        rest=rest,
    )
    return record, int(order[0])


def dump_contexts(
    model,
    contexts: Iterable[str],
    out_path: str | Path,
    k: int = 64,
    vocab_path: str | Path | None = None,
) -> Path:
    """Record the model at exactly the given contexts, one dump file.

    Duplicate contexts collapse to one record. Use this when some outer
    decoding loop (an ensemble, say) chose the contexts; `dump_run` is the
    self-driving variant.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    provider = _provider(model)
    vocab = tuple(provider.tokens())
    keep = min(k, len(vocab))
    records = []
    seen = set()
    for context in contexts:
        if context_hash(context) in seen:
            continue
        seen.add(context_hash(context))
        record, _ = _record(provider, vocab, context, len(records), keep)
        records.append(record)
    fp = write_vocab(vocab_path, vocab) if vocab_path is not None else vocab_fingerprint(vocab)
    write_dump_file(out_path, DumpHeader(k=keep, vocab_fp=fp), records)
    return Path(out_path)


def _greedy_records(
    provider, vocab: tuple[str, ...], prompt: str, k: int, max_steps: int, stop_token: str | None, joiner: str
) -> list[StepDump]:
    records = []
    text = ""
    for step in range(max_steps):
        record, top_id = _record(provider, vocab, prompt + text, step, k)
        records.append(record)
        token = vocab[top_id]
        if token == stop_token:
            break
        text += joiner + token
    return records


def dump_run(
    model,
    prompts: Sequence[str],
    out_dir: str | Path,
    k: int = 64,
    max_steps: int = 12,
    stop_token: str | None = ";",
    joiner: str = "",
) -> DumpResult:
    """Greedy-decode each prompt, recording every visited context.

    Writes one vocabulary file for the model and one JSONL dump per prompt
    into out_dir. `model` is a provider instance or a reference string for
    `resolve`. The walk follows the model's own argmax token, extends the
    context with `joiner` + token, and stops at `stop_token` or after
    `max_steps` steps.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    provider = _provider(model)
    vocab = tuple(provider.tokens())
    keep = min(k, len(vocab))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    vocab_path = out / f"{provider.model_id}.vocab"
    fp = write_vocab(vocab_path, vocab)
    dump_paths = []
    for i, prompt in enumerate(prompts):
        records = _greedy_records(provider, vocab, prompt, keep, max_steps, stop_token, joiner)
        path = out / f"{provider.model_id}__prompt{i:03d}.jsonl"
        write_dump_file(path, DumpHeader(k=keep, vocab_fp=fp), records)
        dump_paths.append(path)
    return DumpResult(provider.model_id, vocab_path, tuple(dump_paths))
