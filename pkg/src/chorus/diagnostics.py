"""Export the observation quantities behind each fusion decision.

Long-format CSV, one measurement per row (quantity,value,label,model,step):

  delta            disparity |p_tilde - p_star| at an alignment row's target,
                   labeled aligned/misaligned against the unperturbed map
  entropy          Shannon entropy of each model's step distribution,
                   labeled correct/wrong by the decoded answer's score
  consistency_sum  summed token consistency (the filter mass a model kept),
                   same correct/wrong label
  model_score      consistency_sum over floored entropy, the quantity that
                   actually drives weighting, same correct/wrong label

The labels are ground truth, not estimates: the harness injected the
alignment noise itself and scored the generation against the task's gold
answer, so every sample can be tagged with what really happened.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

from .alignment import AlignmentMap
from .decoding import decode
from .errors import MissingLabels
from .experiment import ExperimentBundle, _cell_session
from .fusion import ConsistencyReport
from .tasks import score

DIAG_COLUMNS = ("quantity", "value", "label", "model", "step")

DISPARITY = "delta"
ENTROPY = "entropy"
CONSISTENCY_SUM = "consistency_sum"
MODEL_SCORE = "model_score"

ALIGNED = "aligned"
MISALIGNED = "misaligned"
CORRECT = "correct"
WRONG = "wrong"


@dataclass(frozen=True)
class SessionTrace:
    """One decoded task plus the ground truth needed to label its samples.

    reports holds one ConsistencyReport per fused step, vectors included
    (decode's report_sink). used_maps are the alignment maps the session
    actually decoded with; a row whose target differs from clean_maps is
    ground-truth misaligned.
    """

    model_ids: tuple[str, ...]
    reports: Sequence[ConsistencyReport]
    correct: bool | None = None
    clean_maps: Mapping[str, AlignmentMap] | None = None
    used_maps: Mapping[str, AlignmentMap] | None = None


def misaligned_rows(clean: AlignmentMap, used: AlignmentMap) -> set[int]:
    """Assist-token ids whose target changed relative to the clean map."""
    clean_targets = dict(clean.pairs)
    return {a for a, m in used.pairs if clean_targets.get(a) != m}


def _trace_samples(trace: SessionTrace) -> Iterator[tuple]:
    if trace.correct is None:
        raise MissingLabels("trace lacks answer correctness; score it before exporting")
    if trace.clean_maps is None or trace.used_maps is None:
        raise MissingLabels("trace lacks the clean/used alignment maps noise was injected into")
    outcome = CORRECT if trace.correct else WRONG
    wrong_rows = {
        model_id: misaligned_rows(trace.clean_maps[model_id], used)
        for model_id, used in trace.used_maps.items()
    }
    for step, report in enumerate(trace.reports):
        if len(report.models) != len(trace.model_ids):
            raise MissingLabels("trace model ids do not match its reports")
        for model_id, entry in zip(trace.model_ids, report.models):
            if entry.abstain:
                continue
            yield (ENTROPY, entry.entropy, outcome, model_id, step)
            yield (CONSISTENCY_SUM, float(entry.s_t.sum()), outcome, model_id, step)
            yield (MODEL_SCORE, entry.raw_score, outcome, model_id, step)
            used = trace.used_maps.get(model_id)
            if used is None or entry.delta is None:
                continue
            bad = wrong_rows[model_id]
            for assist_id, main_id in used.pairs:
                label = MISALIGNED if assist_id in bad else ALIGNED
                yield (DISPARITY, float(entry.delta[main_id]), label, model_id, step)


def diagnostics_export(traces: Iterable[SessionTrace], path: str | Path) -> int:
    """Write all samples from `traces` as CSV; returns the sample count."""
    path = Path(path)
    count = 0
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(DIAG_COLUMNS)
        for trace in traces:
            for row in _trace_samples(trace):
                writer.writerow(row)
                count += 1
    return count


def collect_traces(
    bundle: ExperimentBundle,
    mode: str,
    rho: float,
    std: float,
    seed: int,
    limit: int | None = None,
) -> list[SessionTrace]:
    """Decode (part of) the suite in one sweep cell, keeping full reports."""
    session = _cell_session(bundle, mode, rho, std, seed)
    suite = bundle.suite if limit is None else bundle.suite[:limit]
    model_ids = tuple(session.endpoint_ids())
    traces = []
    for instance in suite:
        reports: list[ConsistencyReport] = []
        generated, _ = decode(session, instance.prompt, report_sink=reports)
        traces.append(
            SessionTrace(
                model_ids=model_ids,
                reports=reports,
                correct=bool(score(generated, instance)),
                clean_maps=bundle.clean_maps,
                used_maps=session.maps,
            )
        )
    return traces
