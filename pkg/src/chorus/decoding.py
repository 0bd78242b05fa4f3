"""Step-wise ensemble decoding across heterogeneous tokenizers.

The session holds one text context string. Every step, each endpoint
re-encodes that text with its own tokenizer and returns a next-token
distribution over its own vocabulary; assistants are projected into the
fusion space via their alignment maps, everything is fused, and the chosen
token's text is appended. Text-level synchronization is quadratic in
sequence length but exact, and desk-scale sequences are short.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .alignment import AlignmentMap, project
from .errors import FingerprintMismatch, MainEndpointFailure
from .fusion import ConsistencyReport, Distribution, EnsembleConfig, fuse
from .tokenizers import Tokenizer
from .vocab import Vocabulary

MAIN = "main"
ASSISTANT = "assistant"

GREEDY = "greedy"
SAMPLE = "sample"


@dataclass(frozen=True)
class ModelEndpoint:
    """A model the engine can query: id, tokenizer, and a step function."""

    id: str
    tokenizer: Tokenizer
    step: Callable[[str], Distribution]
    role: str = ASSISTANT

    def __post_init__(self):
        if self.role not in (MAIN, ASSISTANT):
            raise ValueError(f"unknown role {self.role!r}")


@dataclass
class DecodeSession:
    """One main endpoint, N assistants, and everything needed to fuse them.

    The fusion space defaults to the main model's vocabulary; passing a
    union vocabulary plus a main_map moves fusion into that shared space
    (the main distribution is then projected like any assistant's).
    """

    config: EnsembleConfig
    main: ModelEndpoint
    assistants: Sequence[ModelEndpoint] = ()
    maps: dict[str, AlignmentMap] = field(default_factory=dict)
    fusion_vocab: Vocabulary | None = None
    main_map: AlignmentMap | None = None
    selection: str = GREEDY
    seed: int = 0
    stop_token: str | None = None
    max_steps: int = 32
    record: bool = True
    # Joiner inserted before each emitted token when growing the context,
    # for fusion spaces whose tokens are space-separated words.
    token_joiner: str = ""
    # Optional per-endpoint transforms applied to fusion-space distributions
    # (after projection), keyed by endpoint id.  Used for noise injection.
    transforms: dict[str, Callable[[str, Distribution], Distribution]] = field(
        default_factory=dict
    )

    def __post_init__(self):
        if self.main.role != MAIN:
            raise ValueError("session main endpoint must have the main role")
        if self.fusion_vocab is None:
            self.fusion_vocab = self.main.tokenizer.vocabulary
            if self.main_map is not None:
                raise ValueError("main_map requires an explicit fusion_vocab")
        space_fp = self.fusion_vocab.fingerprint
        if self.main_map is None:
            if self.main.tokenizer.vocabulary.fingerprint != space_fp:
                raise ValueError("main vocabulary differs from fusion space but no main_map given")
        else:
            if self.main_map.assist_fingerprint != self.main.tokenizer.vocabulary.fingerprint:
                raise FingerprintMismatch("main_map does not start from the main vocabulary")
            if self.main_map.main_fingerprint != space_fp:
                raise FingerprintMismatch("main_map does not land in the fusion space")
        for endpoint in self.assistants:
            if endpoint.role != ASSISTANT:
                raise ValueError(f"endpoint {endpoint.id!r} must have the assistant role")
            amap = self.maps.get(endpoint.id)
            if amap is None:
                raise ValueError(f"no alignment map for assistant {endpoint.id!r}")
            if amap.assist_fingerprint != endpoint.tokenizer.vocabulary.fingerprint:
                raise FingerprintMismatch(f"map for {endpoint.id!r} does not match its vocabulary")
            if amap.main_fingerprint != space_fp:
                raise FingerprintMismatch(f"map for {endpoint.id!r} does not land in the fusion space")
        if self.selection not in (GREEDY, SAMPLE):
            raise ValueError(f"unknown selection rule {self.selection!r}")
        self._rng = np.random.default_rng(self.seed)

    def endpoint_ids(self) -> list[str]:
        return [self.main.id] + [a.id for a in self.assistants]


def _main_distribution(session: DecodeSession, context: str) -> Distribution:
    try:
        dist = session.main.step(context)
    except Exception as err:
        raise MainEndpointFailure(f"main endpoint {session.main.id!r} failed: {err}") from err
    if session.main_map is not None:
        projection = project(dist, session.main_map)
        if projection.abstain:
            raise MainEndpointFailure(
                f"main endpoint {session.main.id!r} lost all mass in the fusion space"
            )
        dist = projection.dist
    transform = session.transforms.get(session.main.id)
    return dist if transform is None else transform(context, dist)


def decode_step(
    session: DecodeSession, context: str
) -> tuple[int, Distribution, ConsistencyReport]:
    """Fuse one step and pick a token id in the fusion space."""
    main_dist = _main_distribution(session, context)
    projected: list[Distribution | None] = []
    for endpoint in session.assistants:
        try:
            raw = endpoint.step(context)
        except Exception:
            projected.append(None)  # endpoint failure: excluded this step
            continue
        projection = project(raw, session.maps[endpoint.id])
        if projection.abstain:
            projected.append(None)
            continue
        dist = projection.dist
        transform = session.transforms.get(endpoint.id)
        projected.append(dist if transform is None else transform(context, dist))
    fused, report = fuse(main_dist, projected, session.config)
    if session.selection == GREEDY:
        chosen = int(np.argmax(fused.probs))  # first max: lowest token id wins ties
    else:
        chosen = int(session._rng.choice(len(fused.probs), p=fused.probs))
    return chosen, fused, report


def decode(
    session: DecodeSession, prompt: str, report_sink: list | None = None
) -> tuple[str, list[dict]]:
    """Decode until the stop token or the step budget; returns (generated, transcript).

    report_sink, when given, receives the full in-memory ConsistencyReport
    per step (vectors included), for callers that need more than the
    scalar-only transcript entries.
    """
    context = prompt
    generated = ""
    transcript: list[dict] = []
    ids = session.endpoint_ids()
    for step_index in range(session.max_steps):
        chosen, _, report = decode_step(session, context)
        if report_sink is not None:
            report_sink.append(report)
        token_text = session.fusion_vocab.token(chosen)
        piece = session.token_joiner + token_text
        context += piece
        generated += piece
        if session.record:
            entry = report.to_dict(ids)
            entry["step"] = step_index
            entry["chosen"] = chosen
            entry["token"] = token_text
            entry["text"] = generated
            transcript.append(entry)
        if session.stop_token is not None and session.stop_token in token_text:
            break
    return generated, transcript
