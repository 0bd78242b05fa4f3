"""Model backends a dump run can tap.

A provider is anything with a `model_id` string, a `tokens()` method giving
the ordered vocabulary, a `scores(context)` method returning one float per
token, and an `emits` attribute saying whether those floats are raw logits
(softmaxed downstream) or already-normalized probabilities.

`resolve` turns a command-line model reference into a provider:

    tiny[:seed[:sharpness]]   built-in deterministic hash model, no ML runtime
    transformers:<name>       any causal LM the transformers library can load
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

from .errors import ModelLoadError, TokenizationError

LOGITS = "logits"
PROBS = "probs"

# Small fixed inventory for the built-in backend: letters, digits, a space,
# and a stop mark so greedy walks can terminate.
TINY_TOKENS = tuple("abcdefgh") + tuple("0123") + (" ", ";")


@dataclass(frozen=True)
class TinyModel:
    """A reproducible stand-in endpoint: scores come from hashing.

    Each (seed, context, token) triple hashes to a logit in [0, sharpness),
    so runs are bit-identical across machines and no weights are involved.
    Exists so dumping and validation can be exercised without an ML runtime.
    """

    seed: int = 0
    sharpness: float = 6.0
    vocabulary: tuple[str, ...] = TINY_TOKENS
    model_id: str = field(init=False)
    emits = LOGITS

    def __post_init__(self):
        object.__setattr__(self, "model_id", f"tiny-{self.seed}")

    def tokens(self) -> tuple[str, ...]:
        return self.vocabulary

    def scores(self, context: str) -> list[float]:
        out = []
        for tok in self.vocabulary:
            payload = f"{self.seed}|{context}|{tok}".encode("utf-8")
            digest = hashlib.sha256(payload).digest()
            unit = int.from_bytes(digest[:8], "big") / 2.0**64
            out.append(unit * self.sharpness)
        return out


class TransformersModel:
    """Per-step logits from a causal LM loaded via the transformers library.

    Import and model load both happen lazily here so the rest of the package
    stays runnable without torch installed.
    """

    emits = LOGITS

    def __init__(self, name: str):
        try:
            import torch
            from transformers import AutoModelForCausalLM, AutoTokenizer
        except ImportError as exc:
            raise ModelLoadError(f"transformers backend unavailable: {exc}") from exc
        self._torch = torch
        try:
            self._tokenizer = AutoTokenizer.from_pretrained(name)
            self._model = AutoModelForCausalLM.from_pretrained(name)
        except Exception as exc:
            raise ModelLoadError(f"cannot load {name!r}: {exc}") from exc
        self._model.eval()
        self.model_id = name.rsplit("/", 1)[-1]

    def tokens(self) -> tuple[str, ...]:
        size = len(self._tokenizer)
        return tuple(self._tokenizer.convert_ids_to_tokens(list(range(size))))

    def scores(self, context: str) -> list[float]:
        encoded = self._tokenizer(context, return_tensors="pt")
        if encoded.input_ids.numel() == 0:
            raise TokenizationError(f"tokenizer produced no ids for {context!r}")
        with self._torch.no_grad():
            logits = self._model(**encoded).logits
        return logits[0, -1].tolist()


def resolve(ref: str):
    """Model reference string -> provider instance."""
    kind, _, rest = ref.partition(":")
    if kind == "tiny":
        parts = rest.split(":") if rest else []
        try:
            seed = int(parts[0]) if parts else 0
            sharpness = float(parts[1]) if len(parts) > 1 else 6.0
        except ValueError as exc:
            raise ModelLoadError(f"bad tiny model ref {ref!r}: {exc}") from exc
        return TinyModel(seed=seed, sharpness=sharpness)
    if kind == "transformers":
        if not rest:
            raise ModelLoadError("transformers ref needs a model name, e.g. transformers:gpt2")
        return TransformersModel(rest)
    raise ModelLoadError(f"unknown model ref {ref!r} (expected tiny[:...] or transformers:<name>)")
