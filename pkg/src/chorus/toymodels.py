"""Count-based n-gram language models over the toy tokenizers.

These stand in for real language models: deterministic, trainable in
milliseconds, and honest about uncertainty (facts absent from a model's
corpus leave it close to its fallback distribution). A model of order n
keeps counts for every context length 0..n-1 and backs off to the longest
context it has seen, so an unseen context degrades gracefully down to the
unigram distribution.
"""

from __future__ import annotations

import hashlib
from collections import Counter

import numpy as np

from .errors import EmptyCorpus
from .fusion import Distribution
from .tokenizers import GREEDY_MERGE, WHITESPACE, Tokenizer

DEFAULT_SMOOTHING = 0.1


class NGramModel:
    """Immutable once trained; step() is deterministic and cached per context."""

    def __init__(self, tokenizer: Tokenizer, order: int, counts: dict, smoothing: float):
        if order < 1:
            raise ValueError("order must be >= 1")
        if smoothing < 0:
            raise ValueError("smoothing must be >= 0")
        self.tokenizer = tokenizer
        self.order = order
        self.smoothing = smoothing
        self._counts = counts
        self._cache: dict[tuple[int, ...], Distribution] = {}
        self.fingerprint = self._fingerprint()

    def _fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(self.tokenizer.vocabulary.fingerprint.encode())
        h.update(f"|{self.tokenizer.scheme}|{self.order}|{self.smoothing!r}|".encode())
        for ctx in sorted(self._counts):
            h.update(repr((ctx, sorted(self._counts[ctx].items()))).encode())
        return h.hexdigest()[:16]

    def _context_ids(self, text: str) -> list[int]:
        """Tokenize a decoding context, tolerating boundary mismatch.

        Word-level models constantly see contexts that stop mid-word or
        contain words fused from other models' token choices; they condition
        on the longest suffix of complete, known words instead of failing.
        """
        vocab = self.tokenizer.vocabulary
        if self.tokenizer.scheme != WHITESPACE:
            return self.tokenizer.encode(text)
        words = [w for w in text.split(" ") if w]
        if words and text and not text.endswith(" "):
            # The trailing piece is complete only if it is a known word that
            # no longer vocabulary word extends; otherwise more characters
            # of it may still arrive, so it cannot be conditioned on.
            piece = words[-1]
            extendable = any(
                w.startswith(piece) and w != piece for w in vocab.tokens
            )
            if piece not in vocab or extendable:
                words.pop()
        kept: list[str] = []
        for word in reversed(words):
            if word not in vocab:
                break
            kept.append(word)
        kept.reverse()
        return [vocab.id_of(w) for w in kept]

    def step(self, text: str) -> Distribution:
        """Next-token distribution given the text context so far."""
        ids = self._context_ids(text)
        max_len = min(self.order - 1, len(ids))
        for length in range(max_len, -1, -1):
            ctx = tuple(ids[len(ids) - length :])
            if ctx in self._counts:
                return self._distribution_for(ctx)
        raise AssertionError("unigram context is always present")

    def _distribution_for(self, ctx: tuple[int, ...]) -> Distribution:
        hit = self._cache.get(ctx)
        if hit is not None:
            return hit
        size = len(self.tokenizer.vocabulary)
        probs = np.full(size, self.smoothing)
        for token_id, count in self._counts[ctx].items():
            probs[token_id] += count
        dist = Distribution(self.tokenizer.vocabulary.fingerprint, probs / probs.sum())
        self._cache[ctx] = dist
        return dist


def train_ngram(
    corpus: list[str],
    tokenizer: Tokenizer,
    order: int,
    smoothing: float = DEFAULT_SMOOTHING,
) -> NGramModel:
    """Count every context of length 0..order-1 across the corpus documents.

    Merge-scheme models are counted at every character cut of each document
    (context = greedy encode of the prefix, target = first token of the
    greedily re-encoded remainder). Greedy merges otherwise swallow natural
    stopping points, leaving decode-time contexts that never occurred as
    training token boundaries.
    """
    counts: dict[tuple[int, ...], Counter] = {}
    positions = 0

    def bump(ctx_ids: list[int], target: int, weight: int) -> None:
        for length in range(0, min(order - 1, len(ctx_ids)) + 1):
            ctx = tuple(ctx_ids[len(ctx_ids) - length :])
            bucket = counts.get(ctx)
            if bucket is None:
                bucket = counts[ctx] = Counter()
            bucket[target] += weight

    for doc, weight in Counter(corpus).items():
        if tokenizer.scheme == GREEDY_MERGE:
            for cut in range(len(doc)):
                prefix_ids = tokenizer.encode(doc[:cut])
                bump(prefix_ids, tokenizer.encode(doc[cut:])[0], weight)
                positions += weight
        else:
            ids = tokenizer.encode(doc)
            positions += len(ids) * weight
            for i, token_id in enumerate(ids):
                bump(ids[:i], token_id, weight)
    if positions == 0:
        raise EmptyCorpus("corpus produced no tokens")
    return NGramModel(tokenizer, order, counts, smoothing)
